//! Monte-Carlo checks of the information formulas: sampling the sheet at
//! design points, GLS trend estimation, the Gaussian likelihood of a
//! monotone design and profile maximum likelihood for `(α, β)`.
//!
//! Random numbers come from ChaCha8 with one stream per replication, so a
//! replication's draws depend only on `(seed, index)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fisher;
use crate::model::{q_values, CovarianceParams, MonotoneDesign, Point, DEFAULT_INCREMENT_FLOOR};
use crate::oracle::{self, SpdFactor};
use crate::simplex::{self, NelderMeadOptions};

/// Recorded in every simulation manifest.
pub const GENERATOR: &str =
    "ChaCha8Rng(rand_chacha 0.9; stream = replication index) + StandardNormal(rand_distr 0.5, ziggurat)";

/// Random stream for one replication.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replications: usize,
    pub theta_true: f64,
    pub params_true: CovarianceParams,
    /// How many of the replications also run an ML fit of `(α, β)`.
    pub ml_replications: usize,
}

impl SimulationConfig {
    pub fn new(seed: u64, replications: usize, theta_true: f64, params_true: CovarianceParams) -> Result<Self> {
        let cfg = Self {
            seed,
            replications,
            theta_true,
            params_true,
            ml_replications: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("replications must be >= 1".into()));
        }
        if self.ml_replications > self.replications {
            return Err(Error::Domain("ml_replications cannot exceed replications".into()));
        }
        if !self.theta_true.is_finite() {
            return Err(Error::Domain("theta must be finite".into()));
        }
        Ok(())
    }
}

/// Draws `θ·1 + σ·L·z` for a fixed point set.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    factor: SpdFactor,
    sigma: f64,
}

impl FieldSampler {
    pub fn new(points: &[Point], params: &CovarianceParams) -> Result<Self> {
        let factor = oracle::spd_factor(&oracle::correlation_matrix(points, params))?;
        Ok(Self {
            factor,
            sigma: params.sigma(),
        })
    }

    pub fn len(&self) -> usize {
        self.factor.order()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.order() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.len()).map(|_| rng.sample(StandardNormal)).collect();
        self.factor
            .mul_lower(&z)
            .into_iter()
            .map(|v| theta + self.sigma * v)
            .collect()
    }
}

pub fn sample_field<R: Rng + ?Sized>(
    points: &[Point],
    params: &CovarianceParams,
    theta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(FieldSampler::new(points, params)?.sample(theta, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlsEstimate {
    pub theta_hat: f64,
    /// `σ² / M_θ`.
    pub variance: f64,
}

/// Generalized least squares estimate of the constant trend.
pub fn gls_trend_estimate(y: &[f64], points: &[Point], params: &CovarianceParams) -> Result<GlsEstimate> {
    if y.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: y.len(),
        });
    }
    let factor = oracle::spd_factor(&oracle::correlation_matrix(points, params))?;
    let w = factor.solve(&vec![1.0; points.len()])?;
    let m_theta: f64 = w.iter().sum();
    let num: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(GlsEstimate {
        theta_hat: num / m_theta,
        variance: params.sigma().powi(2) / m_theta,
    })
}

/// Whitened residuals of a monotone design: `e_1 = r_1`,
/// `e_{i+1} = (r_{i+1} − q_i r_i)/√(1 − q_i²)`, so `rᵀC⁻¹r = Σ e²`.
fn whiten(r: &[f64], q: &[f64], one_minus_q2: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(r.len());
    if let Some(&r0) = r.first() {
        e.push(r0);
    }
    for i in 0..q.len() {
        e.push((r[i + 1] - q[i] * r[i]) / one_minus_q2[i].sqrt());
    }
    e
}

struct MonotoneChain {
    q: Vec<f64>,
    one_minus_q2: Vec<f64>,
}

impl MonotoneChain {
    fn new(design: &MonotoneDesign, params: &CovarianceParams) -> Result<Self> {
        design.check_floor(params, DEFAULT_INCREMENT_FLOOR)?;
        Ok(Self {
            q: q_values(design, params),
            one_minus_q2: design
                .skewed_increments(params)
                .into_iter()
                .map(|x| -(-2.0 * x).exp_m1())
                .collect(),
        })
    }

    fn log_det(&self) -> f64 {
        self.one_minus_q2.iter().map(|v| v.ln()).sum()
    }

    fn whiten(&self, r: &[f64]) -> Vec<f64> {
        whiten(r, &self.q, &self.one_minus_q2)
    }

    /// GLS estimate using the O(n) whitening.
    fn gls(&self, y: &[f64]) -> f64 {
        let wy = self.whiten(y);
        let w1 = self.whiten(&vec![1.0; y.len()]);
        let num: f64 = w1.iter().zip(&wy).map(|(a, b)| a * b).sum();
        let den: f64 = w1.iter().map(|a| a * a).sum();
        num / den
    }

    fn log_likelihood(&self, y: &[f64], theta: f64, sigma: f64) -> f64 {
        let n = y.len() as f64;
        let r: Vec<f64> = y.iter().map(|v| v - theta).collect();
        let quad: f64 = self.whiten(&r).iter().map(|e| e * e).sum();
        let s2 = sigma * sigma;
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + n * s2.ln() + self.log_det() + quad / s2)
    }
}

fn check_len(y: &[f64], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    Ok(())
}

/// Gaussian log-density of `y` under mean `θ·1` and covariance `σ²C`,
/// computed in O(n) from the Markov structure of monotone designs.
pub fn log_likelihood(y: &[f64], design: &MonotoneDesign, theta: f64, params: &CovarianceParams) -> Result<f64> {
    check_len(y, design.len())?;
    Ok(MonotoneChain::new(design, params)?.log_likelihood(y, theta, params.sigma()))
}

/// Same density by dense Cholesky factorization, for any distinct points.
pub fn log_likelihood_dense(y: &[f64], points: &[Point], theta: f64, params: &CovarianceParams) -> Result<f64> {
    check_len(y, points.len())?;
    let factor = oracle::spd_factor(&oracle::correlation_matrix(points, params))?;
    let r: Vec<f64> = y.iter().map(|v| v - theta).collect();
    let z = factor.forward(&r);
    let quad: f64 = z.iter().map(|v| v * v).sum();
    let n = y.len() as f64;
    let s2 = params.sigma().powi(2);
    Ok(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + n * s2.ln() + factor.log_det() + quad / s2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MlFit {
    pub theta_hat: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub log_likelihood: f64,
    /// The simplex converged and neither rate sits on its search bound.
    pub converged: bool,
    pub at_bound: bool,
}

/// Search box for the rates, as multiples of the initial values.
const RATE_RANGE: f64 = 1e4;
/// Distance in log-rate units that counts as sitting on the box.
const LOG_BOUND_TOL: f64 = 1e-3;

/// Profile maximum likelihood of `(α, β)` with `σ` known; `θ` is profiled
/// out by GLS at each trial point. The search runs over log-rates inside
/// `[init/1e4, init·1e4]`.
pub fn ml_fit(y: &[f64], design: &MonotoneDesign, init: &CovarianceParams) -> Result<MlFit> {
    if design.len() < 3 {
        return Err(Error::Domain(format!("ml_fit needs n >= 3, got {}", design.len())));
    }
    check_len(y, design.len())?;
    let sigma = init.sigma();
    let center = [init.alpha().ln(), init.beta().ln()];
    let half = RATE_RANGE.ln();
    let lo = [center[0] - half, center[1] - half];
    let hi = [center[0] + half, center[1] + half];

    let profile = |x: &[f64]| -> Option<(f64, f64)> {
        let p = CovarianceParams::new(x[0].exp(), x[1].exp(), sigma).ok()?;
        let chain = MonotoneChain::new(design, &p).ok()?;
        let theta = chain.gls(y);
        let ll = chain.log_likelihood(y, theta, sigma);
        ll.is_finite().then_some((theta, ll))
    };
    let project = |x: &mut [f64]| {
        for i in 0..2 {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let opts = NelderMeadOptions {
        max_iterations: 2000,
        f_tolerance: 1e-12,
        x_tolerance: 1e-9,
    };
    let mut x = center.to_vec();
    let mut best = profile(&x).map_or(f64::NEG_INFINITY, |v| v.1);
    let mut converged = false;
    for _ in 0..6 {
        let res = simplex::minimize(
            |x| profile(x).map_or(f64::INFINITY, |v| -v.1),
            project,
            &x,
            &[0.3, 0.3],
            &opts,
        );
        converged = res.converged;
        let gain = -res.value - best;
        if -res.value >= best {
            x = res.x;
            best = -res.value;
        }
        if gain <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
    }
    let at_bound = (0..2).any(|i| x[i] - lo[i] < LOG_BOUND_TOL || hi[i] - x[i] < LOG_BOUND_TOL);
    let (theta_hat, log_likelihood) =
        profile(&x).ok_or_else(|| Error::Domain("likelihood undefined at optimum".into()))?;
    Ok(MlFit {
        theta_hat,
        alpha_hat: x[0].exp(),
        beta_hat: x[1].exp(),
        log_likelihood,
        converged: converged && !at_bound,
        at_bound,
    })
}

/// Sample covariance of `y` against its theoretical value, entry by entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceCheck {
    pub replications: usize,
    pub empirical_mean: Vec<f64>,
    pub empirical: Vec<Vec<f64>>,
    pub theoretical: Vec<Vec<f64>>,
    /// Largest `|empirical − theoretical| / se` over all entries.
    pub max_standardized_error: f64,
    /// Largest `|mean − θ| / (σ/√R)`.
    pub max_mean_error: f64,
}

/// Draws `replications` field samples and compares their mean and
/// covariance with `(θ·1, σ²C)`. The standard error of entry `(i, j)` is
/// `√((C_ii C_jj + C_ij²)/R)` (Gaussian fourth moments).
pub fn empirical_covariance_check(
    points: &[Point],
    params: &CovarianceParams,
    theta: f64,
    replications: usize,
    seed: u64,
) -> Result<CovarianceCheck> {
    if replications < 2 {
        return Err(Error::Domain("need at least two replications".into()));
    }
    let n = points.len();
    let sampler = FieldSampler::new(points, params)?;
    let mut sum = vec![0.0; n];
    let mut cross = vec![0.0; n * n];
    for rep in 0..replications {
        let y = sampler.sample(theta, &mut replication_rng(seed, rep as u64));
        for i in 0..n {
            sum[i] += y[i];
            for j in 0..=i {
                cross[i * n + j] += (y[i] - theta) * (y[j] - theta);
            }
        }
    }
    let r = replications as f64;
    let s2 = params.sigma().powi(2);
    let c = oracle::correlation_matrix(points, params);
    let mean: Vec<f64> = sum.iter().map(|s| s / r).collect();
    let mut emp = vec![vec![0.0; n]; n];
    let mut theo = vec![vec![0.0; n]; n];
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            // mean is known (θ), so divide by R
            let e = cross[i * n + j] / r;
            let t = s2 * c.get(i, j);
            let se = (s2 * s2 * (c.get(i, i) * c.get(j, j) + c.get(i, j).powi(2)) / r).sqrt();
            worst = worst.max((e - t).abs() / se);
            emp[i][j] = e;
            emp[j][i] = e;
            theo[i][j] = t;
            theo[j][i] = t;
        }
    }
    let mean_se = params.sigma() / r.sqrt();
    let max_mean_error = mean.iter().fold(0.0f64, |m, v| m.max((v - theta).abs() / mean_se));
    Ok(CovarianceCheck {
        replications,
        empirical_mean: mean,
        empirical: emp,
        theoretical: theo,
        max_standardized_error: worst,
        max_mean_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherCheckReport {
    pub replications: usize,
    pub seed: u64,
    pub generator: &'static str,
    pub theta_mean: f64,
    pub theta_variance: f64,
    /// Standard error of `theta_variance`, `v·√(2/(R−1))`.
    pub theta_variance_se: f64,
    /// `σ² / M_θ`.
    pub theta_variance_theory: f64,
    pub ml_attempted: usize,
    pub ml_failed: usize,
    pub alpha_mean: Option<f64>,
    pub beta_mean: Option<f64>,
    pub rate_covariance: Option<[[f64; 2]; 2]>,
    /// `M_r⁻¹`, absent when the covariance information is singular.
    pub rate_covariance_theory: Option<[[f64; 2]; 2]>,
}

impl FisherCheckReport {
    pub fn theta_relative_error(&self) -> f64 {
        (self.theta_variance - self.theta_variance_theory).abs() / self.theta_variance_theory
    }
}

/// Repeated simulate-and-estimate cycles on a monotone design: the sample
/// variance of the GLS trend estimate against `σ²/M_θ`, and (for the first
/// `ml_replications` draws) the sample covariance of the ML rate estimates
/// against `M_r⁻¹`. Failed ML fits are excluded and counted.
pub fn empirical_fisher_check(design: &MonotoneDesign, config: &SimulationConfig) -> Result<FisherCheckReport> {
    config.validate()?;
    let params = &config.params_true;
    let sampler = FieldSampler::new(design.points(), params)?;
    let chain = MonotoneChain::new(design, params)?;

    let mut thetas = Vec::with_capacity(config.replications);
    let mut rates = Vec::with_capacity(config.ml_replications);
    let mut ml_failed = 0;
    for rep in 0..config.replications {
        let mut rng = replication_rng(config.seed, rep as u64);
        let y = sampler.sample(config.theta_true, &mut rng);
        thetas.push(chain.gls(&y));
        if rep < config.ml_replications {
            match ml_fit(&y, design, params) {
                Ok(fit) if fit.converged => rates.push([fit.alpha_hat, fit.beta_hat]),
                _ => ml_failed += 1,
            }
        }
    }

    let r = thetas.len() as f64;
    let theta_mean = thetas.iter().sum::<f64>() / r;
    let theta_variance = if thetas.len() > 1 {
        thetas.iter().map(|t| (t - theta_mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    let theta_variance_se = if thetas.len() > 1 {
        theta_variance * (2.0 / (r - 1.0)).sqrt()
    } else {
        f64::INFINITY
    };

    let (alpha_mean, beta_mean, rate_covariance) = if rates.len() > 1 {
        let k = rates.len() as f64;
        let ma = rates.iter().map(|v| v[0]).sum::<f64>() / k;
        let mb = rates.iter().map(|v| v[1]).sum::<f64>() / k;
        let mut cov = [[0.0; 2]; 2];
        for v in &rates {
            let dv = [v[0] - ma, v[1] - mb];
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += dv[i] * dv[j] / (k - 1.0);
                }
            }
        }
        (Some(ma), Some(mb), Some(cov))
    } else {
        (None, None, None)
    };
    let rate_covariance_theory = if design.len() >= 2 {
        fisher::covariance_information(design, params)?.inverse()
    } else {
        None
    };

    Ok(FisherCheckReport {
        replications: config.replications,
        seed: config.seed,
        generator: GENERATOR,
        theta_mean,
        theta_variance,
        theta_variance_se,
        theta_variance_theory: params.sigma().powi(2) / fisher::trend_information(design, params),
        ml_attempted: config.ml_replications,
        ml_failed,
        alpha_mean,
        beta_mean,
        rate_covariance,
        rate_covariance_theory,
    })
}
