//! Self-verification suites: closed forms against the dense oracle, the
//! tridiagonal inverse, analytic gradients against finite differences, and
//! the Kronecker grid shortcut against dense evaluation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fisher::{self, IncrementGradient};
use crate::model::{CovarianceParams, GridDesign, MonotoneDesign, Point};
use crate::oracle;
use crate::sim::replication_rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Largest design size in the oracle and inverse suites.
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
    /// Scale every closed-form value by `1 + 1e-6`; all suites must then fail.
    pub self_test: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_max: 10,
            trials: 200,
            seed: 0,
            self_test: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteResult {
    fn new(name: &'static str, trials: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name,
            trials,
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const INVERSE_TOLERANCE: f64 = 1e-10;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const GRADIENT_STEP: f64 = 1e-6;

/// Random monotone design with increments drawn uniformly from `[lo, hi]`.
pub fn random_monotone(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> MonotoneDesign {
    let origin = Point::new(rng.random_range(0.01..1.0), rng.random_range(0.01..1.0));
    let d = (1..n).map(|_| rng.random_range(lo..=hi)).collect();
    let delta = (1..n).map(|_| rng.random_range(lo..=hi)).collect();
    MonotoneDesign::from_increments(origin, d, delta).expect("positive increments")
}

pub fn random_params(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> CovarianceParams {
    CovarianceParams::correlation(rng.random_range(lo..=hi), rng.random_range(lo..=hi)).expect("positive rates")
}

/// Strictly increasing coordinates with gaps in `[0.05, 1]`.
pub fn random_axis(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut x = rng.random_range(0.0..1.0);
    (0..len)
        .map(|_| {
            let v = x;
            x += rng.random_range(0.05..1.0);
            v
        })
        .collect()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Largest mixed error `|g − fd| / (1 + |fd|)` of an analytic increment
/// gradient against central differences.
pub fn gradient_error<F>(design: &MonotoneDesign, analytic: &IncrementGradient, h: f64, f: F) -> Result<f64>
where
    F: Fn(&MonotoneDesign) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    for which in 0..2 {
        for i in 0..design.d().len() {
            let shifted = |sign: f64| -> Result<f64> {
                let mut d = design.d().to_vec();
                let mut e = design.delta().to_vec();
                if which == 0 {
                    d[i] += sign * h;
                } else {
                    e[i] += sign * h;
                }
                f(&MonotoneDesign::from_increments(design.origin(), d, e)?)
            };
            let fd = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * h);
            let g = if which == 0 { analytic.d[i] } else { analytic.delta[i] };
            worst = worst.max((g - fd).abs() / (1.0 + fd.abs()));
        }
    }
    Ok(worst)
}

pub fn run(opts: &VerifyOptions) -> Result<Vec<SuiteResult>> {
    if opts.trials == 0 {
        return Ok(Vec::new());
    }
    let bump = if opts.self_test { 1.0 + 1e-6 } else { 1.0 };
    let n_max = opts.n_max.max(2);
    let mut out = Vec::new();

    // closed forms against 1ᵀC⁻¹1 and the trace formulas
    let mut worst: f64 = 0.0;
    for k in 0..opts.trials {
        let mut rng = replication_rng(opts.seed, k as u64);
        let n = rng.random_range(2..=n_max);
        let des = random_monotone(&mut rng, n, 0.05, 2.0);
        let p = random_params(&mut rng, 0.2, 5.0);
        let closed = fisher::covariance_information(&des, &p)?;
        let dense = oracle::covariance_information_oracle(des.points(), &p)?;
        let mt = fisher::trend_information(&des, &p) * bump;
        worst = worst
            .max(relative_error(mt, oracle::trend_information_oracle(des.points(), &p)?))
            .max(relative_error(closed.m_alpha * bump, dense.m_alpha))
            .max(relative_error(closed.m_beta * bump, dense.m_beta))
            .max(relative_error(closed.m_alpha_beta * bump, dense.m_alpha_beta));
    }
    out.push(SuiteResult::new(
        "oracle-equivalence",
        opts.trials,
        worst,
        ORACLE_TOLERANCE,
    ));

    // tridiagonal inverse
    let mut worst: f64 = 0.0;
    for k in 0..opts.trials {
        let mut rng = replication_rng(opts.seed ^ 0x1, k as u64);
        let n = rng.random_range(2..=n_max);
        let des = random_monotone(&mut rng, n, 0.05, 2.0);
        let p = random_params(&mut rng, 0.2, 5.0);
        let inv = oracle::closed_form_inverse(&des, &p)?.map(|_, _, v| v * bump);
        let c = oracle::build_covariance_monotone(&des, &p);
        worst = worst.max(oracle::identity_residual(&c, &inv));
    }
    out.push(SuiteResult::new("inverse", opts.trials, worst, INVERSE_TOLERANCE));

    // analytic gradients of Φ and Ψ
    let mut worst: f64 = 0.0;
    for k in 0..opts.trials {
        let mut rng = replication_rng(opts.seed ^ 0x2, k as u64);
        let n = rng.random_range(3..=n_max.clamp(3, 8));
        let des = random_monotone(&mut rng, n, 0.05, 2.0);
        let p = random_params(&mut rng, 0.2, 5.0);
        let mut gp = fisher::phi_gradient(&des, &p)?;
        let mut gq = fisher::psi_gradient(&des, &p)?;
        if opts.self_test {
            // a relative bump is invisible on tiny gradients; shift instead
            for g in [&mut gp, &mut gq] {
                g.d.iter_mut().for_each(|v| *v += 1e-3);
            }
        }
        worst = worst
            .max(gradient_error(&des, &gp, GRADIENT_STEP, |d| fisher::phi(d, &p))?)
            .max(gradient_error(&des, &gq, GRADIENT_STEP, |d| fisher::psi(d, &p))?);
    }
    out.push(SuiteResult::new("gradient", opts.trials, worst, GRADIENT_TOLERANCE));

    // Kronecker grid shortcut against dense evaluation
    let mut worst: f64 = 0.0;
    let side_max = (n_max + 2).min(12);
    for k in 0..opts.trials {
        let mut rng = replication_rng(opts.seed ^ 0x3, k as u64);
        let nt = rng.random_range(1..=side_max);
        let ns = rng.random_range(1..=side_max);
        let grid = GridDesign::new(random_axis(&mut rng, nt), random_axis(&mut rng, ns))?;
        let p = random_params(&mut rng, 0.2, 5.0);
        let fast = oracle::grid_trend_information(&grid, &p)? * bump;
        worst = worst.max(relative_error(
            fast,
            oracle::trend_information_oracle(&grid.points(), &p)?,
        ));
    }
    out.push(SuiteResult::new("kronecker", opts.trials, worst, ORACLE_TOLERANCE));

    Ok(out)
}
