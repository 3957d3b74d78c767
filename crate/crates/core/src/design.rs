//! Design constructors, the geometric-progression sweep, efficiencies and a
//! multistart simplex search over increment vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{self, geometric_ratios, IncrementGradient};
use crate::model::{CovarianceParams, MonotoneDesign, Point, Region};
use crate::simplex::{self, NelderMeadOptions};

/// Equidistant design with `n` points spanning the full region: constant
/// increments `t_span/(n−1)` and `s_span/(n−1)`, starting at the lower
/// corner. Maximizes the trend information among condition-D designs in
/// the region.
pub fn optimal_trend_design(n: usize, region: &Region) -> Result<MonotoneDesign> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    let m = (n - 1) as f64;
    MonotoneDesign::from_increments(
        Point::new(region.a1, region.a2),
        vec![region.t_span() / m; n - 1],
        vec![region.s_span() / m; n - 1],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricDesignSpec {
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    /// `(t_span, s_span)`.
    pub spans: (f64, f64),
}

impl GeometricDesignSpec {
    pub fn unit(n: usize, r1: f64, r2: f64) -> Self {
        Self {
            n,
            r1,
            r2,
            spans: (1.0, 1.0),
        }
    }
}

/// Design with increments `(k, k r1, …, k r1^{n−2})·t_span` and
/// `(ℓ, ℓ r2, …)·s_span`, where `k` and `ℓ` normalize each vector to unit
/// sum. Anchored at the origin.
pub fn geometric_progression_design(spec: &GeometricDesignSpec) -> Result<MonotoneDesign> {
    if spec.n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {}", spec.n)));
    }
    let (t_span, s_span) = spec.spans;
    if !(t_span > 0.0 && s_span > 0.0) {
        return Err(Error::Domain("spans must be positive".into()));
    }
    let d = geometric_ratios(spec.n - 1, spec.r1)?
        .into_iter()
        .map(|c| c * t_span)
        .collect();
    let delta = geometric_ratios(spec.n - 1, spec.r2)?
        .into_iter()
        .map(|c| c * s_span)
        .collect();
    MonotoneDesign::from_increments(Point::new(0.0, 0.0), d, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub r1: f64,
    pub r2: f64,
    pub m_theta: f64,
    pub phi: f64,
    pub psi: f64,
}

/// Ratio grid `{1/res, 2/res, …, 1}`.
pub fn ratio_grid(resolution: usize) -> Vec<f64> {
    (1..=resolution).map(|k| k as f64 / resolution as f64).collect()
}

/// `M_θ`, `Φ` and `Ψ` of the geometric progression design over the ratio
/// grid, `r1` as the outer index.
pub fn geometric_surface(
    n: usize,
    params: &CovarianceParams,
    resolution: usize,
    spans: (f64, f64),
) -> Result<Vec<SurfaceRow>> {
    if resolution < 2 {
        return Err(Error::Domain(format!("resolution must be >= 2, got {resolution}")));
    }
    let grid = ratio_grid(resolution);
    let mut rows = Vec::with_capacity(grid.len() * grid.len());
    for &r1 in &grid {
        for &r2 in &grid {
            let m_theta = fisher::trend_information_geometric(n, r1, r2, params, spans)?;
            let phi = fisher::phi_geometric(n, r1, r2, params, spans)?;
            rows.push(SurfaceRow {
                r1,
                r2,
                m_theta,
                phi,
                psi: m_theta * phi,
            });
        }
    }
    Ok(rows)
}

/// `M_θ(design) / M_θ(reference)`.
pub fn efficiency(design_value: f64, reference_value: f64) -> Result<f64> {
    if !(reference_value > 0.0) {
        return Err(Error::Domain(format!("reference must be > 0, got {reference_value}")));
    }
    Ok(design_value / reference_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Trend,
    Phi,
    Psi,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trend" => Ok(Self::Trend),
            "phi" => Ok(Self::Phi),
            "psi" => Ok(Self::Psi),
            _ => Err(Error::Domain(format!("unknown objective {s:?}"))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Trend => "trend",
            Self::Phi => "phi",
            Self::Psi => "psi",
        })
    }
}

impl Objective {
    pub fn evaluate(&self, design: &MonotoneDesign, params: &CovarianceParams) -> Result<f64> {
        match self {
            Self::Trend => Ok(fisher::trend_information(design, params)),
            Self::Phi => fisher::phi(design, params),
            Self::Psi => fisher::psi(design, params),
        }
    }

    pub fn gradient(&self, design: &MonotoneDesign, params: &CovarianceParams) -> Result<IncrementGradient> {
        match self {
            Self::Trend => {
                let q = crate::model::q_values(design, params);
                let slope: Vec<f64> = q.iter().map(|q| 2.0 * q / ((1.0 + q) * (1.0 + q))).collect();
                Ok(IncrementGradient {
                    d: slope.iter().map(|s| params.alpha() * s).collect(),
                    delta: slope.iter().map(|s| params.beta() * s).collect(),
                })
            }
            Self::Phi => fisher::phi_gradient(design, params),
            Self::Psi => fisher::psi_gradient(design, params),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub objective: Objective,
    pub n: usize,
    pub region: Region,
    pub starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Lower bound on each increment, in skewed units.
    pub floor: f64,
    /// Distance to a bound (skewed units) that counts as "at the bound".
    pub boundary_tolerance: f64,
    /// Gradient norm below which an interior point counts as stationary.
    pub stationarity_tolerance: f64,
    /// Optional first start; the remaining starts are random.
    pub initial: Option<MonotoneDesign>,
}

impl SearchConfig {
    pub fn new(objective: Objective, n: usize, region: Region) -> Self {
        Self {
            objective,
            n,
            region,
            starts: 20,
            max_iterations: 20_000,
            tolerance: 1e-12,
            seed: 0,
            floor: 1e-6,
            boundary_tolerance: 1e-6,
            stationarity_tolerance: 1e-8,
            initial: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!("need n >= 2, got {}", self.n)));
        }
        if self.starts == 0 && self.initial.is_none() {
            return Err(Error::Domain("need at least one start".into()));
        }
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("floor", self.floor),
            ("boundary tolerance", self.boundary_tolerance),
            ("stationarity tolerance", self.stationarity_tolerance),
        ] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be > 0")));
            }
        }
        if let Some(init) = &self.initial {
            if init.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: init.len(),
                });
            }
        }
        Ok(())
    }
}

/// Which constraints are active at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryDiagnostics {
    /// Per coordinate (`d` block first, then `δ`): within tolerance of the floor.
    pub at_floor: Vec<bool>,
    pub t_sum_at_span: bool,
    pub s_sum_at_span: bool,
}

impl BoundaryDiagnostics {
    pub fn any(&self) -> bool {
        self.t_sum_at_span || self.s_sum_at_span || self.at_floor.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Start,
    Terminal,
}

/// An interior stationary point met during the search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalHit {
    pub run: usize,
    pub kind: PointKind,
    pub value: f64,
    pub gradient_norm: f64,
    /// `max_i |ρ_i − ρ_1| / ρ_1` with `ρ_i = d_i/δ_i`; zero on the
    /// proportional family.
    pub proportionality_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub start_value: f64,
    pub final_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub improved: bool,
    pub boundary: BoundaryDiagnostics,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_design: MonotoneDesign,
    pub best_value: f64,
    pub best_run: usize,
    pub runs: Vec<RunSummary>,
    pub critical_family_hits: Vec<CriticalHit>,
    /// No start improved on its initial design.
    pub no_improvement: bool,
}

impl SearchResult {
    pub fn boundary_diagnostics(&self) -> &BoundaryDiagnostics {
        &self.runs[self.best_run].boundary
    }
}

pub fn proportionality_deviation(design: &MonotoneDesign) -> f64 {
    let ratios: Vec<f64> = design.d().iter().zip(design.delta()).map(|(d, e)| d / e).collect();
    match ratios.first() {
        None => 0.0,
        Some(&r0) => ratios.iter().fold(0.0f64, |m, r| m.max((r - r0).abs() / r0)),
    }
}

/// Search problem in the flat coordinates `[d_1..d_m, δ_1..δ_m]`.
struct Problem<'a> {
    cfg: &'a SearchConfig,
    params: &'a CovarianceParams,
    m: usize,
    lower_d: f64,
    lower_delta: f64,
}

impl<'a> Problem<'a> {
    fn new(cfg: &'a SearchConfig, params: &'a CovarianceParams) -> Result<Self> {
        let m = cfg.n - 1;
        let lower_d = cfg.floor / params.alpha();
        let lower_delta = cfg.floor / params.beta();
        if lower_d * m as f64 >= cfg.region.t_span() || lower_delta * m as f64 >= cfg.region.s_span() {
            return Err(Error::Domain("increment floor leaves no feasible design".into()));
        }
        Ok(Self {
            cfg,
            params,
            m,
            lower_d,
            lower_delta,
        })
    }

    fn project(&self, x: &mut [f64]) {
        let (d, e) = x.split_at_mut(self.m);
        simplex::project_capped(d, self.lower_d, self.cfg.region.t_span());
        simplex::project_capped(e, self.lower_delta, self.cfg.region.s_span());
    }

    fn design(&self, x: &[f64]) -> Result<MonotoneDesign> {
        MonotoneDesign::from_increments(
            Point::new(self.cfg.region.a1, self.cfg.region.a2),
            x[..self.m].to_vec(),
            x[self.m..].to_vec(),
        )
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.design(x)
            .and_then(|d| self.cfg.objective.evaluate(&d, self.params))
            .unwrap_or(f64::NEG_INFINITY)
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.m);
        for cap in [self.cfg.region.t_span(), self.cfg.region.s_span()] {
            let w: Vec<f64> = (0..self.m).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            let fill = rng.random_range(0.3..1.0) * cap;
            x.extend(w.iter().map(|v| v / total * fill));
        }
        self.project(&mut x);
        x
    }

    fn boundary(&self, x: &[f64]) -> BoundaryDiagnostics {
        let tol = self.cfg.boundary_tolerance;
        let (a, b) = (self.params.alpha(), self.params.beta());
        let (d, e) = x.split_at(self.m);
        let at_floor = d
            .iter()
            .map(|v| a * (v - self.lower_d) <= tol)
            .chain(e.iter().map(|v| b * (v - self.lower_delta) <= tol))
            .collect();
        BoundaryDiagnostics {
            at_floor,
            t_sum_at_span: a * (self.cfg.region.t_span() - d.iter().sum::<f64>()) <= tol,
            s_sum_at_span: b * (self.cfg.region.s_span() - e.iter().sum::<f64>()) <= tol,
        }
    }

    fn critical_hit(&self, run: usize, kind: PointKind, x: &[f64]) -> Option<CriticalHit> {
        if self.cfg.objective == Objective::Trend || self.boundary(x).any() {
            return None;
        }
        let design = self.design(x).ok()?;
        let grad = self.cfg.objective.gradient(&design, self.params).ok()?;
        let gradient_norm = grad.norm();
        if gradient_norm > self.cfg.stationarity_tolerance {
            return None;
        }
        Some(CriticalHit {
            run,
            kind,
            value: self.cfg.objective.evaluate(&design, self.params).ok()?,
            gradient_norm,
            proportionality_deviation: proportionality_deviation(&design),
        })
    }
}

const MAX_RESTARTS: usize = 25;

/// Multistart projected simplex search maximizing the configured objective.
///
/// Each start owns a random stream derived from `(seed, start index)`.
/// After the simplex converges it is rebuilt around the best point until a
/// restart no longer improves the value.
pub fn search(config: &SearchConfig, params: &CovarianceParams) -> Result<SearchResult> {
    config.validate()?;
    let problem = Problem::new(config, params)?;
    let opts = NelderMeadOptions {
        max_iterations: config.max_iterations,
        f_tolerance: config.tolerance,
        x_tolerance: 1e-10 * (config.region.t_span() + config.region.s_span()),
    };

    let total_starts = config.starts.max(usize::from(config.initial.is_some()));
    let mut runs = Vec::with_capacity(total_starts);
    let mut hits = Vec::new();
    let mut best: Option<(Vec<f64>, f64, usize)> = None;

    for run in 0..total_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(run as u64);
        let mut x = match (&config.initial, run) {
            (Some(init), 0) => {
                let mut x = init.d().to_vec();
                x.extend_from_slice(init.delta());
                problem.project(&mut x);
                x
            }
            _ => problem.random_start(&mut rng),
        };
        let start_value = problem.value(&x);
        hits.extend(problem.critical_hit(run, PointKind::Start, &x));

        let mut value = start_value;
        let mut iterations = 0;
        let mut evaluations = 0;
        let mut restarts = 0;
        let mut converged;
        loop {
            let steps: Vec<f64> = x.iter().map(|v| 0.1 * v.abs().max(1e-3)).collect();
            let res = simplex::minimize(|y| -problem.value(y), |y| problem.project(y), &x, &steps, &opts);
            iterations += res.iterations;
            evaluations += res.evaluations;
            converged = res.converged;
            let new_value = -res.value;
            let gain = new_value - value;
            if new_value >= value {
                x = res.x;
                value = new_value;
            }
            if gain <= config.tolerance * (1.0 + value.abs()) || restarts >= MAX_RESTARTS {
                break;
            }
            restarts += 1;
        }

        hits.extend(problem.critical_hit(run, PointKind::Terminal, &x));
        let improved = value > start_value + config.tolerance * (1.0 + start_value.abs());
        runs.push(RunSummary {
            run,
            start_value,
            final_value: value,
            iterations,
            evaluations,
            restarts,
            converged,
            improved,
            boundary: problem.boundary(&x),
        });
        if best.as_ref().is_none_or(|(_, v, _)| value > *v) {
            best = Some((x, value, run));
        }
    }

    let (x, best_value, best_run) = best.expect("at least one start");
    Ok(SearchResult {
        best_design: problem.design(&x)?,
        best_value,
        best_run,
        no_improvement: runs.iter().all(|r| !r.improved),
        runs,
        critical_family_hits: hits,
    })
}
