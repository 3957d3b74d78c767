//! Closed-form Fisher information for monotone designs.
//!
//! Everything is on the correlation scale (`σ` factored out). With
//! `x_i = α·d_i + β·δ_i` and `q_i = exp(−x_i)` the trend information is
//! `1 + Σ tanh(x_i / 2)` and the covariance-parameter information is built
//! from the per-increment weight `w(x) = q²(1+q²)/(1−q²)²`:
//!
//! ```text
//!   M_α  = Σ d_i²    w(x_i)
//!   M_β  = Σ δ_i²    w(x_i)
//!   M_αβ = Σ d_i δ_i w(x_i)
//!   Φ    = M_α M_β − M_αβ² = Σ_{i>j} (d_i δ_j − d_j δ_i)² w(x_i) w(x_j)
//!   Ψ    = M_θ Φ
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{skewed_length, CovarianceParams, MonotoneDesign, DEFAULT_INCREMENT_FLOOR};

/// Below this skewed increment the weight and its derivative switch to
/// their Laurent expansions around zero.
pub const SERIES_THRESHOLD: f64 = 1e-8;

/// `w(x) = q²(1+q²)/(1−q²)²` with `q = e^{−x}`.
pub fn weight(x: f64) -> f64 {
    if x < SERIES_THRESHOLD {
        let inv = 1.0 / x;
        0.5 * inv * inv - 0.5 * inv + 1.0 / 3.0 - x / 6.0 + x * x / 30.0
    } else {
        let u = (-2.0 * x).exp();
        let om = -(-2.0 * x).exp_m1();
        u * (1.0 + u) / (om * om)
    }
}

/// `dw/dx = −2q²(1+3q²)/(1−q²)³`.
pub fn weight_derivative(x: f64) -> f64 {
    if x < SERIES_THRESHOLD {
        let inv = 1.0 / x;
        -inv * inv * inv + 0.5 * inv * inv - 1.0 / 6.0 + x / 15.0
    } else {
        let u = (-2.0 * x).exp();
        let om = -(-2.0 * x).exp_m1();
        -2.0 * u * (1.0 + 3.0 * u) / (om * om * om)
    }
}

/// 2×2 information matrix on `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherMatrix {
    pub m_alpha: f64,
    pub m_beta: f64,
    pub m_alpha_beta: f64,
    pub phi: f64,
}

impl FisherMatrix {
    /// Builds the matrix from its entries, taking the determinant directly.
    pub fn from_entries(m_alpha: f64, m_beta: f64, m_alpha_beta: f64) -> Self {
        Self {
            m_alpha,
            m_beta,
            m_alpha_beta,
            phi: m_alpha * m_beta - m_alpha_beta * m_alpha_beta,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.m_alpha * self.m_beta - self.m_alpha_beta * self.m_alpha_beta
    }

    /// Inverse, or `None` when the matrix is singular.
    pub fn inverse(&self) -> Option<[[f64; 2]; 2]> {
        let det = self.phi;
        if !(det > 0.0) {
            return None;
        }
        Some([
            [self.m_beta / det, -self.m_alpha_beta / det],
            [-self.m_alpha_beta / det, self.m_alpha / det],
        ])
    }
}

/// Evaluation bundle for a monotone design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub n: usize,
    pub lambda: f64,
    pub m_theta: f64,
    pub fisher: FisherMatrix,
    pub psi: f64,
    pub efficiency: Option<f64>,
}

/// `1 + Σ tanh((α·d_i + β·δ_i)/2)`, i.e. `1ᵀC⁻¹1`.
pub fn trend_information(design: &MonotoneDesign, params: &CovarianceParams) -> f64 {
    1.0 + design
        .skewed_increments(params)
        .into_iter()
        .map(|x| (0.5 * x).tanh())
        .sum::<f64>()
}

/// The same quantity written as `2/(1+q_1) + Σ_{i≥2} (1−q_i)/(1+q_i)`.
pub fn trend_information_rewritten(design: &MonotoneDesign, params: &CovarianceParams) -> f64 {
    let q: Vec<f64> = crate::model::q_values(design, params);
    match q.split_first() {
        None => 1.0,
        Some((q1, rest)) => 2.0 / (1.0 + q1) + rest.iter().map(|q| (1.0 - q) / (1.0 + q)).sum::<f64>(),
    }
}

fn check_equidistant_args(n: usize, lambda: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("need lambda > 0, got {lambda}")));
    }
    Ok(())
}

/// Trend information of the equidistant design with `n` points and skewed
/// length `λ`: `1 + (n−1)·tanh(λ / (2(n−1)))`.
pub fn trend_information_equidistant(n: usize, lambda: f64) -> Result<f64> {
    check_equidistant_args(n, lambda)?;
    let m = (n - 1) as f64;
    Ok(1.0 + m * (lambda / (2.0 * m)).tanh())
}

/// Limits of the equidistant trend information: `(λ/2 + 1, n)` for
/// `n → ∞` and `λ → ∞` respectively.
pub fn trend_information_bounds(n: usize, lambda: f64) -> Result<(f64, f64)> {
    check_equidistant_args(n, lambda)?;
    Ok((0.5 * lambda + 1.0, n as f64))
}

/// Per-increment weights, rejecting skewed increments below `floor`.
fn weights(design: &MonotoneDesign, params: &CovarianceParams, floor: f64) -> Result<Vec<f64>> {
    design.check_floor(params, floor)?;
    Ok(design.skewed_increments(params).into_iter().map(weight).collect())
}

fn sums(design: &MonotoneDesign, w: &[f64]) -> (f64, f64, f64) {
    let mut ma = 0.0;
    let mut mb = 0.0;
    let mut mab = 0.0;
    for ((&d, &e), &wi) in design.d().iter().zip(design.delta()).zip(w) {
        ma += d * d * wi;
        mb += e * e * wi;
        mab += d * e * wi;
    }
    (ma, mb, mab)
}

/// Nonnegative double-sum form of `M_α M_β − M_αβ²`.
fn phi_double_sum(d: &[f64], delta: &[f64], w: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 1..d.len() {
        let mut row = 0.0;
        for j in 0..i {
            let c = d[i] * delta[j] - d[j] * delta[i];
            row += c * c * w[j];
        }
        total += row * w[i];
    }
    total
}

pub fn covariance_information(design: &MonotoneDesign, params: &CovarianceParams) -> Result<FisherMatrix> {
    covariance_information_with_floor(design, params, DEFAULT_INCREMENT_FLOOR)
}

/// Fisher information on `(α, β)`; `phi` is taken from the double sum so
/// it is nonnegative by construction.
pub fn covariance_information_with_floor(
    design: &MonotoneDesign,
    params: &CovarianceParams,
    floor: f64,
) -> Result<FisherMatrix> {
    let w = weights(design, params, floor)?;
    let (m_alpha, m_beta, m_alpha_beta) = sums(design, &w);
    Ok(FisherMatrix {
        m_alpha,
        m_beta,
        m_alpha_beta,
        phi: phi_double_sum(design.d(), design.delta(), &w),
    })
}

/// Determinant of the covariance-parameter information.
pub fn phi(design: &MonotoneDesign, params: &CovarianceParams) -> Result<f64> {
    let w = weights(design, params, DEFAULT_INCREMENT_FLOOR)?;
    Ok(phi_double_sum(design.d(), design.delta(), &w))
}

/// Total information determinant `M_θ · Φ`.
pub fn psi(design: &MonotoneDesign, params: &CovarianceParams) -> Result<f64> {
    Ok(trend_information(design, params) * phi(design, params)?)
}

/// Gradient with respect to the increments, split by axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementGradient {
    pub d: Vec<f64>,
    pub delta: Vec<f64>,
}

impl IncrementGradient {
    fn zeros(m: usize) -> Self {
        Self {
            d: vec![0.0; m],
            delta: vec![0.0; m],
        }
    }

    pub fn norm(&self) -> f64 {
        self.d.iter().chain(&self.delta).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.d.iter().chain(&self.delta).fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Analytic gradient of `Φ`.
///
/// For each increment the sums run over all other increments; the
/// increment's own term cancels in both brackets, so full sums are used.
pub fn phi_gradient(design: &MonotoneDesign, params: &CovarianceParams) -> Result<IncrementGradient> {
    let m = design.d().len();
    if m < 2 {
        return Ok(IncrementGradient::zeros(m));
    }
    let xs = design.skewed_increments(params);
    let w = weights(design, params, DEFAULT_INCREMENT_FLOOR)?;
    let (ma, mb, mab) = sums(design, &w);
    let mut grad = IncrementGradient::zeros(m);
    for i in 0..m {
        let (d, e) = (design.d()[i], design.delta()[i]);
        let dw = weight_derivative(xs[i]);
        let quad = d * d * mb + e * e * ma - 2.0 * d * e * mab;
        grad.d[i] = 2.0 * w[i] * (d * mb - e * mab) + params.alpha() * dw * quad;
        grad.delta[i] = 2.0 * w[i] * (e * ma - d * mab) + params.beta() * dw * quad;
    }
    Ok(grad)
}

/// Gradient of `Ψ = M_θ Φ` by the product rule, using
/// `∂M_θ/∂d_i = 2αq_i/(1+q_i)²`.
pub fn psi_gradient(design: &MonotoneDesign, params: &CovarianceParams) -> Result<IncrementGradient> {
    let mut grad = phi_gradient(design, params)?;
    let m_theta = trend_information(design, params);
    let phi = phi(design, params)?;
    for (i, q) in crate::model::q_values(design, params).into_iter().enumerate() {
        let slope = 2.0 * q / ((1.0 + q) * (1.0 + q));
        grad.d[i] = m_theta * grad.d[i] + params.alpha() * slope * phi;
        grad.delta[i] = m_theta * grad.delta[i] + params.beta() * slope * phi;
    }
    Ok(grad)
}

/// Single-increment contribution `F(d, δ) = d² w(αd + βδ)` to `M_α`.
/// Returns 0 when `d = 0`.
pub fn f_term(d: f64, delta: f64, params: &CovarianceParams) -> Result<f64> {
    if !(d >= 0.0 && delta >= 0.0) {
        return Err(Error::Domain(format!("need d, delta >= 0, got ({d}, {delta})")));
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    Ok(d * d * weight(params.skewed(d, delta)))
}

/// Unit-sum geometric ratio vector `(k, k r, …, k r^{m−1})`.
pub(crate) fn geometric_ratios(m: usize, r: f64) -> Result<Vec<f64>> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("ratio must lie in (0, 1], got {r}")));
    }
    if m == 0 {
        return Err(Error::Domain("need n >= 2".into()));
    }
    let k = if r == 1.0 {
        1.0 / m as f64
    } else {
        let lr = r.ln();
        lr.exp_m1() / (m as f64 * lr).exp_m1()
    };
    let mut out = Vec::with_capacity(m);
    let mut c = k;
    for _ in 0..m {
        out.push(c);
        c *= r;
    }
    Ok(out)
}

/// `M_θ` of the geometric progression design.
pub fn trend_information_geometric(
    n: usize,
    r1: f64,
    r2: f64,
    params: &CovarianceParams,
    spans: (f64, f64),
) -> Result<f64> {
    let design = crate::design::geometric_progression_design(&crate::design::GeometricDesignSpec { n, r1, r2, spans })?;
    Ok(trend_information(&design, params))
}

/// `Φ` of the geometric progression design. The spans are factored out of
/// the cross terms so the value is exactly zero when `r1 == r2`.
pub fn phi_geometric(n: usize, r1: f64, r2: f64, params: &CovarianceParams, spans: (f64, f64)) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    let (t_span, s_span) = spans;
    let cd = geometric_ratios(n - 1, r1)?;
    let ce = geometric_ratios(n - 1, r2)?;
    let mut w = Vec::with_capacity(n - 1);
    for (i, (&a, &b)) in cd.iter().zip(&ce).enumerate() {
        let x = params.skewed(t_span * a, s_span * b);
        if !(x >= DEFAULT_INCREMENT_FLOOR) {
            return Err(Error::DegenerateDesign {
                index: i + 1,
                skewed: x,
                floor: DEFAULT_INCREMENT_FLOOR,
            });
        }
        w.push(weight(x));
    }
    let scale = t_span * s_span;
    Ok(scale * scale * phi_double_sum(&cd, &ce, &w))
}

/// Full evaluation of a monotone design. Designs with fewer than two
/// points carry a zero covariance information.
pub fn evaluate(design: &MonotoneDesign, params: &CovarianceParams, reference: Option<f64>) -> Result<DesignReport> {
    let m_theta = trend_information(design, params);
    let fisher = covariance_information(design, params)?;
    let efficiency = match reference {
        Some(r) => Some(crate::design::efficiency(m_theta, r)?),
        None => None,
    };
    Ok(DesignReport {
        n: design.len(),
        lambda: skewed_length(design, params),
        m_theta,
        psi: m_theta * fisher.phi,
        fisher,
        efficiency,
    })
}
