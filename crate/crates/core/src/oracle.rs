//! Dense-matrix verification path.
//!
//! Nothing in here uses the closed forms of [`crate::fisher`]: covariance
//! matrices are assembled entry by entry from the kernel, factored by a
//! plain Cholesky decomposition, and the Fisher information is taken from
//! its trace definition.

use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::model::{
    correlation, q_values, CovarianceParams, GridDesign, MonotoneDesign, Point, DEFAULT_INCREMENT_FLOOR,
};

/// Largest matrix order the dense routines accept.
pub const DEFAULT_SIZE_CAP: usize = 4096;

/// Symmetric matrix with full row-major storage; `set` writes both halves.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds the matrix from the lower triangle produced by `f(i, j)`, `j <= i`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Plain (not necessarily symmetric) product, row-major.
    pub fn matmul(&self, other: &DenseSymMatrix) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let row = other.row(k);
                let o = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    o[j] += a * row[j];
                }
            }
        }
        out
    }

    /// Entrywise map preserving symmetry.
    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::from_fn(self.n, |i, j| f(i, j, self.get(i, j)))
    }
}

/// `max |A·B − I|` over all entries.
pub fn identity_residual(a: &DenseSymMatrix, b: &DenseSymMatrix) -> f64 {
    let n = a.order();
    let prod = a.matmul(b);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[i * n + j] - target).abs());
        }
    }
    worst
}

/// Lower Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    l: Vec<f64>,
}

impl SpdFactor {
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l(i, i).ln()).sum::<f64>()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.l(i, i);
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let xi = x[i] / self.l(i, i);
            x[i] = xi;
            for k in 0..i {
                x[k] -= self.l(i, k) * xi;
            }
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        Ok(self.backward(&self.forward(b)))
    }

    /// `L z`; used to colour standard normal draws.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| self.l[i * n..=i * n + i].iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Full inverse `A⁻¹`.
    pub fn inverse(&self) -> DenseSymMatrix {
        let n = self.n;
        let mut inv = DenseSymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.backward(&self.forward(&e));
            for i in j..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

/// Cholesky factorization without pivoting or regularization.
pub fn spd_factor(a: &DenseSymMatrix) -> Result<SpdFactor> {
    let n = a.order();
    if n > DEFAULT_SIZE_CAP {
        return Err(Error::SizeCap {
            order: n,
            cap: DEFAULT_SIZE_CAP,
        });
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(SpdFactor { n, l })
}

pub fn spd_solve(a: &DenseSymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    spd_factor(a)?.solve(b)
}

/// Correlation matrix of arbitrary points.
pub fn correlation_matrix(points: &[Point], params: &CovarianceParams) -> DenseSymMatrix {
    DenseSymMatrix::from_fn(points.len(), |i, j| {
        if i == j {
            1.0
        } else {
            correlation(points[i], points[j], params)
        }
    })
}

/// Correlation matrix of a monotone design built from running products of
/// `q_k`: entry `(i, j) = q_i ⋯ q_{j−1}`.
pub fn build_covariance_monotone(design: &MonotoneDesign, params: &CovarianceParams) -> DenseSymMatrix {
    let q = q_values(design, params);
    let n = design.len();
    let mut c = DenseSymMatrix::identity(n);
    for i in 0..n {
        let mut prod = 1.0;
        for j in i + 1..n {
            prod *= q[j - 1];
            c.set(i, j, prod);
        }
    }
    c
}

/// Tridiagonal inverse of the monotone correlation matrix.
pub fn closed_form_inverse(design: &MonotoneDesign, params: &CovarianceParams) -> Result<DenseSymMatrix> {
    let n = design.len();
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    design.check_floor(params, DEFAULT_INCREMENT_FLOOR)?;
    let q = q_values(design, params);
    // 1 − q² without cancellation
    let one_minus: Vec<f64> = design
        .skewed_increments(params)
        .into_iter()
        .map(|x| -(-2.0 * x).exp_m1())
        .collect();
    let mut inv = DenseSymMatrix::zeros(n);
    inv.set(0, 0, 1.0 / one_minus[0]);
    inv.set(n - 1, n - 1, 1.0 / one_minus[n - 2]);
    for k in 1..n - 1 {
        inv.set(
            k,
            k,
            tridiagonal_diagonal(q[k], q[k - 1], one_minus[k], one_minus[k - 1]),
        );
    }
    for k in 0..n - 1 {
        inv.set(k, k + 1, -q[k] / one_minus[k]);
    }
    Ok(inv)
}

/// Interior diagonal entry `V = 1/(1−q_k²) + q_{k−1}²/(1−q_{k−1}²)`.
fn tridiagonal_diagonal(_qk: f64, qkm1: f64, om_k: f64, om_km1: f64) -> f64 {
    1.0 / om_k + qkm1 * qkm1 / om_km1
}

/// The same diagonal entry in product form
/// `(1 − q_k² q_{k−1}²)/((q_k² − 1)(q_{k−1}² − 1))`.
pub fn tridiagonal_diagonal_product_form(qk: f64, qkm1: f64) -> f64 {
    let (a, b) = (qk * qk, qkm1 * qkm1);
    (1.0 - a * b) / ((a - 1.0) * (b - 1.0))
}

/// `Σ log(1 − q_i²)`, the log-determinant of a monotone correlation matrix.
pub fn monotone_log_det(design: &MonotoneDesign, params: &CovarianceParams) -> f64 {
    design
        .skewed_increments(params)
        .into_iter()
        .map(|x| (-(-2.0 * x).exp_m1()).ln())
        .sum()
}

fn check_cap(n: usize) -> Result<()> {
    if n > DEFAULT_SIZE_CAP {
        return Err(Error::SizeCap {
            order: n,
            cap: DEFAULT_SIZE_CAP,
        });
    }
    Ok(())
}

/// `1ᵀC⁻¹1` on the correlation scale for any distinct points.
pub fn trend_information_oracle(points: &[Point], params: &CovarianceParams) -> Result<f64> {
    check_cap(points.len())?;
    let c = correlation_matrix(points, params);
    let ones = vec![1.0; points.len()];
    Ok(spd_solve(&c, &ones)?.iter().sum())
}

/// `½ tr(C⁻¹ A C⁻¹ B)` for symmetric `A`, `B`, given `C⁻¹`.
fn half_trace(cinv: &DenseSymMatrix, a: &DenseSymMatrix, b: &DenseSymMatrix) -> f64 {
    let n = cinv.order();
    let pa = cinv.matmul(a);
    let pb = cinv.matmul(b);
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr += pa[i * n + j] * pb[j * n + i];
        }
    }
    0.5 * tr
}

fn trace_information(c: &DenseSymMatrix, dc_alpha: &DenseSymMatrix, dc_beta: &DenseSymMatrix) -> Result<FisherMatrix> {
    let cinv = spd_factor(c)?.inverse();
    let ma = half_trace(&cinv, dc_alpha, dc_alpha);
    let mb = half_trace(&cinv, dc_beta, dc_beta);
    let mab = half_trace(&cinv, dc_alpha, dc_beta);
    Ok(FisherMatrix::from_entries(ma, mb, mab))
}

/// Fisher information on `(α, β)` from the trace definition, with
/// `∂C/∂α = −|Δt|·C` and `∂C/∂β = −|Δs|·C`.
pub fn covariance_information_oracle(points: &[Point], params: &CovarianceParams) -> Result<FisherMatrix> {
    check_cap(points.len())?;
    let c = correlation_matrix(points, params);
    let dca = c.map(|i, j, v| -(points[i].t - points[j].t).abs() * v);
    let dcb = c.map(|i, j, v| -(points[i].s - points[j].s).abs() * v);
    trace_information(&c, &dca, &dcb)
}

/// As [`covariance_information_oracle`] but with `∂C` taken by central
/// differences of the correlation matrix in `α` and `β`.
pub fn covariance_information_oracle_fd(points: &[Point], params: &CovarianceParams, h: f64) -> Result<FisherMatrix> {
    check_cap(points.len())?;
    let (a, b) = (params.alpha(), params.beta());
    let shifted = |da: f64, db: f64| -> Result<DenseSymMatrix> {
        Ok(correlation_matrix(points, &CovarianceParams::new(a + da, b + db, 1.0)?))
    };
    let (ap, am) = (shifted(h, 0.0)?, shifted(-h, 0.0)?);
    let (bp, bm) = (shifted(0.0, h)?, shifted(0.0, -h)?);
    let dca = ap.map(|i, j, v| (v - am.get(i, j)) / (2.0 * h));
    let dcb = bp.map(|i, j, v| (v - bm.get(i, j)) / (2.0 * h));
    trace_information(&correlation_matrix(points, params), &dca, &dcb)
}

/// `1ᵀC⁻¹1` of a one-dimensional exponential correlation at `rate`.
fn axis_trend_information(coords: &[f64], rate: f64) -> Result<f64> {
    let n = coords.len();
    check_cap(n)?;
    let c = DenseSymMatrix::from_fn(n, |i, j| (-(rate * (coords[i] - coords[j]).abs())).exp());
    Ok(spd_solve(&c, &vec![1.0; n])?.iter().sum())
}

/// Trend information of a full grid. The grid correlation is `C_t ⊗ C_s`,
/// so `1ᵀC⁻¹1` is the product of the two axis quantities.
pub fn grid_trend_information(grid: &GridDesign, params: &CovarianceParams) -> Result<f64> {
    Ok(axis_trend_information(grid.t_coords(), params.alpha())?
        * axis_trend_information(grid.s_coords(), params.beta())?)
}
