//! Field parameters, design regions and point sets for the shifted
//! Ornstein–Uhlenbeck sheet `Y(s, t) = θ + ε(s, t)` with covariance
//! `σ² exp(−α|Δt| − β|Δs|)`.
//!
//! Throughout the crate `d` denotes increments along the time axis `t`
//! (scaled by `α`) and `delta` increments along the space axis `s` (scaled
//! by `β`). A point is stored as `(s, t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};

/// Smallest admissible skewed increment `α·d + β·δ` in the covariance
/// information path.
pub const DEFAULT_INCREMENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub s: f64,
    pub t: f64,
}

impl Point {
    pub fn new(s: f64, t: f64) -> Self {
        Self { s, t }
    }
}

impl From<(f64, f64)> for Point {
    fn from((s, t): (f64, f64)) -> Self {
        Self { s, t }
    }
}

impl From<[f64; 2]> for Point {
    fn from([s, t]: [f64; 2]) -> Self {
        Self { s, t }
    }
}

/// Covariance parameters of the sheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceParams {
    alpha: f64,
    beta: f64,
    sigma: f64,
}

impl CovarianceParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("sigma", sigma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(Self { alpha, beta, sigma })
    }

    /// Unit-scale parameters (`σ = 1`).
    pub fn correlation(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 1.0)
    }

    /// Builds parameters from the Brownian-sheet scale `σ̃ = 2σ√(αβ)`.
    pub fn from_sigma_tilde(alpha: f64, beta: f64, sigma_tilde: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParams("alpha and beta must be > 0".into()));
        }
        Self::new(alpha, beta, sigma_tilde / (2.0 * (alpha * beta).sqrt()))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_tilde(&self) -> f64 {
        2.0 * self.sigma * (self.alpha * self.beta).sqrt()
    }

    /// Same correlation structure with the axes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            alpha: self.beta,
            beta: self.alpha,
            sigma: self.sigma,
        }
    }

    /// `α·d + β·δ`.
    #[inline]
    pub fn skewed(&self, d: f64, delta: f64) -> f64 {
        self.alpha * d + self.beta * delta
    }
}

/// Rectangular design space `[a1, b1] × [a2, b2]`; the first interval is the
/// `s` axis, the second the `t` axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Region {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Self> {
        if ![a1, b1, a2, b2].iter().all(|v| v.is_finite()) || b1 <= a1 || b2 <= a2 {
            return Err(Error::Domain(format!(
                "region needs b1 > a1 and b2 > a2, got [{a1}, {b1}] x [{a2}, {b2}]"
            )));
        }
        Ok(Self { a1, b1, a2, b2 })
    }

    /// Region with the given spans anchored at the origin.
    pub fn from_spans(t_span: f64, s_span: f64) -> Result<Self> {
        Self::new(0.0, s_span, 0.0, t_span)
    }

    pub fn s_span(&self) -> f64 {
        self.b1 - self.a1
    }

    pub fn t_span(&self) -> f64 {
        self.b2 - self.a2
    }

    /// Region shrunk by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> Result<Self> {
        Self::new(self.a1 + margin, self.b1 - margin, self.a2 + margin, self.b2 - margin)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConditionDOptions {
    pub allow_nonpositive_origin: bool,
}

/// A point set satisfying condition D: both coordinates strictly increasing.
///
/// Stores the points and the increment representation side by side so
/// that neither has to be reconstructed by floating-point summation.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneDesign {
    points: Vec<Point>,
    d: Vec<f64>,
    delta: Vec<f64>,
}

impl MonotoneDesign {
    /// Builds a design from an origin and its `t`- and `s`-increments.
    pub fn from_increments(origin: Point, d: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if d.len() != delta.len() {
            return Err(Error::DimensionMismatch {
                expected: d.len(),
                got: delta.len(),
            });
        }
        if !(origin.s.is_finite() && origin.t.is_finite()) {
            return Err(Error::InvalidDesign("origin must be finite".into()));
        }
        for (i, (&di, &ei)) in d.iter().zip(&delta).enumerate() {
            if !(di.is_finite() && di > 0.0) {
                return Err(Error::ConditionDViolation {
                    index: i + 1,
                    axis: Axis::T,
                });
            }
            if !(ei.is_finite() && ei > 0.0) {
                return Err(Error::ConditionDViolation {
                    index: i + 1,
                    axis: Axis::S,
                });
            }
        }
        let mut points = Vec::with_capacity(d.len() + 1);
        points.push(origin);
        let (mut s, mut t) = (origin.s, origin.t);
        for (&di, &ei) in d.iter().zip(&delta) {
            s += ei;
            t += di;
            points.push(Point { s, t });
        }
        Ok(Self { points, d, delta })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn origin(&self) -> Point {
        self.points[0]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Increments along `t` (paired with `α`).
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Increments along `s` (paired with `β`).
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn t_extent(&self) -> f64 {
        self.d.iter().sum()
    }

    pub fn s_extent(&self) -> f64 {
        self.delta.iter().sum()
    }

    /// Appends further increments at the end of the design.
    pub fn extend(&self, d: &[f64], delta: &[f64]) -> Result<Self> {
        let mut dd = self.d.clone();
        dd.extend_from_slice(d);
        let mut ee = self.delta.clone();
        ee.extend_from_slice(delta);
        let mut out = Self::from_increments(self.origin(), dd, ee)?;
        // keep the original points bit-for-bit
        out.points[..self.points.len()].copy_from_slice(&self.points);
        Ok(out)
    }

    /// Design with the roles of the two axes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            points: self.points.iter().map(|p| Point { s: p.t, t: p.s }).collect(),
            d: self.delta.clone(),
            delta: self.d.clone(),
        }
    }

    /// Skewed increments `α·d_i + β·δ_i`.
    pub fn skewed_increments(&self, params: &CovarianceParams) -> Vec<f64> {
        self.d
            .iter()
            .zip(&self.delta)
            .map(|(&d, &e)| params.skewed(d, e))
            .collect()
    }

    /// Index and value of the first skewed increment below `floor`.
    pub fn check_floor(&self, params: &CovarianceParams, floor: f64) -> Result<()> {
        for (i, x) in self.skewed_increments(params).into_iter().enumerate() {
            if !(x >= floor) {
                return Err(Error::DegenerateDesign {
                    index: i + 1,
                    skewed: x,
                    floor,
                });
            }
        }
        Ok(())
    }
}

/// Validates condition D and returns the increment representation.
pub fn validate_condition_d(points: &[Point]) -> Result<MonotoneDesign> {
    validate_condition_d_with(points, ConditionDOptions::default())
}

pub fn validate_condition_d_with(points: &[Point], opts: ConditionDOptions) -> Result<MonotoneDesign> {
    if points.is_empty() {
        return Err(Error::InvalidDesign("empty point set".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.s.is_finite() && p.t.is_finite()) {
            return Err(Error::InvalidDesign(format!("non-finite coordinate at index {i}")));
        }
    }
    let first = points[0];
    if !opts.allow_nonpositive_origin && (first.s <= 0.0 || first.t <= 0.0) {
        return Err(Error::NonpositiveCoordinate { index: 0 });
    }
    let mut d = Vec::with_capacity(points.len() - 1);
    let mut delta = Vec::with_capacity(points.len() - 1);
    for (i, w) in points.windows(2).enumerate() {
        if w[1].s <= w[0].s {
            return Err(Error::ConditionDViolation {
                index: i + 1,
                axis: Axis::S,
            });
        }
        if w[1].t <= w[0].t {
            return Err(Error::ConditionDViolation {
                index: i + 1,
                axis: Axis::T,
            });
        }
        d.push(w[1].t - w[0].t);
        delta.push(w[1].s - w[0].s);
    }
    Ok(MonotoneDesign {
        points: points.to_vec(),
        d,
        delta,
    })
}

/// `q_i = exp(−α·d_i − β·δ_i)`.
pub fn q_values(design: &MonotoneDesign, params: &CovarianceParams) -> Vec<f64> {
    design
        .skewed_increments(params)
        .into_iter()
        .map(|x| (-x).exp())
        .collect()
}

/// Skewed length `λ = α·Σd_i + β·Σδ_i`.
pub fn skewed_length(design: &MonotoneDesign, params: &CovarianceParams) -> f64 {
    params.alpha() * design.t_extent() + params.beta() * design.s_extent()
}

/// Correlation `exp(−α|Δt| − β|Δs|)` between two points.
#[inline]
pub fn correlation(p1: Point, p2: Point, params: &CovarianceParams) -> f64 {
    (-(params.alpha() * (p1.t - p2.t).abs() + params.beta() * (p1.s - p2.s).abs())).exp()
}

pub fn covariance_kernel(p1: Point, p2: Point, params: &CovarianceParams) -> f64 {
    params.sigma().powi(2) * correlation(p1, p2, params)
}

/// Variogram `2γ(d, δ) = σ̃²/(2αβ) · (1 − exp(−αd − βδ))`.
pub fn semivariogram(d: f64, delta: f64, params: &CovarianceParams) -> Result<f64> {
    if !(d >= 0.0 && delta >= 0.0) {
        return Err(Error::Domain(format!("lags must be >= 0, got ({d}, {delta})")));
    }
    let sill = params.sigma_tilde().powi(2) / (2.0 * params.alpha() * params.beta());
    Ok(-sill * (-params.skewed(d, delta)).exp_m1())
}

/// A full tensor grid `t_coords × s_coords`. Points are enumerated with `t`
/// as the outer index, so the correlation matrix is `C_t ⊗ C_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDesign {
    t_coords: Vec<f64>,
    s_coords: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

impl GridDesign {
    pub fn new(t_coords: Vec<f64>, s_coords: Vec<f64>) -> Result<Self> {
        if t_coords.is_empty() || s_coords.is_empty() {
            return Err(Error::InvalidDesign("grid axes must be nonempty".into()));
        }
        if !strictly_increasing(&t_coords) || !strictly_increasing(&s_coords) {
            return Err(Error::InvalidDesign(
                "grid coordinates must be strictly increasing".into(),
            ));
        }
        Ok(Self { t_coords, s_coords })
    }

    /// Recovers the grid axes from a point list that must be a full product.
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let mut ts: Vec<f64> = points.iter().map(|p| p.t).collect();
        let mut ss: Vec<f64> = points.iter().map(|p| p.s).collect();
        for v in [&mut ts, &mut ss] {
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
        }
        if ts.len() * ss.len() != points.len() {
            return Err(Error::InvalidDesign(format!(
                "{} points do not form a {}x{} grid",
                points.len(),
                ts.len(),
                ss.len()
            )));
        }
        let grid = Self::new(ts, ss)?;
        let mut seen = vec![false; points.len()];
        for p in points {
            let it = grid.t_coords.partition_point(|&x| x < p.t);
            let is = grid.s_coords.partition_point(|&x| x < p.s);
            let k = it * grid.s_coords.len() + is;
            if seen[k] {
                return Err(Error::InvalidDesign("duplicate grid point".into()));
            }
            seen[k] = true;
        }
        Ok(grid)
    }

    pub fn t_coords(&self) -> &[f64] {
        &self.t_coords
    }

    pub fn s_coords(&self) -> &[f64] {
        &self.s_coords
    }

    pub fn len(&self) -> usize {
        self.t_coords.len() * self.s_coords.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<Point> {
        self.t_coords
            .iter()
            .flat_map(|&t| self.s_coords.iter().map(move |&s| Point { s, t }))
            .collect()
    }
}

/// Arbitrary distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredDesign {
    points: Vec<Point>,
}

impl ScatteredDesign {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("empty point set".into()));
        }
        if points.iter().any(|p| !(p.s.is_finite() && p.t.is_finite())) {
            return Err(Error::InvalidDesign("non-finite coordinate".into()));
        }
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.s.total_cmp(&b.s).then(a.t.total_cmp(&b.t)));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDesign("duplicate point".into()));
        }
        Ok(Self { points })
    }

    /// Skips the duplicate check; used to exercise factorization failures.
    pub fn new_unchecked(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&p| p.into()).collect()
    }

    fn unit() -> CovarianceParams {
        CovarianceParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn diagonal_points_give_unit_increments() {
        let d = validate_condition_d(&pts(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])).unwrap();
        assert_eq!(d.origin(), Point::new(1.0, 1.0));
        assert_eq!(d.d(), &[1.0, 1.0]);
        assert_eq!(d.delta(), &[1.0, 1.0]);
    }

    #[test]
    fn repeated_s_is_rejected() {
        let err = validate_condition_d(&pts(&[(1.0, 1.0), (2.0, 2.0), (2.0, 3.0)])).unwrap_err();
        assert_eq!(
            err,
            Error::ConditionDViolation {
                index: 2,
                axis: Axis::S
            }
        );
    }

    #[test]
    fn single_point_design() {
        let d = validate_condition_d(&pts(&[(0.5, 0.5)])).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.d().is_empty() && d.delta().is_empty());
        assert_eq!(skewed_length(&d, &unit()), 0.0);
    }

    #[test]
    fn nonpositive_origin() {
        let p = pts(&[(0.0, 1.0), (1.0, 2.0)]);
        assert_eq!(
            validate_condition_d(&p).unwrap_err(),
            Error::NonpositiveCoordinate { index: 0 }
        );
        let opts = ConditionDOptions {
            allow_nonpositive_origin: true,
        };
        assert!(validate_condition_d_with(&p, opts).is_ok());
        assert!(validate_condition_d(&[]).is_err());
    }

    #[test]
    fn sigma_tilde_round_trip() {
        let p = CovarianceParams::new(0.7, 2.3, 1.9).unwrap();
        let back = CovarianceParams::from_sigma_tilde(0.7, 2.3, p.sigma_tilde()).unwrap();
        assert_relative_eq!(back.sigma(), 1.9, max_relative = 1e-14);
        assert!(CovarianceParams::new(0.0, 1.0, 1.0).is_err());
        assert!(CovarianceParams::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn q_value_examples() {
        let d = MonotoneDesign::from_increments(Point::new(1.0, 1.0), vec![0.25], vec![0.2]).unwrap();
        let q = q_values(&d, &unit());
        assert_relative_eq!(q[0], (-0.45f64).exp(), max_relative = 1e-15);
        assert!((q[0] - 0.63763).abs() < 5e-6);

        let p = CovarianceParams::new(1.2, 0.8, 1.0).unwrap();
        let d = MonotoneDesign::from_increments(Point::new(1.0, 1.0), vec![0.5, 0.3], vec![0.2, 0.7]).unwrap();
        let q = q_values(&d, &p);
        assert_relative_eq!(q[0], (-0.76f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(q[1], (-0.92f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn skewed_length_examples() {
        let d =
            MonotoneDesign::from_increments(Point::new(0.0, 0.0), vec![4.0 / 63.0; 63], vec![3.2 / 63.0; 63]).unwrap();
        assert_relative_eq!(skewed_length(&d, &unit()), 7.2, max_relative = 1e-14);
        let p = CovarianceParams::new(10.0, 1.0, 1.0).unwrap();
        let d = MonotoneDesign::from_increments(Point::new(0.0, 0.0), vec![0.25; 15], vec![0.2; 15]).unwrap();
        assert_relative_eq!(skewed_length(&d, &p), 40.5, max_relative = 1e-14);
    }

    #[test]
    fn kernel_and_variogram() {
        let p = unit();
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 1.0);
        assert_eq!(covariance_kernel(a, a, &p), 1.0);
        assert_relative_eq!(covariance_kernel(a, b, &p), (-2.0f64).exp(), max_relative = 1e-15);
        let p2 = CovarianceParams::new(1.0, 1.0, 3.0).unwrap();
        assert_eq!(covariance_kernel(b, b, &p2), 9.0);

        assert_eq!(semivariogram(0.0, 0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(
            semivariogram(1.0, 1.0, &p).unwrap(),
            2.0 * (1.0 - (-2.0f64).exp()),
            max_relative = 1e-14
        );
        let sill = p.sigma_tilde().powi(2) / 2.0;
        let mut last = 0.0;
        for k in 1..60 {
            let v = semivariogram(k as f64, 0.5 * k as f64, &p).unwrap();
            assert!(v >= last && v <= sill);
            last = v;
        }
        assert!(sill - last < 1e-12);
        assert!(semivariogram(-1.0, 0.0, &p).is_err());
    }

    #[test]
    fn grid_from_points() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let g = GridDesign::from_points(&p).unwrap();
        assert_eq!(g.t_coords(), &[0.0, 1.0]);
        assert_eq!(g.len(), 4);
        assert!(GridDesign::from_points(&p[..3]).is_err());
        assert!(GridDesign::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn scattered_rejects_duplicates() {
        assert!(ScatteredDesign::new(pts(&[(1.0, 2.0), (3.0, 1.0), (1.0, 2.0)])).is_err());
        assert!(ScatteredDesign::new(pts(&[(1.0, 2.0), (3.0, 1.0)])).is_ok());
    }

    fn arb_design() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64)> {
        (1usize..12).prop_flat_map(|m| {
            (
                prop::collection::vec(0.01f64..3.0, m),
                prop::collection::vec(0.01f64..3.0, m),
                0.1f64..5.0,
                0.1f64..5.0,
            )
        })
    }

    proptest! {
        #[test]
        fn points_round_trip_exactly(raw in prop::collection::vec((0.01f64..2.0, 0.01f64..2.0), 1..20)) {
            let mut s = 0.3;
            let mut t = 0.7;
            let points: Vec<Point> = raw.iter().map(|&(a, b)| { s += a; t += b; Point::new(s, t) }).collect();
            let design = validate_condition_d(&points).unwrap();
            prop_assert_eq!(design.points(), &points[..]);
        }

        #[test]
        fn q_in_open_unit_interval((d, delta, a, b) in arb_design()) {
            let p = CovarianceParams::new(a, b, 1.0).unwrap();
            let design = MonotoneDesign::from_increments(Point::new(1.0, 1.0), d, delta).unwrap();
            for q in q_values(&design, &p) {
                prop_assert!(q > 0.0 && q < 1.0);
            }
        }

        #[test]
        fn skewed_length_is_additive((d, delta, a, b) in arb_design(), extra in prop::collection::vec((0.01f64..3.0, 0.01f64..3.0), 1..5)) {
            let p = CovarianceParams::new(a, b, 1.0).unwrap();
            let design = MonotoneDesign::from_increments(Point::new(1.0, 1.0), d, delta).unwrap();
            let (ed, ee): (Vec<f64>, Vec<f64>) = extra.iter().copied().unzip();
            let longer = design.extend(&ed, &ee).unwrap();
            let added: f64 = ed.iter().zip(&ee).map(|(&x, &y)| p.skewed(x, y)).sum();
            let lhs = skewed_length(&longer, &p);
            let rhs = skewed_length(&design, &p) + added;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
            prop_assert_eq!(&longer.points()[..design.len()], design.points());
        }

        #[test]
        fn kernel_is_symmetric(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0, al in 0.1f64..4.0, be in 0.1f64..4.0) {
            let p = CovarianceParams::new(al, be, 1.3).unwrap();
            let x = Point::new(a, b);
            let y = Point::new(c, d);
            prop_assert_eq!(covariance_kernel(x, y, &p), covariance_kernel(y, x, &p));
        }

        #[test]
        fn q_symmetric_under_axis_swap_when_rates_equal((d, delta, a, _b) in arb_design()) {
            let p = CovarianceParams::new(a, a, 1.0).unwrap();
            let design = MonotoneDesign::from_increments(Point::new(1.0, 1.0), d, delta).unwrap();
            prop_assert_eq!(q_values(&design, &p), q_values(&design.swapped(), &p));
        }

        #[test]
        fn kernel_matches_product_of_q((d, delta, a, b) in arb_design()) {
            prop_assume!(d.len() <= 7);
            let p = CovarianceParams::new(a, b, 1.7).unwrap();
            let design = MonotoneDesign::from_increments(Point::new(1.0, 1.0), d, delta).unwrap();
            let q = q_values(&design, &p);
            let pts = design.points();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let prod: f64 = q[i..j].iter().product();
                    let k = covariance_kernel(pts[i], pts[j], &p);
                    prop_assert!((k - 1.7f64.powi(2) * prod).abs() <= 1e-12 * k.max(1e-300) + 1e-300);
                }
            }
        }
    }
}
