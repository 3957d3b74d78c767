use rand::Rng;

use ou_design::design::{self, GeometricDesignSpec};
use ou_design::fisher;
use ou_design::model::{CovarianceParams, MonotoneDesign, Point, Region};
use ou_design::oracle;
use ou_design::sim::replication_rng;
use ou_design::verify::{random_monotone, random_params, relative_error};

#[test]
fn tridiagonal_inverse_on_500_designs() {
    let mut worst = 0.0f64;
    for k in 0..500 {
        let mut rng = replication_rng(21, k);
        let n = rng.random_range(2..=30);
        let des = random_monotone(&mut rng, n, 0.01, 3.0);
        let p = random_params(&mut rng, 0.1, 10.0);
        let inv = oracle::closed_form_inverse(&des, &p).unwrap();
        worst = worst.max(oracle::identity_residual(
            &oracle::build_covariance_monotone(&des, &p),
            &inv,
        ));
        let dense = oracle::spd_factor(&oracle::build_covariance_monotone(&des, &p)).unwrap();
        assert!((dense.log_det() - oracle::monotone_log_det(&des, &p)).abs() < 1e-9 * (1.0 + dense.log_det().abs()));
    }
    assert!(worst < 1e-10, "{worst:e}");
}

/// Moving two skewed increments towards each other (a T-transform) never
/// lowers the trend information.
#[test]
fn trend_information_is_schur_concave() {
    let p = CovarianceParams::correlation(1.0, 1.0).unwrap();
    let build = |x: &[f64]| {
        let half: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
        MonotoneDesign::from_increments(Point::new(0.0, 0.0), half.clone(), half).unwrap()
    };
    for k in 0..1000 {
        let mut rng = replication_rng(22, k);
        let m = rng.random_range(2..=12);
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..3.0)).collect();
        let (i, j) = (rng.random_range(0..m), rng.random_range(0..m));
        if x[i] == x[j] {
            continue;
        }
        let (hi, lo) = if x[i] > x[j] { (i, j) } else { (j, i) };
        let t = rng.random_range(0.0..=0.5) * (x[hi] - x[lo]);
        let mut y = x.clone();
        y[hi] -= t;
        y[lo] += t;
        let (mx, my) = (
            fisher::trend_information(&build(&x), &p),
            fisher::trend_information(&build(&y), &p),
        );
        assert!(my >= mx - 1e-13, "{x:?} -> {y:?}: {mx} > {my}");
    }
}

#[test]
fn random_designs_with_full_spans_never_beat_the_optimum() {
    for (a, b) in [(0.5, 0.8), (1.0, 1.0), (10.0, 1.0)] {
        let p = CovarianceParams::correlation(a, b).unwrap();
        let region = Region::new(0.0, 3.0, 0.0, 3.75).unwrap();
        let n = 16;
        let best = fisher::trend_information(&design::optimal_trend_design(n, &region).unwrap(), &p);
        assert!((best - fisher::trend_information_equidistant(n, 3.75 * a + 3.0 * b).unwrap()).abs() < 1e-12);
        for k in 0..1000 {
            let mut rng = replication_rng(23, k);
            let mut split = |span: f64| {
                let w: Vec<f64> = (1..n).map(|_| rng.random_range(1e-3..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| span * v / s).collect::<Vec<_>>()
            };
            let (d, e) = (split(region.t_span()), split(region.s_span()));
            let des = MonotoneDesign::from_increments(Point::new(0.0, 0.0), d, e).unwrap();
            assert!(fisher::trend_information(&des, &p) <= best + 1e-12);
        }
    }
}

#[test]
fn closed_forms_match_oracle_on_geometric_designs() {
    for (r1, r2) in [(0.3, 0.9), (1.0, 0.5), (0.05, 0.05), (0.7, 1.0)] {
        for (a, b) in [(0.5, 0.8), (3.0, 3.0)] {
            let p = CovarianceParams::correlation(a, b).unwrap();
            let spec = GeometricDesignSpec {
                n: 7,
                r1,
                r2,
                spans: (2.0, 1.5),
            };
            let des = design::geometric_progression_design(&spec).unwrap();
            let m = fisher::trend_information_geometric(7, r1, r2, &p, spec.spans).unwrap();
            assert!(relative_error(m, oracle::trend_information_oracle(des.points(), &p).unwrap()) < 1e-12);
            let phi = fisher::phi_geometric(7, r1, r2, &p, spec.spans).unwrap();
            let dense = oracle::covariance_information_oracle(des.points(), &p)
                .unwrap()
                .determinant();
            assert!((phi - dense).abs() < 1e-9 * (1.0 + dense.abs()), "{phi} vs {dense}");
        }
    }
}

#[test]
fn covariance_information_matches_finite_difference_oracle() {
    for k in 0..30 {
        let mut rng = replication_rng(24, k);
        let n = rng.random_range(2..=8);
        let des = random_monotone(&mut rng, n, 0.1, 1.5);
        let p = random_params(&mut rng, 0.3, 3.0);
        let closed = fisher::covariance_information(&des, &p).unwrap();
        let fd = oracle::covariance_information_oracle_fd(des.points(), &p, 1e-5).unwrap();
        for (a, b) in [
            (closed.m_alpha, fd.m_alpha),
            (closed.m_beta, fd.m_beta),
            (closed.m_alpha_beta, fd.m_alpha_beta),
        ] {
            assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn lowering_the_floor_raises_the_best_phi() {
    let p = CovarianceParams::correlation(1.0, 1.0).unwrap();
    let mut last = 0.0;
    for floor in [1e-2, 1e-3, 1e-4] {
        let mut cfg = design::SearchConfig::new(design::Objective::Phi, 4, Region::new(0.0, 1.0, 0.0, 1.0).unwrap());
        cfg.floor = floor;
        cfg.starts = 8;
        let res = design::search(&cfg, &p).unwrap();
        assert!(res.best_value > last, "floor {floor}: {} <= {last}", res.best_value);
        assert!(res.boundary_diagnostics().any());
        last = res.best_value;
    }
}
