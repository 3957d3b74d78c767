//! Nelder–Mead simplex minimization with an optional projection onto a
//! convex feasible set. Every trial vertex is projected before it is
//! evaluated, so the simplex never leaves the feasible set.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop when the spread of function values falls below this.
    pub f_tolerance: f64,
    /// ... and the simplex diameter falls below this.
    pub x_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            f_tolerance: 1e-12,
            x_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` starting from `x0` with an axis-aligned initial simplex of
/// the given per-coordinate `steps`.
pub fn minimize<F, P>(mut f: F, project: P, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let k = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    project(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let v0 = eval(&start);
    simplex.push((start.clone(), v0));
    for i in 0..k {
        let mut x = start.clone();
        x[i] += steps[i];
        project(&mut x);
        if x == start {
            // pushed back onto the start; step the other way
            x[i] -= 2.0 * steps[i];
            project(&mut x);
        }
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[k].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0f64, f64::max);
        if (worst - best).abs() <= opts.f_tolerance * (1.0 + best.abs()) && diameter <= opts.x_tolerance {
            converged = true;
            break;
        }
        if diameter == 0.0 {
            // collapsed simplex; nothing more to learn
            converged = (worst - best).abs() <= opts.f_tolerance * (1.0 + best.abs());
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; k];
        for (x, _) in &simplex[..k] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / k as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[k].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            project(&mut x);
            x
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(EXPAND);
            let fe = eval(&xe);
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[k].1 {
            let xc = along(CONTRACT * REFLECT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < simplex[k].1.min(fr) {
            simplex[k] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, b) in x.iter_mut().zip(&x_best) {
                *xi = b + SHRINK * (*xi - b);
            }
            project(x);
            *v = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value,
        iterations,
        evaluations,
        converged,
    }
}

/// Euclidean projection onto `{x : x_i ≥ lower, Σ x_i ≤ cap}`.
pub fn project_capped(x: &mut [f64], lower: f64, cap: f64) {
    for v in x.iter_mut() {
        if !(*v >= lower) {
            *v = lower;
        }
    }
    let total: f64 = x.iter().sum();
    if total <= cap {
        return;
    }
    // project y = x − lower onto the simplex {y ≥ 0, Σy = cap − m·lower}
    let budget = cap - lower * x.len() as f64;
    let mut y: Vec<f64> = x.iter().map(|v| v - lower).collect();
    let mut sorted = y.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        acc += u;
        let t = (acc - budget) / (i + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    for (v, yi) in x.iter_mut().zip(y.iter_mut()) {
        *v = lower + (*yi - tau).max(0.0);
    }
}
