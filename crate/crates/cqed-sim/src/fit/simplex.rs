//! Bounded Nelder-Mead simplex minimizer with seeded random restarts.
//!
//! Trial points are projected onto the box constraints. The best evaluation
//! seen anywhere (including the initial point) is returned, so the reported
//! minimum never exceeds the objective at the start.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Iteration budget per start.
    pub max_iter: usize,
    /// Relative f-spread termination threshold.
    pub ftol: f64,
    /// Simplex diameter termination threshold, relative to the box size.
    pub xtol: f64,
    /// Number of additional random starts inside the bounds.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iter: 400, ftol: 1e-10, xtol: 1e-9, restarts: 3, seed: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Minimize `f` over the box [lo, hi] starting at `x0`, restarting from
/// seeded random interior points. Non-finite objective values are treated as
/// +∞ (the trial is rejected).
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let dim = x0.len();
    assert_eq!(lo.len(), dim);
    assert_eq!(hi.len(), dim);
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], best: &mut (Vec<f64>, f64), n: &mut usize| -> f64 {
        *n += 1;
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        if v < best.1 {
            *best = (x.to_vec(), v);
        }
        v
    };

    let mut start = x0.to_vec();
    clamp(&mut start, lo, hi);
    let mut best = (start.clone(), f64::INFINITY);
    let first = eval(&start, &mut best, &mut evaluations);
    best = (start.clone(), first);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut total_iterations = 0usize;
    let mut any_converged = false;

    for attempt in 0..=opts.restarts {
        let origin = if attempt == 0 {
            start.clone()
        } else {
            (0..dim).map(|i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()).collect()
        };
        let (iters, converged) =
            single_run(&mut eval, &origin, lo, hi, opts, &mut best, &mut evaluations);
        total_iterations += iters;
        any_converged |= converged;
        if dim == 0 {
            break;
        }
    }

    SimplexResult {
        x: best.0,
        fx: best.1,
        iterations: total_iterations,
        evaluations,
        converged: any_converged && best.1.is_finite(),
    }
}

fn single_run<E: FnMut(&[f64], &mut (Vec<f64>, f64), &mut usize) -> f64>(
    eval: &mut E,
    origin: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &SimplexOptions,
    best: &mut (Vec<f64>, f64),
    evaluations: &mut usize,
) -> (usize, bool) {
    let dim = origin.len();
    if dim == 0 {
        return (0, true);
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(origin.to_vec());
    for i in 0..dim {
        let mut p = origin.to_vec();
        let span = hi[i] - lo[i];
        let step = (0.05 * span).max(1e-12);
        p[i] = if p[i] + step <= hi[i] { p[i] + step } else { p[i] - step };
        clamp(&mut p, lo, hi);
        simplex.push(p);
    }
    let mut scores: Vec<f64> = simplex.iter().map(|p| eval(p, best, evaluations)).collect();

    let box_scale: f64 = (0..dim).map(|i| hi[i] - lo[i]).fold(0.0, f64::max).max(1e-300);

    for iter in 0..opts.max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best_i = order[0];
        let worst_i = order[dim];
        let second_worst_i = order[dim.saturating_sub(1)];

        let f_best = scores[best_i];
        let f_worst = scores[worst_i];
        let f_spread = (f_worst - f_best).abs();
        let diameter = simplex
            .iter()
            .map(|p| {
                (0..dim)
                    .map(|i| (p[i] - simplex[best_i][i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if f_spread <= opts.ftol * (f_best.abs() + 1e-30) && diameter <= opts.xtol * box_scale {
            return (iter, true);
        }

        let mut centroid = vec![0.0; dim];
        for &idx in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[idx][d];
            }
        }
        for d in 0..dim {
            centroid[d] /= dim as f64;
        }

        let mut reflected = vec![0.0; dim];
        for d in 0..dim {
            reflected[d] = centroid[d] + alpha * (centroid[d] - simplex[worst_i][d]);
        }
        clamp(&mut reflected, lo, hi);
        let f_r = eval(&reflected, best, evaluations);

        if f_r < scores[second_worst_i] && f_r >= f_best {
            simplex[worst_i] = reflected;
            scores[worst_i] = f_r;
            continue;
        }
        if f_r < f_best {
            let mut expanded = vec![0.0; dim];
            for d in 0..dim {
                expanded[d] = centroid[d] + gamma * (reflected[d] - centroid[d]);
            }
            clamp(&mut expanded, lo, hi);
            let f_e = eval(&expanded, best, evaluations);
            if f_e < f_r {
                simplex[worst_i] = expanded;
                scores[worst_i] = f_e;
            } else {
                simplex[worst_i] = reflected;
                scores[worst_i] = f_r;
            }
            continue;
        }
        let mut contracted = vec![0.0; dim];
        for d in 0..dim {
            contracted[d] = centroid[d] + rho * (simplex[worst_i][d] - centroid[d]);
        }
        clamp(&mut contracted, lo, hi);
        let f_c = eval(&contracted, best, evaluations);
        if f_c < scores[worst_i] {
            simplex[worst_i] = contracted;
            scores[worst_i] = f_c;
            continue;
        }
        for &idx in order.iter().skip(1) {
            for d in 0..dim {
                simplex[idx][d] =
                    simplex[best_i][d] + sigma * (simplex[idx][d] - simplex[best_i][d]);
            }
            let p = simplex[idx].clone();
            scores[idx] = eval(&p, best, evaluations);
        }
    }
    (opts.max_iter, false)
}
