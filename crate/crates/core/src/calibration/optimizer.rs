//! Box-constrained derivative-free minimisation on the unit cube: a
//! differential-evolution stage followed by Nelder–Mead refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Share of the budget spent in the population stage.
const GLOBAL_SHARE: f64 = 0.5;
const POP_PER_DIM: usize = 15;
const CROSSOVER: f64 = 0.9;
/// Population size is capped so the global stage runs at least this many generations.
const MIN_GENERATIONS: usize = 15;
/// Simplex diameter (unit-cube coordinates) below which the local stage stops.
pub const SIMPLEX_TOL: f64 = 1e-6;
const INITIAL_STEP: f64 = 0.05;
const MAX_RESTARTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maps a trial coordinate back into `[0, 1]` by reflecting at the faces.
pub fn reflect_clip(x: f64) -> f64 {
    let y = if x < 0.0 {
        -x
    } else if x > 1.0 {
        2.0 - x
    } else {
        x
    };
    y.clamp(0.0, 1.0)
}

struct Counter<'a, F> {
    f: &'a F,
    used: usize,
    best_x: Vec<f64>,
    best: f64,
}

impl<'a, F: Fn(&[f64]) -> f64 + Sync> Counter<'a, F> {
    fn record(&mut self, x: &[f64], v: f64) {
        if v < self.best || (self.best.is_infinite() && self.best_x.is_empty()) {
            self.best = v;
            self.best_x = x.to_vec();
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = sanitize((self.f)(x));
        self.used += 1;
        self.record(x, v);
        v
    }

    /// Evaluates a batch in parallel; results and bookkeeping follow batch order.
    fn eval_batch(&mut self, xs: &[Vec<f64>]) -> Vec<f64> {
        let f = self.f;
        let values: Vec<f64> = xs.par_iter().map(|x| sanitize(f(x))).collect();
        for (x, &v) in xs.iter().zip(&values) {
            self.used += 1;
            self.record(x, v);
        }
        values
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimises `f` over `[0, 1]^dim` using at most `budget` evaluations.
///
/// Failed evaluations should return `+inf` (NaN is treated the same way).
/// The result is a deterministic function of `(f, dim, budget, seed)`.
pub fn minimize<F>(f: &F, dim: usize, budget: usize, seed: u64) -> Minimum
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut c = Counter {
        f,
        used: 0,
        best_x: Vec::new(),
        best: f64::INFINITY,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    differential_evolution(&mut c, dim, budget, &mut rng);
    let converged = nelder_mead(&mut c, dim, budget);
    Minimum {
        x: c.best_x,
        value: c.best,
        evaluations: c.used,
        converged,
    }
}

fn differential_evolution<F>(
    c: &mut Counter<'_, F>,
    dim: usize,
    budget: usize,
    rng: &mut ChaCha8Rng,
) where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let global = ((budget as f64) * GLOBAL_SHARE) as usize;
    let np = (POP_PER_DIM * dim).min(global / MIN_GENERATIONS).max(4);
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut fit = c.eval_batch(&pop);
    while c.used + np <= global {
        let best = argmin(&fit);
        let scale = 0.5 + 0.5 * rng.random::<f64>();
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let (r1, r2) = distinct_pair(rng, np, i);
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|d| {
                        let cross = d == forced || rng.random::<f64>() < CROSSOVER;
                        if !cross {
                            return pop[i][d];
                        }
                        let v = pop[i][d]
                            + scale * (pop[best][d] - pop[i][d])
                            + scale * (pop[r1][d] - pop[r2][d]);
                        // out-of-box mutants land between parent and face
                        if v < 0.0 {
                            0.5 * pop[i][d]
                        } else if v > 1.0 {
                            0.5 * (pop[i][d] + 1.0)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let values = c.eval_batch(&trials);
        for (i, (t, v)) in trials.into_iter().zip(values).enumerate() {
            if v <= fit[i] {
                pop[i] = t;
                fit[i] = v;
            }
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn distinct_pair(rng: &mut ChaCha8Rng, n: usize, exclude: usize) -> (usize, usize) {
    let pick = |rng: &mut ChaCha8Rng, taken: &[usize]| loop {
        let r = rng.random_range(0..n);
        if !taken.contains(&r) {
            return r;
        }
    };
    let r1 = pick(rng, &[exclude]);
    let r2 = pick(rng, &[exclude, r1]);
    (r1, r2)
}

/// Restarted Nelder–Mead from the incumbent. Returns whether the final simplex
/// collapsed below [`SIMPLEX_TOL`] before the budget ran out.
fn nelder_mead<F>(c: &mut Counter<'_, F>, dim: usize, budget: usize) -> bool
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if c.best_x.is_empty() || !c.best.is_finite() {
        return false;
    }
    let mut converged = false;
    for _ in 0..MAX_RESTARTS {
        let start = c.best;
        converged = simplex_run(c, dim, budget);
        if !converged || !(c.best < start) {
            break;
        }
    }
    converged
}

fn simplex_run<F>(c: &mut Counter<'_, F>, dim: usize, budget: usize) -> bool
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let x0 = c.best_x.clone();
    let mut simplex = vec![x0.clone()];
    let mut values = vec![c.best];
    for d in 0..dim {
        if c.used >= budget {
            return false;
        }
        let mut x = x0.clone();
        x[d] = if x[d] + INITIAL_STEP <= 1.0 {
            x[d] + INITIAL_STEP
        } else {
            x[d] - INITIAL_STEP
        };
        values.push(c.eval(&x));
        simplex.push(x);
    }
    let n = dim as f64;
    loop {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if diameter(&simplex) < SIMPLEX_TOL {
            return true;
        }
        if c.used >= budget {
            return false;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|x| x[d]).sum::<f64>() / n)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(&m, &w)| reflect_clip(m + t * (m - w)))
                .collect()
        };
        let xr = along(1.0);
        let fr = c.eval(&xr);
        if fr < values[0] {
            if c.used >= budget {
                simplex[dim] = xr;
                values[dim] = fr;
                continue;
            }
            let xe = along(2.0);
            let fe = c.eval(&xe);
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        if c.used >= budget {
            return false;
        }
        let (xc, fc) = if fr < values[dim] {
            let x = along(0.5);
            let v = c.eval(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = c.eval(&x);
            (x, v)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=dim {
            if c.used >= budget {
                return false;
            }
            let x: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(&b, &x)| b + 0.5 * (x - b))
                .collect();
            values[i] = c.eval(&x);
            simplex[i] = x;
        }
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for x in &simplex[1..] {
        let dist = x
            .iter()
            .zip(&simplex[0])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        d = d.max(dist);
    }
    d
}
