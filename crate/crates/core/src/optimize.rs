//! Derivative-free minimizers: Nelder–Mead and compass search, plus a
//! seeded multi-start driver that runs restarts in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NelderMead,
    CompassSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Spread of objective values across the simplex (absolute).
    pub ftol: f64,
    /// Simplex diameter or compass step (absolute, per coordinate).
    pub xtol: f64,
    /// Initial simplex edge or compass step.
    pub step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ftol: 1e-14,
            xtol: 1e-10,
            step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// False when the budget ran out before the tolerances were met.
    pub converged: bool,
}

struct Counted<'a> {
    f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    evals: usize,
    budget: usize,
}

impl Counted<'_> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }
}

fn nm_pass(obj: &mut Counted, x0: &[f64], tol: &Tolerances) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let nf = n as f64;
    // Dimension-adaptive coefficients.
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += tol.step;
        simplex.push(p);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|p| obj.call(p)).collect();

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| fv[i].total_cmp(&fv[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();

        let fspread = fv[n] - fv[0];
        let xspread = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        // A round-off level spread means the remaining extent lies along flat directions.
        let flat = fspread <= 4.0 * f64::EPSILON * fv[0].abs().max(f64::MIN_POSITIVE);
        if (fspread <= tol.ftol && xspread <= tol.xtol) || flat {
            return (simplex[0].clone(), fv[0], true);
        }
        if obj.exhausted() {
            return (simplex[0].clone(), fv[0], false);
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n][k] - centroid[k]))
                .collect()
        };

        let xr = along(-alpha);
        let fr = obj.call(&xr);
        if fr < fv[0] {
            let xe = along(-alpha * beta);
            let fe = obj.call(&xe);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[n] {
            let xc = along(-alpha * gamma);
            let fc = obj.call(&xc);
            (xc, fc)
        } else {
            let xc = along(gamma);
            let fc = obj.call(&xc);
            (xc, fc)
        };
        if fc < fv[n].min(fr) {
            simplex[n] = xc;
            fv[n] = fc;
            continue;
        }
        for i in 1..=n {
            for k in 0..n {
                simplex[i][k] = simplex[0][k] + delta * (simplex[i][k] - simplex[0][k]);
            }
            fv[i] = obj.call(&simplex[i]);
        }
    }
}

/// Nelder–Mead, restarted from the incumbent with a shrinking simplex until a
/// restart no longer improves the value or the budget is spent.
pub fn nelder_mead(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    budget: usize,
    tol: &Tolerances,
) -> Outcome {
    let mut obj = Counted { f, evals: 0, budget };
    let mut tol_k = *tol;
    let (mut x, mut fx, mut converged) = nm_pass(&mut obj, x0, &tol_k);
    while converged && !obj.exhausted() {
        tol_k.step = (tol_k.step * 0.1).max(tol.xtol * 100.0);
        let (x2, f2, c2) = nm_pass(&mut obj, &x, &tol_k);
        let improved = f2 < fx - tol.ftol;
        if f2 < fx {
            x = x2;
            fx = f2;
        }
        converged = c2;
        if !improved {
            break;
        }
    }
    Outcome {
        x,
        f: fx,
        evaluations: obj.evals,
        converged,
    }
}

/// Coordinate (compass) search with step halving.
pub fn compass_search(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    budget: usize,
    tol: &Tolerances,
) -> Outcome {
    let mut obj = Counted { f, evals: 0, budget };
    let mut x = x0.to_vec();
    let mut fx = obj.call(&x);
    let mut step = tol.step;
    while step > tol.xtol {
        if obj.exhausted() {
            return Outcome {
                x,
                f: fx,
                evaluations: obj.evals,
                converged: false,
            };
        }
        let mut moved = false;
        for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += sign * step;
                let fy = obj.call(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Outcome {
        x,
        f: fx,
        evaluations: obj.evals,
        converged: true,
    }
}

/// Seeded multi-start configuration. `budget` is the total over all restarts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiStart {
    pub restarts: usize,
    pub budget: usize,
    pub seed: u64,
    pub method: Method,
    pub tol: Tolerances,
}

impl MultiStart {
    pub fn new(budget: usize, seed: u64, method: Method) -> Self {
        MultiStart {
            restarts: 10,
            budget,
            seed,
            method,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiOutcome {
    pub best: Outcome,
    /// Final point of every restart, in restart order.
    pub runs: Vec<Outcome>,
    pub evaluations: usize,
}

/// RNG for restart `run` of a problem seeded with `seed`.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Runs `cfg.restarts` independent minimizations from points drawn by `init`.
/// Results do not depend on thread scheduling.
pub fn multistart(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    init: &(dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync),
    cfg: &MultiStart,
) -> MultiOutcome {
    let restarts = cfg.restarts.max(1);
    let per_run = (cfg.budget / restarts).max(1);
    let runs: Vec<Outcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = run_rng(cfg.seed, r);
            let x0 = init(&mut rng);
            match cfg.method {
                Method::NelderMead => nelder_mead(f, &x0, per_run, &cfg.tol),
                Method::CompassSearch => compass_search(f, &x0, per_run, &cfg.tol),
            }
        })
        .collect();
    let evaluations = runs.iter().map(|o| o.evaluations).sum();
    let mut best = 0;
    for (i, o) in runs.iter().enumerate() {
        if o.f < runs[best].f {
            best = i;
        }
    }
    MultiOutcome {
        best: runs[best].clone(),
        runs,
        evaluations,
    }
}
