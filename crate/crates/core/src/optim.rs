//! Derivative-free minimization: Nelder–Mead with seeded multi-start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop once the simplex's function-value spread falls below this.
    pub f_tol: f64,
    /// ...and its largest vertex distance from the best vertex below this.
    pub x_tol: f64,
    /// Initial simplex edge, relative to the start coordinate (absolute when
    /// the coordinate is zero).
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 2000, f_tol: 1e-13, x_tol: 1e-10, initial_step: 0.25 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i] != 0.0 { cfg.initial_step * x[i].abs() } else { cfg.initial_step };
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut converged = false;
    while evals.get() < cfg.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= cfg.f_tol * (1.0 + best.abs()) && size <= cfg.x_tol * (1.0 + norm_inf(&simplex[0].0)) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect() };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            let v = eval(&x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals: evals.get(), converged }
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Multi-start settings: `starts` points with coordinates
/// `±10^U(log_lo, log_hi)` from a seeded generator; the first start is the
/// all-`10^log_lo` point.
#[derive(Debug, Clone, Copy)]
pub struct MultiStartConfig {
    pub starts: usize,
    pub seed: u64,
    pub log_lo: f64,
    pub log_hi: f64,
    pub local: NelderMeadConfig,
}

impl Default for MultiStartConfig {
    fn default() -> Self {
        Self { starts: 32, seed: 0, log_lo: -2.0, log_hi: 2.0, local: NelderMeadConfig::default() }
    }
}

/// Best local minimum over seeded starts. `converged` reports whether the
/// winning run met its tolerances.
pub fn multi_start<F: Fn(&[f64]) -> f64>(f: F, dim: usize, cfg: &MultiStartConfig) -> Minimum {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Minimum> = None;
    for s in 0..cfg.starts.max(1) {
        let x0: Vec<f64> = (0..dim)
            .map(|_| {
                let mag = 10f64.powf(rng.random_range(cfg.log_lo..=cfg.log_hi));
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                if s == 0 {
                    10f64.powf(cfg.log_lo)
                } else {
                    sign * mag
                }
            })
            .collect();
        let m = nelder_mead(&f, &x0, &cfg.local);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    best.expect("at least one start")
}
