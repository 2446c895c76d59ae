//! Batch rate-distortion for discrete sources.
//!
//! The training set `X^k` enters only through its histogram `H_k`, so the
//! iterative information-bottleneck updates run over the
//! `C(k+|X|−1, |X|−1)` histograms instead of the `|X|^k` sequences:
//!
//! ```text
//! q(t|h)  ∝ q(t) · exp(−β · KL(p(x|h) ‖ q(x|t)))
//! q(t)    = Σ_h q(t|h) p(h)
//! q(x|t)  = Σ_h q(t|h) p(h, x) / q(t)
//! ```
//!
//! Rates and distortions are evaluated exactly from the joint
//! `p(h) q(t|h)`: rate `I(H;T)`, distortion `H(X|T) = H(X) − I(X;T)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hull;
use crate::model::{shannon_entropy, DiscreteFamily, Histogram, RDPoint};

/// Hard cap on the number of histograms a solver will materialize.
const MAX_HISTOGRAMS: u128 = 5_000_000;
/// Mass below which a cluster counts as unused.
const ACTIVE_MASS: f64 = 1e-12;

/// All count vectors of length `alphabet_size` summing to `k`, in
/// lexicographically descending order (`(k,0,…)` first).
pub fn enumerate_histograms(alphabet_size: usize, k: u32) -> Result<Vec<Histogram>> {
    if alphabet_size == 0 {
        return Err(Error::Domain("alphabet must be nonempty".into()));
    }
    let count = histogram_count(alphabet_size, k)
        .filter(|&c| c <= MAX_HISTOGRAMS)
        .ok_or_else(|| Error::Size(format!("too many histograms for |X|={alphabet_size}, k={k}")))?;
    let mut out = Vec::with_capacity(count as usize);
    let mut counts = vec![0u32; alphabet_size];
    fill(&mut counts, 0, k, &mut out);
    Ok(out)
}

fn fill(counts: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Histogram>) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        out.push(Histogram::new(counts.to_vec()));
        return;
    }
    for c in (0..=remaining).rev() {
        counts[pos] = c;
        fill(counts, pos + 1, remaining - c, out);
    }
    counts[pos] = 0;
}

/// `C(k + n − 1, n − 1)` with overflow detection.
fn histogram_count(alphabet_size: usize, k: u32) -> Option<u128> {
    let n = alphabet_size as u128 - 1;
    let mut acc: u128 = 1;
    for i in 1..=n {
        acc = acc.checked_mul(k as u128 + i)? / i;
    }
    Some(acc)
}

/// Histogram-level distributions of a discrete family for `k` samples.
#[derive(Debug, Clone)]
pub struct HistogramStats {
    pub k: u32,
    pub histograms: Vec<Histogram>,
    /// `p(h)`.
    pub p_h: Vec<f64>,
    /// `p(x|h)`, one row per histogram.
    pub p_x_given_h: Vec<Vec<f64>>,
    /// `p(h, x)`, one row per histogram.
    pub p_hx: Vec<Vec<f64>>,
    /// Prior predictive `p(x)`.
    pub p_x: Vec<f64>,
}

impl HistogramStats {
    pub fn num_histograms(&self) -> usize {
        self.p_h.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.p_x.len()
    }

    /// `H(X)`.
    pub fn entropy_x(&self) -> f64 {
        shannon_entropy(&self.p_x)
    }

    /// `H(X|X^k) = Σ_h p(h) H(p(x|h))`.
    pub fn entropy_x_given_data(&self) -> f64 {
        self.p_h
            .iter()
            .zip(&self.p_x_given_h)
            .map(|(ph, row)| ph * shannon_entropy(row))
            .sum()
    }

    /// `I(X;X^k) = I(X;H_k)`.
    pub fn mutual_information_x_data(&self) -> f64 {
        self.entropy_x() - self.entropy_x_given_data()
    }
}

fn ln_factorials(k: u32) -> Vec<f64> {
    let mut t = Vec::with_capacity(k as usize + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for i in 1..=k {
        acc += (i as f64).ln();
        t.push(acc);
    }
    t
}

fn multinomial_pmf(h: &Histogram, probs: &[f64], ln_fact: &[f64]) -> f64 {
    let mut log_p = ln_fact[h.k() as usize];
    for (&c, &p) in h.counts().iter().zip(probs) {
        if c == 0 {
            continue;
        }
        if p <= 0.0 {
            return 0.0;
        }
        log_p += c as f64 * p.ln() - ln_fact[c as usize];
    }
    log_p.exp()
}

/// `p(h)`, `p(x|h)`, `p(h,x)` for all histograms of size `k`.
///
/// A histogram with zero mass gets the prior predictive as `p(x|h)`.
pub fn histogram_stats(family: &DiscreteFamily, k: u32) -> Result<HistogramStats> {
    if k == 0 {
        return Err(Error::Domain("histogram statistics need k >= 1".into()));
    }
    let histograms = enumerate_histograms(family.alphabet_size(), k)?;
    let ln_fact = ln_factorials(k);
    let p_x = family.predictive();
    let nx = family.alphabet_size();

    let mut p_h = Vec::with_capacity(histograms.len());
    let mut p_hx = Vec::with_capacity(histograms.len());
    for h in &histograms {
        let mut ph = 0.0;
        let mut joint = vec![0.0; nx];
        for (w, row) in family.prior().iter().zip(family.likelihood()) {
            let m = w * multinomial_pmf(h, row, &ln_fact);
            ph += m;
            for (j, l) in joint.iter_mut().zip(row) {
                *j += m * l;
            }
        }
        p_h.push(ph);
        p_hx.push(joint);
    }
    // Renormalize away roundoff so every object sums to one.
    let total: f64 = p_h.iter().sum();
    p_h.iter_mut().for_each(|v| *v /= total);
    p_hx.iter_mut().flatten().for_each(|v| *v /= total);

    let p_x_given_h = p_h
        .iter()
        .zip(&p_hx)
        .map(|(&ph, joint)| {
            if ph > 0.0 {
                let s: f64 = joint.iter().sum();
                joint.iter().map(|v| v / s).collect()
            } else {
                p_x.clone()
            }
        })
        .collect();

    Ok(HistogramStats { k, histograms, p_h, p_x_given_h, p_hx, p_x })
}

/// Encoder/marginal/decoder triple of the iterative bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteIBState {
    pub beta: f64,
    /// `q(t|h)`, one row per histogram.
    pub encoder: Vec<Vec<f64>>,
    /// `q(t)`.
    pub marginal: Vec<f64>,
    /// `q(x|t)`, one row per cluster.
    pub decoder: Vec<Vec<f64>>,
    pub iteration: usize,
}

impl DiscreteIBState {
    /// Completes an encoder with its consistent marginal and decoder.
    pub fn from_encoder(beta: f64, encoder: Vec<Vec<f64>>, stats: &HistogramStats) -> Self {
        let (marginal, decoder) = marginal_and_decoder(&encoder, stats);
        Self { beta, encoder, marginal, decoder, iteration: 0 }
    }

    /// Encoder with rows drawn from a symmetric Dirichlet(1).
    pub fn random(beta: f64, t_size: usize, stats: &HistogramStats, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = (0..stats.num_histograms())
            .map(|_| {
                let row: Vec<f64> = (0..t_size).map(|_| Exp1.sample(&mut rng)).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Self::from_encoder(beta, encoder, stats)
    }

    pub fn t_size(&self) -> usize {
        self.marginal.len()
    }

    /// `(I(H;T), I(X;T))` of the encoder.
    pub fn informations(&self, stats: &HistogramStats) -> (f64, f64) {
        information_terms(&self.encoder, stats)
    }

    /// `L = I(H;T) − β I(X;T)`.
    pub fn lagrangian(&self, stats: &HistogramStats) -> f64 {
        let (rate, relevant) = self.informations(stats);
        rate - self.beta * relevant
    }

    pub fn rd_point(&self, stats: &HistogramStats) -> RDPoint {
        let (rate, relevant) = self.informations(stats);
        RDPoint {
            beta: self.beta,
            rate: rate.max(0.0),
            distortion: stats.entropy_x() - relevant,
            n_active: self.marginal.iter().filter(|&&q| q > ACTIVE_MASS).count(),
        }
    }
}

fn marginal_and_decoder(encoder: &[Vec<f64>], stats: &HistogramStats) -> (Vec<f64>, Vec<Vec<f64>>) {
    let t_size = encoder.first().map_or(0, Vec::len);
    let nx = stats.alphabet_size();
    let mut marginal = vec![0.0; t_size];
    let mut joint = vec![vec![0.0; nx]; t_size];
    for ((row, &ph), phx) in encoder.iter().zip(&stats.p_h).zip(&stats.p_hx) {
        if ph <= 0.0 {
            continue;
        }
        for (t, &q) in row.iter().enumerate() {
            marginal[t] += q * ph;
            for (j, &v) in joint[t].iter_mut().zip(phx) {
                *j += q * v;
            }
        }
    }
    let decoder = joint
        .into_iter()
        .zip(&marginal)
        .map(|(row, &qt)| {
            if qt > 0.0 {
                row.into_iter().map(|v| v / qt).collect()
            } else {
                stats.p_x.clone()
            }
        })
        .collect();
    (marginal, decoder)
}

/// Exact `(I(H;T), I(X;T))` for the joint `p(h) q(t|h)`.
pub fn information_terms(encoder: &[Vec<f64>], stats: &HistogramStats) -> (f64, f64) {
    let (marginal, decoder) = marginal_and_decoder(encoder, stats);
    let mut rate = 0.0;
    for (row, &ph) in encoder.iter().zip(&stats.p_h) {
        if ph <= 0.0 {
            continue;
        }
        for (&q, &qt) in row.iter().zip(&marginal) {
            if q > 0.0 {
                rate += ph * q * (q / qt).ln();
            }
        }
    }
    // I(X;T) = Σ_t q(t) KL(q(x|t) ‖ p(x))
    let mut relevant = 0.0;
    for (dec, &qt) in decoder.iter().zip(&marginal) {
        if qt <= 0.0 {
            continue;
        }
        for (&pxt, &px) in dec.iter().zip(&stats.p_x) {
            if pxt > 0.0 {
                relevant += qt * pxt * (pxt / px).ln();
            }
        }
    }
    (rate, relevant)
}

/// `KL(p ‖ q)` with `0 log(0/q) = 0` and `+∞` when `p > 0 = q`.
fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    acc
}

/// One pass of the three bottleneck updates.
///
/// Encoder rows are computed in log space; a row whose weights all vanish is
/// reset to uniform. Zero-mass histograms keep a uniform row.
pub fn ib_update_step(state: &DiscreteIBState, stats: &HistogramStats) -> DiscreteIBState {
    let t_size = state.t_size();
    let log_marginal: Vec<f64> = state
        .marginal
        .iter()
        .map(|&q| if q > 0.0 { q.ln() } else { f64::NEG_INFINITY })
        .collect();
    let encoder: Vec<Vec<f64>> = stats
        .p_x_given_h
        .iter()
        .zip(&stats.p_h)
        .enumerate()
        .map(|(h, (pxh, &ph))| {
            if ph <= 0.0 {
                return vec![1.0 / t_size as f64; t_size];
            }
            let logits: Vec<f64> = (0..t_size)
                .map(|t| {
                    if state.beta == 0.0 {
                        log_marginal[t]
                    } else {
                        log_marginal[t] - state.beta * kl(pxh, &state.decoder[t])
                    }
                })
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                log::warn!("encoder row for histogram {h} underflowed; reset to uniform");
                return vec![1.0 / t_size as f64; t_size];
            }
            let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = weights.iter().sum();
            weights.into_iter().map(|w| w / z).collect()
        })
        .collect();
    let (marginal, decoder) = marginal_and_decoder(&encoder, stats);
    DiscreteIBState { beta: state.beta, encoder, marginal, decoder, iteration: state.iteration + 1 }
}

/// Largest row-wise L1 distance between two encoders.
pub fn encoder_change(a: &DiscreteIBState, b: &DiscreteIBState) -> f64 {
    a.encoder
        .iter()
        .zip(&b.encoder)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solver settings for [`solve_discrete_ib`].
#[derive(Debug, Clone, Copy)]
pub struct DiscreteSolverConfig {
    pub t_size: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl DiscreteSolverConfig {
    pub fn new(t_size: usize, seed: u64) -> Self {
        Self { t_size, seed, tol: 1e-9, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub state: DiscreteIBState,
    pub point: RDPoint,
    pub loss: f64,
    pub converged: bool,
}

/// Iterates [`ib_update_step`] from a seeded random encoder until the
/// largest row change drops below `tol`.
///
/// On hitting `max_iter` the lowest-loss iterate seen is returned with
/// `converged = false`.
pub fn solve_discrete_ib(stats: &HistogramStats, beta: f64, cfg: &DiscreteSolverConfig) -> Result<DiscreteSolution> {
    if cfg.t_size == 0 {
        return Err(Error::Domain("t_size must be at least 1".into()));
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be nonnegative, got {beta}")));
    }
    let mut state = DiscreteIBState::random(beta, cfg.t_size, stats, cfg.seed);
    let mut best = (state.lagrangian(stats), state.clone());
    for _ in 0..cfg.max_iter {
        let next = ib_update_step(&state, stats);
        let change = encoder_change(&state, &next);
        state = next;
        let loss = state.lagrangian(stats);
        if loss < best.0 {
            best = (loss, state.clone());
        }
        if change < cfg.tol {
            let point = state.rd_point(stats);
            return Ok(DiscreteSolution { point, loss, state, converged: true });
        }
    }
    let (loss, state) = best;
    Ok(DiscreteSolution { point: state.rd_point(stats), loss, state, converged: false })
}

/// Best-of-`restarts` solve (lowest Lagrangian). Restart `r` uses seed
/// `seed + r`.
pub fn solve_with_restarts(
    stats: &HistogramStats,
    beta: f64,
    cfg: &DiscreteSolverConfig,
    restarts: usize,
) -> Result<DiscreteSolution> {
    let mut best: Option<DiscreteSolution> = None;
    for r in 0..restarts.max(1) {
        let run_cfg = DiscreteSolverConfig { seed: cfg.seed.wrapping_add(r as u64), ..*cfg };
        let sol = solve_discrete_ib(stats, beta, &run_cfg)?;
        if best.as_ref().is_none_or(|b| sol.loss < b.loss) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// A curve point with its solver flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub point: RDPoint,
    pub loss: f64,
    pub converged: bool,
}

/// Rate-distortion curve over an ascending β grid.
///
/// Each β is solved independently (in parallel) with `restarts` seeded
/// initializations; the output is sorted by rate and, when `hulled`, reduced
/// to its lower convex hull.
pub fn rd_curve_discrete(
    stats: &HistogramStats,
    beta_grid: &[f64],
    cfg: &DiscreteSolverConfig,
    restarts: usize,
    hulled: bool,
) -> Result<Vec<CurvePoint>> {
    if beta_grid.is_empty() {
        return Err(Error::Domain("beta grid is empty".into()));
    }
    if beta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("beta grid must be ascending".into()));
    }
    let mut points = beta_grid
        .par_iter()
        .map(|&beta| {
            solve_with_restarts(stats, beta, cfg, restarts)
                .map(|s| CurvePoint { point: s.point, loss: s.loss, converged: s.converged })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.point.rate.total_cmp(&b.point.rate).then(b.point.distortion.total_cmp(&a.point.distortion)));
    if hulled {
        let pairs: Vec<(f64, f64)> = points.iter().map(|c| (c.point.rate, c.point.distortion)).collect();
        points = hull::convex_hull_lower_indices(&pairs).into_iter().map(|i| points[i]).collect();
    }
    Ok(points)
}

/// Grid resolution of the brute-force oracle's encoder rows.
pub const ORACLE_STEP: f64 = 0.05;
const ORACLE_MAX_ENCODERS: u128 = 20_000_000;

/// Exhaustive search over encoders whose rows lie on the `0.05` simplex grid.
///
/// Returns, for each rate budget, the lowest distortion among grid encoders
/// with `I(H;T) ≤ budget` (as an [`RDPoint`] carrying that encoder's rate).
/// Budgets with no feasible encoder are skipped.
pub fn brute_force_rd_oracle(stats: &HistogramStats, t_size: usize, rate_budget_grid: &[f64]) -> Result<Vec<RDPoint>> {
    let nh = stats.num_histograms();
    if nh > 6 || t_size > 3 || t_size == 0 {
        return Err(Error::Size(format!("oracle supports at most 6 histograms and |T| <= 3, got {nh} and {t_size}")));
    }
    let steps = (1.0 / ORACLE_STEP).round() as u32;
    let rows = simplex_grid(t_size, steps);
    let total = (rows.len() as u128).checked_pow(nh as u32).unwrap_or(u128::MAX);
    if total > ORACLE_MAX_ENCODERS {
        return Err(Error::Size(format!("oracle would enumerate {total} encoders")));
    }
    let mut budgets: Vec<f64> = rate_budget_grid.to_vec();
    budgets.sort_by(f64::total_cmp);

    let h_x = stats.entropy_x();
    // best[i] = (distortion, rate, active) among encoders with rate in (budget[i-1], budget[i]]
    let mut best: Vec<Option<(f64, f64, usize)>> = vec![None; budgets.len()];
    let mut idx = vec![0usize; nh];
    let mut encoder = vec![rows[0].clone(); nh];
    loop {
        let (rate, relevant) = information_terms(&encoder, stats);
        let slot = budgets.partition_point(|&b| b < rate - 1e-12);
        if slot < budgets.len() {
            let d = h_x - relevant;
            let active = active_clusters(&encoder, stats);
            if best[slot].is_none_or(|(bd, _, _)| d < bd) {
                best[slot] = Some((d, rate, active));
            }
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == nh {
                return Ok(envelope(&best));
            }
            idx[pos] += 1;
            if idx[pos] < rows.len() {
                encoder[pos] = rows[idx[pos]].clone();
                break;
            }
            idx[pos] = 0;
            encoder[pos] = rows[0].clone();
            pos += 1;
        }
    }
}

fn active_clusters(encoder: &[Vec<f64>], stats: &HistogramStats) -> usize {
    let t_size = encoder[0].len();
    (0..t_size)
        .filter(|&t| encoder.iter().zip(&stats.p_h).map(|(r, ph)| r[t] * ph).sum::<f64>() > ACTIVE_MASS)
        .count()
}

fn envelope(best: &[Option<(f64, f64, usize)>]) -> Vec<RDPoint> {
    let mut out = Vec::new();
    let mut running: Option<(f64, f64, usize)> = None;
    for cell in best {
        if let Some(c) = cell {
            if running.is_none_or(|r| c.0 < r.0) {
                running = Some(*c);
            }
        }
        if let Some((d, r, a)) = running {
            out.push(RDPoint { beta: 0.0, rate: r.max(0.0), distortion: d, n_active: a });
        }
    }
    out
}

/// All probability vectors of length `n` with entries in multiples of `1/steps`.
fn simplex_grid(n: usize, steps: u32) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut counts = vec![0u32; n];
    fn rec(counts: &mut [u32], pos: usize, remaining: u32, steps: u32, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == counts.len() {
            counts[pos] = remaining;
            out.push(counts.iter().map(|&c| c as f64 / steps as f64).collect());
            return;
        }
        for c in 0..=remaining {
            counts[pos] = c;
            rec(counts, pos + 1, remaining - c, steps, out);
        }
    }
    rec(&mut counts, 0, steps, steps, &mut out);
    out
}
