//! Probabilistic models and the covariance/entropy algebra shared by every
//! solver.
//!
//! The Gaussian source is `p(x|θ) = N(θ, Σx)` with prior `p(θ) = N(0, Σθ)`;
//! a training set of `k` i.i.d. draws is summarized by its sample mean. The
//! discrete source is a finite family `p(x|θ)` over a finite alphabet with a
//! prior over finitely many parameter points; a training set is summarized by
//! its histogram. All entropies are in nats.

use std::f64::consts::{E, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{self, Matrix};

const SYMMETRY_TOL: f64 = 1e-10;
const STOCHASTIC_TOL: f64 = 1e-12;

/// Jointly Gaussian source: `x | θ ~ N(θ, Σx)`, `θ ~ N(0, Σθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    sigma_x: Matrix,
    sigma_theta: Matrix,
}

impl GaussianModel {
    pub fn new(sigma_x: Matrix, sigma_theta: Matrix) -> Result<Self> {
        let d = sigma_x.nrows();
        if d == 0 || !sigma_x.is_square() || sigma_theta.shape() != (d, d) {
            return Err(domain("covariances must be nonempty, square and of equal size"));
        }
        for (name, m) in [("sigma_x", &sigma_x), ("sigma_theta", &sigma_theta)] {
            if linalg::asymmetry(m) > SYMMETRY_TOL {
                return Err(domain(format!("{name} is not symmetric")));
            }
            if linalg::cholesky(m).is_err() || linalg::min_eigenvalue(m) <= 0.0 {
                return Err(domain(format!("{name} is not positive definite")));
            }
        }
        Ok(Self { sigma_x, sigma_theta })
    }

    /// One-dimensional model with the given variances.
    pub fn scalar(var_x: f64, var_theta: f64) -> Result<Self> {
        Self::new(Matrix::from_element(1, 1, var_x), Matrix::from_element(1, 1, var_theta))
    }

    /// Model with both covariances drawn by [`make_random_spd`]; `Σx` uses
    /// seed `2·seed` and `Σθ` uses `2·seed + 1`.
    pub fn random(d: usize, seed: u64) -> Result<Self> {
        let sx = make_random_spd(d, seed.wrapping_mul(2));
        let st = make_random_spd(d, seed.wrapping_mul(2).wrapping_add(1));
        Self::new(sx, st)
    }

    pub fn dim(&self) -> usize {
        self.sigma_x.nrows()
    }

    pub fn sigma_x(&self) -> &Matrix {
        &self.sigma_x
    }

    pub fn sigma_theta(&self) -> &Matrix {
        &self.sigma_theta
    }

    /// `Var(X) = Σx + Σθ` of a fresh test point.
    pub fn sigma_test(&self) -> Matrix {
        &self.sigma_x + &self.sigma_theta
    }

    /// `Var(S̄_k) = Σx/k + Σθ` of the sample mean of `k ≥ 1` draws.
    pub fn sample_mean_cov(&self, k: usize) -> Matrix {
        assert!(k >= 1, "sample mean needs at least one sample");
        &self.sigma_x / k as f64 + &self.sigma_theta
    }

    /// `Var(S̄_k | X) = Σ_{S̄_k} − Σθ (Σx + Σθ)⁻¹ Σθ`.
    pub fn sample_mean_cov_given_test(&self, k: usize) -> Result<Matrix> {
        linalg::schur_complement(&self.sample_mean_cov(k), &self.sigma_theta, &self.sigma_test())
    }
}

/// Seeded random covariance: symmetrized standard-normal matrix, shifted by
/// `(|λ_min| + 0.1)·I` whenever `λ_min ≤ 0.1`.
pub fn make_random_spd(d: usize, seed: u64) -> Matrix {
    assert!(d >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let mut m = Matrix::from_fn(d, d, |i, j| (g[(i, j)] + g[(j, i)]) / 2.0);
    let lmin = linalg::min_eigenvalue(&m);
    if lmin <= 0.1 {
        let shift = lmin.abs() + 0.1;
        for i in 0..d {
            m[(i, i)] += shift;
        }
    }
    m
}

/// Differential entropy `½ log det(2πe Σ)` in nats.
pub fn gaussian_entropy(sigma: &Matrix) -> Result<f64> {
    if linalg::asymmetry(sigma) > SYMMETRY_TOL * (1.0 + sigma.amax()) {
        return Err(domain("covariance is not symmetric"));
    }
    let d = sigma.nrows() as f64;
    Ok(0.5 * (d * (2.0 * PI * E).ln() + linalg::log_det_spd(sigma)?))
}

/// Posterior covariance of θ after `k` samples: `(Σθ⁻¹ + k Σx⁻¹)⁻¹`.
pub fn posterior_theta_cov(model: &GaussianModel, k: usize) -> Result<Matrix> {
    if k == 0 {
        return Ok(model.sigma_theta.clone());
    }
    let precision = linalg::spd_inverse(&model.sigma_theta)? + linalg::spd_inverse(&model.sigma_x)? * k as f64;
    Ok(linalg::symmetrize(&linalg::spd_inverse(&precision)?))
}

/// `(h(X), h(X|X^k), h(X|θ))` in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyTriple {
    pub h_x: f64,
    pub h_x_given_data: f64,
    pub h_x_given_theta: f64,
}

pub fn entropy_triple(model: &GaussianModel, k: usize) -> Result<EntropyTriple> {
    let h_x = gaussian_entropy(&model.sigma_test())?;
    let h_x_given_theta = gaussian_entropy(&model.sigma_x)?;
    let h_x_given_data = gaussian_entropy(&(&model.sigma_x + posterior_theta_cov(model, k)?))?;
    Ok(EntropyTriple { h_x, h_x_given_data, h_x_given_theta })
}

/// Joint covariance of the running sample means `(S̄_1, …, S̄_l)`; block
/// `(i, j)` is `Σθ + Σx / max(i, j)`.
pub fn sample_mean_joint_cov(model: &GaussianModel, rounds: usize) -> Matrix {
    assert!(rounds >= 1, "need at least one round");
    let d = model.dim();
    let mut out = Matrix::zeros(rounds * d, rounds * d);
    for i in 1..=rounds {
        for j in 1..=rounds {
            let block = &model.sigma_theta + &model.sigma_x / i.max(j) as f64;
            out.view_mut(((i - 1) * d, (j - 1) * d), (d, d)).copy_from(&block);
        }
    }
    out
}

/// Entropies needed by [`rd_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceEntropies {
    /// `H(X)` (or `h(X)` for continuous sources).
    pub h_x: f64,
    /// `(H(θ), |X|)` for discrete sources; `None` for continuous ones.
    pub discrete: Option<(f64, usize)>,
}

/// Outer bounds on the rate achieving distortion `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBounds {
    pub lower: f64,
    /// `H(θ) + log|X| − D`; unavailable for continuous sources.
    pub upper: Option<f64>,
}

/// `H(X) − D ≤ R(D) ≤ H(θ) + log|X| − D`.
pub fn rd_bounds(entropies: &SourceEntropies, distortion: f64) -> RateBounds {
    RateBounds {
        lower: entropies.h_x - distortion,
        upper: entropies
            .discrete
            .map(|(h_theta, alphabet)| h_theta + (alphabet as f64).ln() - distortion),
    }
}

/// Finite parametric family over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFamily {
    alphabet_size: usize,
    params: Vec<Vec<f64>>,
    prior: Vec<f64>,
    likelihood: Vec<Vec<f64>>,
}

impl DiscreteFamily {
    pub fn new(params: Vec<Vec<f64>>, prior: Vec<f64>, likelihood: Vec<Vec<f64>>) -> Result<Self> {
        let m = prior.len();
        if m == 0 || likelihood.len() != m || params.len() != m {
            return Err(domain("prior, params and likelihood must have one entry per parameter point"));
        }
        let alphabet_size = likelihood[0].len();
        if alphabet_size == 0 {
            return Err(domain("alphabet must be nonempty"));
        }
        check_distribution("prior", &prior)?;
        for (i, row) in likelihood.iter().enumerate() {
            if row.len() != alphabet_size {
                return Err(domain(format!("likelihood row {i} has the wrong length")));
            }
            check_distribution(&format!("likelihood row {i}"), row)?;
        }
        Ok(Self { alphabet_size, params, prior, likelihood })
    }

    /// Bernoulli family `p(x=1|θ) = θ` over the alphabet `{0, 1}`.
    pub fn bernoulli(thetas: &[f64], prior: Vec<f64>) -> Result<Self> {
        let likelihood = thetas.iter().map(|&t| vec![1.0 - t, t]).collect();
        Self::new(thetas.iter().map(|&t| vec![t]).collect(), prior, likelihood)
    }

    /// Bernoulli family with a uniform prior on `[0, 1]`, discretized to
    /// `grid_points` equally spaced values with trapezoid weights.
    pub fn bernoulli_uniform(grid_points: usize) -> Result<Self> {
        if grid_points < 2 {
            return Err(domain("uniform grid needs at least two points"));
        }
        let n = grid_points - 1;
        let thetas: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let mut prior: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { 0.5 } else { 1.0 }).collect();
        let total: f64 = prior.iter().sum();
        prior.iter_mut().for_each(|w| *w /= total);
        Self::bernoulli(&thetas, prior)
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn num_params(&self) -> usize {
        self.prior.len()
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn likelihood(&self) -> &[Vec<f64>] {
        &self.likelihood
    }

    /// Prior predictive `p(x) = Σ_θ p(θ) p(x|θ)`.
    pub fn predictive(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.alphabet_size];
        for (w, row) in self.prior.iter().zip(&self.likelihood) {
            for (px, l) in p.iter_mut().zip(row) {
                *px += w * l;
            }
        }
        p
    }

    /// `H(X)` of a fresh draw.
    pub fn entropy_x(&self) -> f64 {
        shannon_entropy(&self.predictive())
    }

    /// `H(X|θ)`.
    pub fn entropy_x_given_theta(&self) -> f64 {
        self.prior.iter().zip(&self.likelihood).map(|(w, row)| w * shannon_entropy(row)).sum()
    }

    /// `H(θ)` of the (discrete) prior.
    pub fn entropy_theta(&self) -> f64 {
        shannon_entropy(&self.prior)
    }
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(domain(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(domain(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Count vector of a discrete sample; the sufficient statistic for θ.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u32>,
}

impl Histogram {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    /// Checks the stored counts against an expected sample size.
    pub fn with_total(counts: Vec<u32>, k: u32) -> Result<Self> {
        let h = Self { counts };
        if h.k() != k {
            return Err(Error::Domain(format!("histogram counts sum to {}, expected {k}", h.k())));
        }
        Ok(h)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn k(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// One point on a rate-distortion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RDPoint {
    pub beta: f64,
    /// Nats.
    pub rate: f64,
    /// Cross-entropy loss in nats.
    pub distortion: f64,
    pub n_active: usize,
}
