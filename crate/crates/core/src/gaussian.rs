//! Batch Gaussian information bottleneck on the sample-mean statistic.
//!
//! With `T = A S̄_k + Z`, the optimal rows of `A` are scaled left
//! eigenvectors of `Σ_{S̄|X} Σ_{S̄}⁻¹`. A component `i` switches on once β
//! exceeds its critical value `1/(1−λ_i)`, and the curve is parametric in β:
//!
//! ```text
//! R(β) = ½ Σ_{i≤n(β)} log((β−1)(1−λ_i)/λ_i)
//! D(β) = ½ Σ_{i≤n(β)} log(λ_i β/(β−1)) + h(X)
//! ```
//!
//! [`BottleneckSpectrum`] holds the eigen-solution of one such problem and is
//! shared with the streaming solvers, which solve the same problem on
//! conditional covariances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{gaussian_entropy, GaussianModel, RDPoint};

/// Lowest β searched by rate inversion.
pub const BETA_FLOOR: f64 = 1.0 + 1e-9;
/// Highest β searched by rate inversion.
pub const BETA_CEIL: f64 = 1e9;

/// Eigen-solution of a Gaussian bottleneck `source → T` with relevance
/// variable `X`: `Σ_{S|X} v = λ Σ_S v`.
#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckSpectrum {
    /// `Σ_S`, the covariance of the compressed source.
    pub source_cov: Matrix,
    /// `Σ_{S|X}`.
    pub source_cov_given_x: Matrix,
    /// Ascending, clamped to `[0, 1]`.
    pub eigenvalues: Vec<f64>,
    /// Left eigenvectors of `Σ_{S|X} Σ_S⁻¹`, unit norm.
    pub eigenvectors: Vec<Vector>,
}

impl BottleneckSpectrum {
    pub fn new(source_cov: Matrix, source_cov_given_x: Matrix) -> Result<Self> {
        let (values, eigenvectors) = linalg::generalized_eigen(&source_cov_given_x, &source_cov)?;
        if values.iter().any(|&l| !(-1e-9..=1.0 + 1e-9).contains(&l)) {
            return Err(domain(format!("bottleneck eigenvalues outside [0, 1]: {values:?}")));
        }
        let eigenvalues = values.into_iter().map(|l| l.clamp(0.0, 1.0)).collect();
        Ok(Self { source_cov, source_cov_given_x, eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `1/(1−λ_i)`, ascending; `+∞` for `λ_i = 1`.
    pub fn critical_betas(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|&l| if l < 1.0 { 1.0 / (1.0 - l) } else { f64::INFINITY })
            .collect()
    }

    /// `n(β) = #{i : β_ci < β}`, with critical values within a relative
    /// `1e-12` of `β` counted as inactive.
    pub fn n_active(&self, beta: f64) -> usize {
        self.critical_betas().iter().filter(|&&b| b * (1.0 + 1e-12) < beta).count()
    }

    /// Row scales `α_i` of the retained components.
    pub fn alphas(&self, beta: f64) -> Vec<f64> {
        (0..self.n_active(beta))
            .map(|i| {
                let lam = self.eigenvalues[i];
                let v = &self.eigenvectors[i];
                let num = beta * (1.0 - lam) - 1.0;
                assert!(num >= 0.0 && lam > 0.0, "retained component {i} has invalid scale (λ={lam}, β={beta})");
                let quad = (v.transpose() * &self.source_cov * v)[(0, 0)];
                (num / (lam * quad)).sqrt()
            })
            .collect()
    }

    /// `n(β) × d` projection with rows `α_i v_iᵀ`.
    pub fn projection(&self, beta: f64) -> Matrix {
        let alphas = self.alphas(beta);
        let d = self.dim();
        let mut a = Matrix::zeros(alphas.len(), d);
        for (i, alpha) in alphas.iter().enumerate() {
            a.row_mut(i).copy_from(&(self.eigenvectors[i].transpose() * *alpha));
        }
        a
    }

    /// `½ Σ log((β−1)(1−λ_i)/λ_i)` over retained components.
    pub fn rate(&self, beta: f64) -> f64 {
        (0..self.n_active(beta))
            .map(|i| {
                let l = self.eigenvalues[i];
                0.5 * ((beta - 1.0) * (1.0 - l) / l).ln()
            })
            .sum::<f64>()
            .max(0.0)
    }

    /// `½ Σ log(λ_i β/(β−1))` over retained components; the (nonpositive)
    /// change in `h(X|·)` contributed by the new feature.
    pub fn distortion_change(&self, beta: f64) -> f64 {
        (0..self.n_active(beta))
            .map(|i| 0.5 * (self.eigenvalues[i] * beta / (beta - 1.0)).ln())
            .sum::<f64>()
            .min(0.0)
    }

    /// Largest achievable rate inside the search window.
    pub fn max_rate(&self) -> f64 {
        self.rate(BETA_CEIL)
    }

    /// Smallest β whose rate is within `tol` of `target` (bisection in
    /// `log(β−1)`). Returns the β and whether the target was reachable.
    pub fn beta_for_rate(&self, target: f64, tol: f64) -> (f64, bool) {
        let first = self.critical_betas().first().copied().unwrap_or(f64::INFINITY);
        if target <= 0.0 {
            return (first.min(BETA_CEIL), true);
        }
        if self.max_rate() < target - tol {
            return (BETA_CEIL, false);
        }
        let mut lo = first.clamp(BETA_FLOOR, BETA_CEIL);
        let mut hi = BETA_CEIL;
        for _ in 0..400 {
            let mid = 1.0 + ((lo - 1.0).ln() * 0.5 + (hi - 1.0).ln() * 0.5).exp();
            let r = self.rate(mid);
            if (r - target).abs() <= tol * 0.5 {
                return (mid, true);
            }
            if r < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        (hi, (self.rate(hi) - target).abs() <= tol)
    }
}

/// Spectrum of the batch problem together with the displayed matrix `K`.
#[derive(Debug, Clone)]
pub struct BatchSpectrum {
    /// `(Σx+Σθ)/k + ((k−1)/k) Σθ − Σθ(Σx+Σθ)⁻¹Σθ`.
    pub k_matrix: Matrix,
    pub spectrum: BottleneckSpectrum,
}

/// Builds `K = Σ_{S̄_k|X}` and solves `K v = λ Σ_{S̄_k} v`.
pub fn batch_bottleneck_matrix(model: &GaussianModel, k: usize) -> Result<BatchSpectrum> {
    if k == 0 {
        return Err(domain("batch bottleneck needs k >= 1"));
    }
    let kf = k as f64;
    let sx = model.sigma_x();
    let st = model.sigma_theta();
    let test_inv = linalg::spd_inverse(&model.sigma_test())?;
    let k_matrix = linalg::symmetrize(&((sx + st) / kf + st * ((kf - 1.0) / kf) - st * test_inv * st));
    let conditional = model.sample_mean_cov_given_test(k)?;
    let scale = 1.0 + conditional.amax();
    if (&k_matrix - &conditional).amax() > 1e-10 * scale {
        return Err(domain("bottleneck matrix disagrees with Σ_{S̄|X}"));
    }
    let spectrum = BottleneckSpectrum::new(model.sample_mean_cov(k), k_matrix.clone())?;
    Ok(BatchSpectrum { k_matrix, spectrum })
}

/// Projection and spectrum at one β.
#[derive(Debug, Clone)]
pub struct GIBSolution {
    /// `r × d` projection.
    pub a_matrix: Matrix,
    /// `r × r` noise covariance.
    pub sigma_z: Matrix,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vector>,
    pub critical_betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub beta: f64,
    pub n_active: usize,
}

/// Closed-form point on the batch rate-distortion curve.
pub fn closed_form_rd(model: &GaussianModel, k: usize, beta: f64) -> Result<(RDPoint, GIBSolution)> {
    if !(beta > 0.0) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    let batch = batch_bottleneck_matrix(model, k)?;
    let h_x = gaussian_entropy(&model.sigma_test())?;
    Ok(closed_form_from_spectrum(&batch.spectrum, h_x, beta))
}

pub(crate) fn closed_form_from_spectrum(spec: &BottleneckSpectrum, h_x: f64, beta: f64) -> (RDPoint, GIBSolution) {
    let n = spec.n_active(beta);
    let a_matrix = spec.projection(beta);
    let point = RDPoint {
        beta,
        rate: spec.rate(beta),
        distortion: h_x + spec.distortion_change(beta),
        n_active: n,
    };
    let sol = GIBSolution {
        sigma_z: Matrix::identity(n, n),
        a_matrix,
        eigenvalues: spec.eigenvalues.clone(),
        eigenvectors: spec.eigenvectors.clone(),
        critical_betas: spec.critical_betas(),
        alphas: spec.alphas(beta),
        beta,
        n_active: n,
    };
    (point, sol)
}

/// `h(X|T)` for `T = A S̄_k + Z`, `Z ~ N(0, Σ_Z)`, by joint-Gaussian
/// conditioning.
pub fn distortion_from_projection(model: &GaussianModel, k: usize, a_matrix: &Matrix, sigma_z: &Matrix) -> Result<f64> {
    let d = model.dim();
    if a_matrix.ncols() != d || sigma_z.nrows() != a_matrix.nrows() || sigma_z.ncols() != a_matrix.nrows() {
        return Err(domain("projection and noise dimensions do not match the model"));
    }
    let var_t = linalg::symmetrize(&(a_matrix * model.sample_mean_cov(k) * a_matrix.transpose() + sigma_z));
    let cov_xt = model.sigma_theta() * a_matrix.transpose();
    let cond = linalg::schur_complement(&model.sigma_test(), &cov_xt, &var_t)?;
    gaussian_entropy(&cond)
}

/// `I(S̄_k; T) = ½ log det(A Σ_{S̄_k} Aᵀ + Σ_Z) − ½ log det Σ_Z`.
pub fn rate_from_projection(model: &GaussianModel, k: usize, a_matrix: &Matrix, sigma_z: &Matrix) -> Result<f64> {
    if a_matrix.nrows() == 0 {
        return Ok(0.0);
    }
    let var_t = linalg::symmetrize(&(a_matrix * model.sample_mean_cov(k) * a_matrix.transpose() + sigma_z));
    Ok(0.5 * (linalg::log_det_spd(&var_t)? - linalg::log_det_spd(sigma_z)?))
}

/// Settings for [`iterative_gib`].
#[derive(Debug, Clone, Copy)]
pub struct IterativeConfig {
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl IterativeConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, tol: 1e-10, max_iter: 5000 }
    }
}

#[derive(Debug, Clone)]
pub struct IterativeOutcome {
    pub solution: GIBSolution,
    pub point: RDPoint,
    pub converged: bool,
    pub iterations: usize,
}

const MAX_DAMPING: usize = 20;

/// Fixed-point iteration for the Gaussian bottleneck:
///
/// ```text
/// Σ_Z ← (β Σ_{t|x}⁻¹ − (β−1) Σ_t⁻¹)⁻¹
/// A   ← β Σ_Z Σ_{t|x}⁻¹ A (I − Σ_{S̄|X} Σ_{S̄}⁻¹)
/// ```
///
/// starting from a seeded standard-normal `d × d` matrix and `Σ_Z = I`.
/// A non-PD noise update is damped toward the previous iterate.
pub fn iterative_gib(model: &GaussianModel, k: usize, beta: f64, cfg: &IterativeConfig) -> Result<IterativeOutcome> {
    if !(beta > 1.0) {
        return Err(domain(format!("iterative solver needs beta > 1, got {beta}")));
    }
    let d = model.dim();
    let batch = batch_bottleneck_matrix(model, k)?;
    let sigma_s = model.sample_mean_cov(k);
    let sigma_s_x = &batch.k_matrix;
    let shrink = Matrix::identity(d, d) - sigma_s_x * linalg::spd_inverse(&sigma_s)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let mut sigma_z = Matrix::identity(d, d);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.max_iter {
        iterations = it + 1;
        let var_t = linalg::symmetrize(&(&a * &sigma_s * a.transpose() + &sigma_z));
        let var_t_x = linalg::symmetrize(&(&a * sigma_s_x * a.transpose() + &sigma_z));
        let inv_t = linalg::spd_inverse(&var_t)?;
        let inv_t_x = linalg::spd_inverse(&var_t_x)?;
        let precision = linalg::symmetrize(&(&inv_t_x * beta - inv_t * (beta - 1.0)));

        let mut new_z = linalg::spd_inverse(&precision).ok().map(|m| linalg::symmetrize(&m));
        let mut tries = 0;
        while new_z.as_ref().is_none_or(|z| linalg::cholesky(z).is_err()) {
            tries += 1;
            if tries > MAX_DAMPING {
                break;
            }
            let candidate = new_z.unwrap_or_else(|| sigma_z.clone());
            new_z = Some((candidate + &sigma_z) * 0.5);
        }
        let Some(new_z) = new_z.filter(|z| linalg::cholesky(z).is_ok()) else {
            log::warn!("noise covariance update stayed indefinite after {MAX_DAMPING} dampings");
            break;
        };
        let new_a = &new_z * &inv_t_x * &a * &shrink * beta;
        let change = (&new_a - &a).amax();
        a = new_a;
        sigma_z = new_z;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    let rate = rate_from_projection(model, k, &a, &sigma_z)?;
    let distortion = distortion_from_projection(model, k, &a, &sigma_z)?;
    let spec = &batch.spectrum;
    let n_active = spec.n_active(beta);
    let point = RDPoint { beta, rate, distortion, n_active };
    let solution = GIBSolution {
        a_matrix: a,
        sigma_z,
        eigenvalues: spec.eigenvalues.clone(),
        eigenvectors: spec.eigenvectors.clone(),
        critical_betas: spec.critical_betas(),
        alphas: spec.alphas(beta),
        beta,
        n_active,
    };
    Ok(IterativeOutcome { solution, point, converged, iterations })
}

/// Closed-form curve over an ascending β grid.
pub fn rd_curve_gaussian(model: &GaussianModel, k: usize, beta_grid: &[f64]) -> Result<Vec<RDPoint>> {
    if beta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("beta grid must be ascending".into()));
    }
    let batch = batch_bottleneck_matrix(model, k)?;
    let h_x = gaussian_entropy(&model.sigma_test())?;
    Ok(beta_grid
        .par_iter()
        .map(|&b| closed_form_from_spectrum(&batch.spectrum, h_x, b).0)
        .collect())
}

/// Distortion at an exact rate on the batch curve (rate inverted by
/// bisection on β). Returns `(β, D)`.
pub fn distortion_at_rate(model: &GaussianModel, k: usize, rate: f64, tol: f64) -> Result<(f64, f64)> {
    let batch = batch_bottleneck_matrix(model, k)?;
    let h_x = gaussian_entropy(&model.sigma_test())?;
    let (beta, _) = batch.spectrum.beta_for_rate(rate, tol);
    Ok((beta, h_x + batch.spectrum.distortion_change(beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::entropy_triple;
    use approx::assert_relative_eq;

    fn unit() -> GaussianModel {
        GaussianModel::scalar(1.0, 1.0).unwrap()
    }

    #[test]
    fn scalar_spectrum_k1_and_k4() {
        let b1 = batch_bottleneck_matrix(&unit(), 1).unwrap();
        assert_relative_eq!(b1.k_matrix[(0, 0)], 1.5, epsilon = 1e-15);
        assert_relative_eq!(b1.spectrum.eigenvalues[0], 0.75, epsilon = 1e-12);
        assert_relative_eq!(b1.spectrum.critical_betas()[0], 4.0, epsilon = 1e-12);
        let b4 = batch_bottleneck_matrix(&unit(), 4).unwrap();
        assert_relative_eq!(b4.k_matrix[(0, 0)], 0.75, epsilon = 1e-15);
        assert_relative_eq!(b4.spectrum.eigenvalues[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(b4.spectrum.critical_betas()[0], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_prior_pushes_eigenvalues_to_one() {
        let m = GaussianModel::new(Matrix::identity(3, 3), Matrix::identity(3, 3) * 1e-9).unwrap();
        let b = batch_bottleneck_matrix(&m, 5).unwrap();
        assert!(b.spectrum.eigenvalues.iter().all(|&l| l > 1.0 - 1e-7));
    }

    #[test]
    fn scalar_closed_form_at_beta_eight() {
        let (p, sol) = closed_form_rd(&unit(), 1, 8.0).unwrap();
        assert_relative_eq!(p.rate, 0.5 * (7.0f64 / 3.0).ln(), epsilon = 1e-12);
        let h_x = entropy_triple(&unit(), 1).unwrap().h_x;
        assert_relative_eq!(p.distortion, h_x + 0.5 * (6.0f64 / 7.0).ln(), epsilon = 1e-12);
        assert_relative_eq!(p.distortion - h_x, -0.07705, epsilon = 5e-5);
        let cross = distortion_from_projection(&unit(), 1, &sol.a_matrix, &sol.sigma_z).unwrap();
        assert_relative_eq!(cross, p.distortion, epsilon = 1e-12);
    }

    #[test]
    fn below_critical_beta_is_zero_rate() {
        let h_x = entropy_triple(&unit(), 1).unwrap().h_x;
        for beta in [0.5, 1.0, 3.0, 4.0] {
            let (p, sol) = closed_form_rd(&unit(), 1, beta).unwrap();
            assert!(p.rate.abs() < 1e-12);
            assert_relative_eq!(p.distortion, h_x, epsilon = 1e-12);
            assert_eq!(sol.a_matrix.nrows(), 0);
        }
    }

    #[test]
    fn large_beta_reaches_conditional_entropy() {
        let (p, _) = closed_form_rd(&unit(), 1, 1e9).unwrap();
        let t = entropy_triple(&unit(), 1).unwrap();
        assert!((p.distortion - t.h_x_given_data).abs() < 1e-8);
    }

    #[test]
    fn zero_projection_gives_prior_entropy() {
        let m = GaussianModel::random(3, 2).unwrap();
        let h = distortion_from_projection(&m, 5, &Matrix::zeros(3, 3), &Matrix::identity(3, 3)).unwrap();
        assert_relative_eq!(h, entropy_triple(&m, 5).unwrap().h_x, epsilon = 1e-12);
    }

    #[test]
    fn nearly_noiseless_identity_projection() {
        let m = GaussianModel::random(3, 2).unwrap();
        let h = distortion_from_projection(&m, 5, &Matrix::identity(3, 3), &(Matrix::identity(3, 3) * 1e-8)).unwrap();
        assert!((h - entropy_triple(&m, 5).unwrap().h_x_given_data).abs() < 1e-3);
    }

    #[test]
    fn iterative_matches_closed_form_scalar() {
        let it = iterative_gib(&unit(), 1, 8.0, &IterativeConfig::new(3)).unwrap();
        let (p, _) = closed_form_rd(&unit(), 1, 8.0).unwrap();
        assert!(it.converged);
        assert!((it.point.rate - p.rate).abs() < 1e-6);
        assert!((it.point.distortion - p.distortion).abs() < 1e-6);
    }

    #[test]
    fn iterative_below_threshold_collapses() {
        let it = iterative_gib(&unit(), 1, 3.0, &IterativeConfig::new(3)).unwrap();
        let h_x = entropy_triple(&unit(), 1).unwrap().h_x;
        assert!(it.point.rate < 1e-8);
        assert!((it.point.distortion - h_x).abs() < 1e-8);
    }

    #[test]
    fn iterative_matches_closed_form_d6() {
        let m = GaussianModel::random(6, 0).unwrap();
        let it = iterative_gib(&m, 20, 50.0, &IterativeConfig { max_iter: 100_000, ..IterativeConfig::new(0) }).unwrap();
        let (p, _) = closed_form_rd(&m, 20, 50.0).unwrap();
        assert!((it.point.rate - p.rate).abs() < 1e-5, "{} vs {}", it.point.rate, p.rate);
        assert!((it.point.distortion - p.distortion).abs() < 1e-5);
    }

    #[test]
    fn rate_inversion_round_trip() {
        let b = batch_bottleneck_matrix(&unit(), 1).unwrap();
        let target = b.spectrum.rate(8.0);
        let (beta, ok) = b.spectrum.beta_for_rate(target, 1e-12);
        assert!(ok);
        assert!((beta - 8.0).abs() < 1e-6);
        assert_relative_eq!(b.spectrum.beta_for_rate(0.0, 1e-8).0, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn curve_threshold_point() {
        let b = batch_bottleneck_matrix(&unit(), 1).unwrap();
        let bc = b.spectrum.critical_betas()[0];
        let curve = rd_curve_gaussian(&unit(), 1, &[bc * (1.0 + 1e-9)]).unwrap();
        assert_eq!(curve.len(), 1);
        assert!(curve[0].rate < 1e-8);
    }
}
