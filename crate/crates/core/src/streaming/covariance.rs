use crate::error::{domain, Result};
use crate::linalg::{self, Matrix};
use crate::model::{gaussian_entropy, GaussianModel};

/// Round-`k` source covariances given a set of emitted features.
#[derive(Debug, Clone)]
pub struct ConditionalCovariances {
    /// `Σ_{S̄_k | T}`.
    pub source: Matrix,
    /// `Σ_{S̄_k | X, T}`.
    pub source_given_x: Matrix,
    /// `Σ_{X | T}`.
    pub test: Matrix,
}

impl ConditionalCovariances {
    /// `I(S̄_k; A S̄_k + Z | T)`.
    pub fn rate(&self, a: &Matrix) -> Result<f64> {
        half_log_det_plus_identity(a, &self.source)
    }

    /// `I(X; A S̄_k + Z | T)`.
    pub fn relevant_information(&self, a: &Matrix) -> Result<f64> {
        Ok(half_log_det_plus_identity(a, &self.source)? - half_log_det_plus_identity(a, &self.source_given_x)?)
    }

    /// Round objective `I(S̄_k;T_k|T) − β I(X;T_k|T)`.
    pub fn lagrangian(&self, a: &Matrix, beta: f64) -> Result<f64> {
        Ok(self.rate(a)? - beta * self.relevant_information(a)?)
    }

    pub fn test_entropy(&self) -> Result<f64> {
        gaussian_entropy(&self.test)
    }
}

/// `½ log det(A Σ Aᵀ + I)`; zero for an empty projection.
pub(crate) fn half_log_det_plus_identity(a: &Matrix, sigma: &Matrix) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let m = linalg::symmetrize(&(a * sigma * a.transpose())) + Matrix::identity(a.nrows(), a.nrows());
    Ok(0.5 * linalg::log_det_spd(&m)?)
}

fn mean_block(model: &GaussianModel, i: usize, j: usize) -> Matrix {
    model.sigma_theta() + model.sigma_x() / i.max(j) as f64
}

/// Covariances of round `k`'s sample mean conditioned on the features of the
/// listed rounds, each given as `(round index, A_l)`.
pub fn conditional_on_rounds(model: &GaussianModel, k: usize, rounds: &[(usize, &Matrix)]) -> Result<ConditionalCovariances> {
    if k == 0 {
        return Err(domain("rounds are numbered from 1"));
    }
    let d = model.dim();
    let rounds: Vec<(usize, &Matrix)> = rounds.iter().copied().filter(|(_, a)| a.nrows() > 0).collect();
    for (l, a) in &rounds {
        if *l == 0 || a.ncols() != d {
            return Err(domain(format!("round {l} projection must have {d} columns")));
        }
    }
    let offsets: Vec<usize> = rounds
        .iter()
        .scan(0, |acc, (_, a)| {
            let o = *acc;
            *acc += a.nrows();
            Some(o)
        })
        .collect();
    let n: usize = rounds.iter().map(|(_, a)| a.nrows()).sum();

    let mut var_t = Matrix::identity(n, n);
    let mut cov_st = Matrix::zeros(d, n);
    let mut cov_xt = Matrix::zeros(d, n);
    for (p, (l, a)) in rounds.iter().enumerate() {
        let r = a.nrows();
        cov_st.view_mut((0, offsets[p]), (d, r)).copy_from(&(mean_block(model, k, *l) * a.transpose()));
        cov_xt.view_mut((0, offsets[p]), (d, r)).copy_from(&(model.sigma_theta() * a.transpose()));
        for (q, (m, b)) in rounds.iter().enumerate() {
            let block = *a * mean_block(model, *l, *m) * b.transpose();
            let mut view = var_t.view_mut((offsets[p], offsets[q]), (r, b.nrows()));
            view += block;
        }
    }
    let var_t = linalg::symmetrize(&var_t);

    let var_s = model.sample_mean_cov(k);
    let source = linalg::symmetrize(&linalg::schur_complement(&var_s, &cov_st, &var_t)?);

    let var_x = model.sigma_test();
    let mut var_w = Matrix::zeros(d + n, d + n);
    var_w.view_mut((0, 0), (d, d)).copy_from(&var_x);
    var_w.view_mut((0, d), (d, n)).copy_from(&cov_xt);
    var_w.view_mut((d, 0), (n, d)).copy_from(&cov_xt.transpose());
    var_w.view_mut((d, d), (n, n)).copy_from(&var_t);
    let mut cov_sw = Matrix::zeros(d, d + n);
    cov_sw.view_mut((0, 0), (d, d)).copy_from(model.sigma_theta());
    cov_sw.view_mut((0, d), (d, n)).copy_from(&cov_st);
    let source_given_x = linalg::symmetrize(&linalg::schur_complement(&var_s, &cov_sw, &var_w)?);

    let test = linalg::symmetrize(&linalg::schur_complement(&var_x, &cov_xt, &var_t)?);
    Ok(ConditionalCovariances { source, source_given_x, test })
}

/// Round-`k` covariances given the features of rounds `1..k` held in `blocks`
/// (`blocks[l-1] = A_l`), by Schur complements on the stacked history.
pub fn conditional_covariances(model: &GaussianModel, k: usize, blocks: &[Matrix]) -> Result<ConditionalCovariances> {
    if k == 0 || blocks.len() + 1 < k {
        return Err(domain(format!("round {k} needs projections for rounds 1..{}", k.saturating_sub(1))));
    }
    let history: Vec<(usize, &Matrix)> = blocks[..k - 1].iter().enumerate().map(|(i, a)| (i + 1, a)).collect();
    conditional_on_rounds(model, k, &history)
}

/// Covariance of `(X, S̄_1, …, S̄_K, T_1, …, T_K)` for projections `blocks`.
pub fn stream_joint_cov(model: &GaussianModel, blocks: &[Matrix]) -> Matrix {
    let d = model.dim();
    let k = blocks.len();
    let n: usize = blocks.iter().map(|a| a.nrows()).sum();
    let dim = d + k * d + n;
    let mut base = Matrix::zeros(d + k * d, d + k * d);
    base.view_mut((0, 0), (d, d)).copy_from(&model.sigma_test());
    for i in 1..=k {
        let oi = d + (i - 1) * d;
        base.view_mut((0, oi), (d, d)).copy_from(model.sigma_theta());
        base.view_mut((oi, 0), (d, d)).copy_from(model.sigma_theta());
        for j in 1..=k {
            let oj = d + (j - 1) * d;
            base.view_mut((oi, oj), (d, d)).copy_from(&mean_block(model, i, j));
        }
    }
    let mut lift = Matrix::zeros(dim, d + k * d);
    lift.view_mut((0, 0), (d + k * d, d + k * d)).fill_with_identity();
    let mut row = d + k * d;
    for (i, a) in blocks.iter().enumerate() {
        lift.view_mut((row, d + i * d), (a.nrows(), d)).copy_from(a);
        row += a.nrows();
    }
    let mut out = &lift * base * lift.transpose();
    for i in d + k * d..dim {
        out[(i, i)] += 1.0;
    }
    linalg::symmetrize(&out)
}

/// Recursive form of the same conditioning: a Gaussian filter over the state
/// `(θ, S̄_k)`, observed through `T_k = [0 A_k] (θ, S̄_k) + Z_k`.
#[derive(Debug, Clone)]
pub(crate) struct Filter {
    /// Round whose feature is observed next.
    pub round: usize,
    /// `Cov((θ, S̄_round) | T^{<round})`.
    pub cov: Matrix,
}

impl Filter {
    pub fn new(model: &GaussianModel) -> Self {
        let d = model.dim();
        let mut cov = Matrix::zeros(2 * d, 2 * d);
        for (i, j) in [(0, 0), (0, d), (d, 0), (d, d)] {
            cov.view_mut((i, j), (d, d)).copy_from(model.sigma_theta());
        }
        let mut ss = cov.view_mut((d, d), (d, d));
        ss += model.sigma_x();
        Self { round: 1, cov }
    }

    pub fn covariances(&self, model: &GaussianModel) -> Result<ConditionalCovariances> {
        let d = model.dim();
        let p_tt = self.cov.view((0, 0), (d, d)).into_owned();
        let p_st = self.cov.view((d, 0), (d, d)).into_owned();
        let source = self.cov.view((d, d), (d, d)).into_owned();
        let test = linalg::symmetrize(&(p_tt + model.sigma_x()));
        let source_given_x = linalg::symmetrize(&linalg::schur_complement(&source, &p_st, &test)?);
        Ok(ConditionalCovariances { source: linalg::symmetrize(&source), source_given_x, test })
    }

    /// Condition on this round's feature.
    pub fn observe(&mut self, model: &GaussianModel, a: &Matrix) -> Result<()> {
        if a.nrows() == 0 {
            return Ok(());
        }
        let d = model.dim();
        let mut h = Matrix::zeros(a.nrows(), 2 * d);
        h.view_mut((0, d), (a.nrows(), d)).copy_from(a);
        let cov_obs = linalg::symmetrize(&(&h * &self.cov * h.transpose())) + Matrix::identity(a.nrows(), a.nrows());
        let cross = &self.cov * h.transpose();
        self.cov = linalg::symmetrize(&linalg::schur_complement(&self.cov, &cross, &cov_obs)?);
        Ok(())
    }

    /// Distribution of `X` given everything observed so far.
    pub fn test_cov(&self, model: &GaussianModel) -> Matrix {
        let d = model.dim();
        linalg::symmetrize(&(self.cov.view((0, 0), (d, d)).into_owned() + model.sigma_x()))
    }

    /// Move to the next round: `S̄_{k+1} = (k S̄_k + θ + e)/(k+1)`.
    pub fn advance(&mut self, model: &GaussianModel) {
        let d = model.dim();
        let k = self.round as f64;
        let mut f = Matrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            f[(i, i)] = 1.0;
            f[(d + i, i)] = 1.0 / (k + 1.0);
            f[(d + i, d + i)] = k / (k + 1.0);
        }
        let mut next = &f * &self.cov * f.transpose();
        let mut q = next.view_mut((d, d), (d, d));
        q += model.sigma_x() / ((k + 1.0) * (k + 1.0));
        self.cov = linalg::symmetrize(&next);
        self.round += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_round_is_unconditioned() {
        let m = GaussianModel::random(3, 4).unwrap();
        let c = conditional_covariances(&m, 1, &[]).unwrap();
        assert_relative_eq!(c.source, m.sample_mean_cov(1), epsilon = 1e-12);
        assert_relative_eq!(c.source_given_x, m.sample_mean_cov_given_test(1).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn zero_history_is_vacuous() {
        let m = GaussianModel::random(2, 1).unwrap();
        let c = conditional_covariances(&m, 2, &[Matrix::zeros(1, 2)]).unwrap();
        assert_relative_eq!(c.source, m.sample_mean_cov(2), epsilon = 1e-12);
        assert_relative_eq!(c.source_given_x, m.sample_mean_cov_given_test(2).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn filter_matches_direct_conditioning() {
        let m = GaussianModel::random(3, 7).unwrap();
        let blocks = vec![
            Matrix::from_row_slice(2, 3, &[1.0, 0.5, -0.2, 0.0, 0.3, 1.1]),
            Matrix::zeros(0, 3),
            Matrix::from_row_slice(1, 3, &[0.4, -0.7, 0.9]),
            Matrix::from_row_slice(3, 3, &[0.2, 0.0, 0.0, 0.0, 1.5, 0.0, 0.3, 0.3, 0.3]),
        ];
        let mut f = Filter::new(&m);
        for k in 1..=blocks.len() {
            let direct = conditional_covariances(&m, k, &blocks).unwrap();
            let rec = f.covariances(&m).unwrap();
            assert_relative_eq!(direct.source, rec.source, epsilon = 1e-10);
            assert_relative_eq!(direct.source_given_x, rec.source_given_x, epsilon = 1e-10);
            assert_relative_eq!(direct.test, rec.test, epsilon = 1e-10);
            f.observe(&m, &blocks[k - 1]).unwrap();
            f.advance(&m);
        }
    }

    #[test]
    fn joint_cov_reproduces_conditionals() {
        let m = GaussianModel::random(2, 3).unwrap();
        let blocks = vec![Matrix::from_row_slice(1, 2, &[1.0, 2.0]), Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.1, -1.0])];
        let j = stream_joint_cov(&m, &blocks);
        assert_eq!(j.nrows(), 2 + 4 + 3);
        // S̄_2 given T_1 from the big matrix.
        let s2 = j.view((4, 4), (2, 2)).into_owned();
        let c = j.view((4, 6), (2, 1)).into_owned();
        let t1 = j.view((6, 6), (1, 1)).into_owned();
        let direct = conditional_covariances(&m, 2, &blocks).unwrap();
        assert_relative_eq!(linalg::schur_complement(&s2, &c, &t1).unwrap(), direct.source, epsilon = 1e-12);
    }
}
