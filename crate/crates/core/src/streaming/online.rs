use serde::Serialize;

use super::covariance::{half_log_det_plus_identity, ConditionalCovariances, Filter};
use crate::error::{domain, Error, Result};
use crate::gaussian::BottleneckSpectrum;
use crate::linalg::{Matrix, Vector};
use crate::model::{gaussian_entropy, GaussianModel};

/// How each round's trade-off is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaPolicy {
    Fixed(f64),
    /// One β per round.
    PerRound(Vec<f64>),
    /// Target conditional rate per round in nats; a single entry applies to
    /// every round.
    RateBudget(Vec<f64>),
}

impl BetaPolicy {
    fn check(&self, rounds: usize) -> Result<()> {
        let bad = |v: &[f64]| v.len() != 1 && v.len() != rounds;
        match self {
            BetaPolicy::Fixed(b) if !(*b > 0.0) => Err(domain(format!("beta must be positive, got {b}"))),
            BetaPolicy::PerRound(v) if bad(v) || v.iter().any(|b| !(*b > 0.0)) => {
                Err(Error::Size(format!("need 1 or {rounds} positive betas, got {v:?}")))
            }
            BetaPolicy::RateBudget(v) if bad(v) || v.iter().any(|r| !(*r >= 0.0)) => {
                Err(Error::Size(format!("need 1 or {rounds} nonnegative rate budgets, got {v:?}")))
            }
            _ => Ok(()),
        }
    }

    fn pick(v: &[f64], k: usize) -> f64 {
        if v.len() == 1 {
            v[0]
        } else {
            v[k - 1]
        }
    }
}

/// Solution of one online round.
#[derive(Debug, Clone, Serialize)]
pub struct RoundSolution {
    pub round: usize,
    #[serde(skip)]
    pub a_k: Matrix,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vector>,
    pub critical_betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub beta: f64,
    pub n_active: usize,
    /// `I(S̄_k; T_k | T^{−k})`, nats.
    pub rate: f64,
    /// `h(X | T^k)`, nats.
    pub distortion: f64,
}

/// Everything emitted by a stream so far.
#[derive(Debug, Clone)]
pub struct StreamState {
    pub model: GaussianModel,
    /// Number of completed rounds.
    pub round: usize,
    /// `A_1, …, A_round`.
    pub blocks: Vec<Matrix>,
    /// Covariance of the stacked features `(T_1, …, T_round)`.
    pub joint_feature_cov: Matrix,
    /// `Cov(S̄_round, T^{−round})` recorded when the last round was solved.
    pub cross_cov: Matrix,
    pub betas: Vec<f64>,
    pub rates: Vec<f64>,
    pub distortions: Vec<f64>,
    pub eigenvalues: Vec<Vec<f64>>,
    /// Rounds whose rate budget exceeded what the search window can reach.
    pub unreachable: Vec<bool>,
    filter: Filter,
}

impl StreamState {
    pub fn new(model: &GaussianModel) -> Self {
        Self {
            model: model.clone(),
            round: 0,
            blocks: Vec::new(),
            joint_feature_cov: Matrix::zeros(0, 0),
            cross_cov: Matrix::zeros(model.dim(), 0),
            betas: Vec::new(),
            rates: Vec::new(),
            distortions: Vec::new(),
            eigenvalues: Vec::new(),
            unreachable: Vec::new(),
            filter: Filter::new(model),
        }
    }

    /// Replay a fixed sequence of projections, recomputing every per-round
    /// quantity. Eigenvalues are those of each round's conditional problem.
    pub fn from_blocks(model: &GaussianModel, blocks: &[Matrix], betas: &[f64]) -> Result<Self> {
        if betas.len() != blocks.len() {
            return Err(Error::Size("one beta per block required".into()));
        }
        let mut state = Self::new(model);
        for (a, &beta) in blocks.iter().zip(betas) {
            let covs = state.next_covariances()?;
            let spectrum = BottleneckSpectrum::new(covs.source.clone(), covs.source_given_x.clone())?;
            let rate = half_log_det_plus_identity(a, &covs.source)?;
            let mut after = state.filter.clone();
            after.observe(model, a)?;
            let distortion = gaussian_entropy(&after.test_cov(model))?;
            let sol = RoundSolution {
                round: state.round + 1,
                a_k: a.clone(),
                critical_betas: spectrum.critical_betas(),
                eigenvalues: spectrum.eigenvalues,
                eigenvectors: spectrum.eigenvectors,
                alphas: Vec::new(),
                beta,
                n_active: a.nrows(),
                rate,
                distortion,
            };
            state.push(&sol, false)?;
        }
        Ok(state)
    }

    pub fn h_x(&self) -> Result<f64> {
        gaussian_entropy(&self.model.sigma_test())
    }

    /// Covariances of the next round's sample mean given all features so far.
    pub fn next_covariances(&self) -> Result<ConditionalCovariances> {
        self.filter.covariances(&self.model)
    }

    /// Append a solved round.
    pub fn push(&mut self, sol: &RoundSolution, unreachable: bool) -> Result<()> {
        let k = self.round + 1;
        if sol.round != k {
            return Err(domain(format!("expected round {k}, got {}", sol.round)));
        }
        let d = self.model.dim();
        let a = &sol.a_k;
        if a.ncols() != d {
            return Err(domain("projection width does not match the model"));
        }
        let n = self.joint_feature_cov.nrows();
        let r = a.nrows();
        let mut cross = Matrix::zeros(d, n);
        let mut offset = 0;
        let mean = self.model.sigma_theta() + self.model.sigma_x() / k as f64;
        for b in &self.blocks {
            cross.view_mut((0, offset), (d, b.nrows())).copy_from(&(&mean * b.transpose()));
            offset += b.nrows();
        }
        let mut joint = Matrix::zeros(n + r, n + r);
        joint.view_mut((0, 0), (n, n)).copy_from(&self.joint_feature_cov);
        let off_diag = a * &cross;
        joint.view_mut((n, 0), (r, n)).copy_from(&off_diag);
        joint.view_mut((0, n), (n, r)).copy_from(&off_diag.transpose());
        let own = a * self.model.sample_mean_cov(k) * a.transpose() + Matrix::identity(r, r);
        joint.view_mut((n, n), (r, r)).copy_from(&crate::linalg::symmetrize(&own));

        self.filter.observe(&self.model, a)?;
        self.filter.advance(&self.model);
        self.joint_feature_cov = joint;
        self.cross_cov = cross;
        self.blocks.push(a.clone());
        self.betas.push(sol.beta);
        self.rates.push(sol.rate);
        self.distortions.push(sol.distortion);
        self.eigenvalues.push(sol.eigenvalues.clone());
        self.unreachable.push(unreachable);
        self.round = k;
        Ok(())
    }
}

fn solve_round(model: &GaussianModel, k: usize, state: &StreamState, covs: &ConditionalCovariances, beta: f64) -> Result<RoundSolution> {
    if !(beta > 0.0) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    let spectrum = BottleneckSpectrum::new(covs.source.clone(), covs.source_given_x.clone())?;
    let a_k = spectrum.projection(beta);
    let rate = half_log_det_plus_identity(&a_k, &covs.source)?;
    let mut after = state.filter.clone();
    after.observe(model, &a_k)?;
    let distortion = gaussian_entropy(&after.test_cov(model))?;
    Ok(RoundSolution {
        round: k,
        n_active: a_k.nrows(),
        critical_betas: spectrum.critical_betas(),
        alphas: spectrum.alphas(beta),
        a_k,
        eigenvalues: spectrum.eigenvalues,
        eigenvectors: spectrum.eigenvectors,
        beta,
        rate,
        distortion,
    })
}

fn check_round(model: &GaussianModel, k: usize, state: &StreamState) -> Result<()> {
    if state.round + 1 != k {
        return Err(domain(format!("state holds {} rounds; cannot solve round {k}", state.round)));
    }
    if state.model != *model {
        return Err(domain("state was built for a different model"));
    }
    Ok(())
}

/// Greedy round-`k` projection given the features of rounds `1..k`.
pub fn online_round(model: &GaussianModel, k: usize, state: &StreamState, beta: f64) -> Result<RoundSolution> {
    check_round(model, k, state)?;
    let covs = state.next_covariances()?;
    solve_round(model, k, state, &covs, beta)
}

/// β whose round-`k` rate hits `target` nats. The flag is false when the
/// target exceeds the rate reachable at the top of the search window; the
/// window's upper end is returned in that case.
pub fn beta_for_round_rate(model: &GaussianModel, k: usize, state: &StreamState, target: f64, tol: f64) -> Result<(f64, bool)> {
    check_round(model, k, state)?;
    if !(target >= 0.0) {
        return Err(domain(format!("target rate must be nonnegative, got {target}")));
    }
    let covs = state.next_covariances()?;
    let spectrum = BottleneckSpectrum::new(covs.source, covs.source_given_x)?;
    Ok(spectrum.beta_for_rate(target, tol))
}

pub fn run_online(model: &GaussianModel, rounds: usize, policy: &BetaPolicy) -> Result<StreamState> {
    if rounds == 0 {
        return Err(domain("need at least one round"));
    }
    policy.check(rounds)?;
    let mut state = StreamState::new(model);
    for k in 1..=rounds {
        let (beta, reachable) = match policy {
            BetaPolicy::Fixed(b) => (*b, true),
            BetaPolicy::PerRound(v) => (BetaPolicy::pick(v, k), true),
            BetaPolicy::RateBudget(v) => beta_for_round_rate(model, k, &state, BetaPolicy::pick(v, k), 1e-8)?,
        };
        let sol = online_round(model, k, &state, beta)?;
        log::debug!("round {k}: beta={beta:.6} rate={:.6} distortion={:.6}", sol.rate, sol.distortion);
        state.push(&sol, !reachable)?;
    }
    Ok(state)
}

/// `(Σ_l rate_l, Σ_l h(X|T^l))`.
pub fn total_accounting(state: &StreamState) -> (f64, f64) {
    (state.rates.iter().sum(), state.distortions.iter().sum())
}
