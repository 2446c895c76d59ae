use super::covariance::conditional_on_rounds;
use super::online::{run_online, BetaPolicy, StreamState};
use crate::error::{domain, Result};
use crate::gaussian::BottleneckSpectrum;
use crate::linalg::Matrix;
use crate::model::GaussianModel;

/// Online forward pass followed by `passes` backward sweeps. Each backward
/// step re-solves round `k` (from `K−1` down to 1) with its sample mean
/// conditioned on the features of every other round, keeping that round's
/// forward β. Reported rates are the causal `I(S̄_l; T_l | T^{−l})` of the
/// final projections and distortions are `h(X|T^l)`.
pub fn run_twopass(model: &GaussianModel, rounds: usize, policy: &BetaPolicy, passes: usize) -> Result<StreamState> {
    if rounds < 2 {
        return Err(domain("two-pass needs at least two rounds"));
    }
    if passes == 0 {
        return Err(domain("two-pass needs at least one backward sweep"));
    }
    let online = run_online(model, rounds, policy)?;
    let mut blocks = online.blocks.clone();
    for pass in 0..passes {
        for k in (1..rounds).rev() {
            let others: Vec<(usize, &Matrix)> =
                blocks.iter().enumerate().filter(|(i, _)| i + 1 != k).map(|(i, a)| (i + 1, a)).collect();
            let covs = conditional_on_rounds(model, k, &others)?;
            let spectrum = BottleneckSpectrum::new(covs.source, covs.source_given_x)?;
            blocks[k - 1] = spectrum.projection(online.betas[k - 1]);
        }
        log::debug!("two-pass sweep {} done", pass + 1);
    }
    let mut state = StreamState::from_blocks(model, &blocks, &online.betas)?;
    state.unreachable = online.unreachable;
    Ok(state)
}

/// `Σ_l rate_l − β I(X; T^K)`: the quantity each backward step minimizes
/// over its own round's projection.
pub fn twopass_objective(state: &StreamState, beta: f64) -> Result<f64> {
    let h_x = state.h_x()?;
    let last = state.distortions.last().copied().unwrap_or(h_x);
    Ok(state.rates.iter().sum::<f64>() - beta * (h_x - last))
}
