//! Check the analytic joint covariance of a two-round stream against
//! simulation.

use ib_distill::model::GaussianModel;
use ib_distill::streaming::{monte_carlo_moments, run_online, stream_joint_cov, BetaPolicy};

fn main() -> ib_distill::Result<()> {
    let model = GaussianModel::random(2, 5)?;
    let state = run_online(&model, 2, &BetaPolicy::Fixed(8.0))?;
    let analytic = stream_joint_cov(&model, &state.blocks);
    let mc = monte_carlo_moments(&model, &state.blocks, 400_000, 42, |v| v.clone())?;
    println!("{} entries, max |z| = {:.3}", analytic.len(), mc.max_z_score(&analytic));
    println!("analytic:{analytic:.4}");
    println!("simulated:{:.4}", mc.cov);
    Ok(())
}
