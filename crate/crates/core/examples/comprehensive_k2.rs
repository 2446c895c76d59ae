use ib_distill::model::GaussianModel;
use ib_distill::optim::MultiStartConfig;
use ib_distill::streaming::{comprehensive_k2_scalar, run_online, total_accounting, BetaPolicy, ComprehensiveConfig};

fn main() -> ib_distill::Result<()> {
    let model = GaussianModel::scalar(1.0, 1.0)?;
    let weights: Vec<f64> = (0..25).map(|i| 0.5 * 10f64.powf(4.0 * i as f64 / 24.0)).collect();
    let cfg = ComprehensiveConfig { weights: weights.clone(), search: MultiStartConfig { seed: 1, ..Default::default() } };
    let result = comprehensive_k2_scalar(&model, &cfg)?;
    println!("{} weights, {} stagnated searches", result.points.len(), result.stagnated());

    println!("hull of (total rate, total distortion):");
    for (r, d) in &result.hull {
        println!("  {r:>9.5} {d:>10.6}");
    }
    println!("online rounds at the same trade-offs:");
    for w in weights.iter().step_by(4) {
        let s = run_online(&model, 2, &BetaPolicy::Fixed(*w))?;
        let (r, d) = total_accounting(&s);
        println!("  beta {w:>9.2}: {r:>9.5} {d:>10.6}");
    }
    Ok(())
}
