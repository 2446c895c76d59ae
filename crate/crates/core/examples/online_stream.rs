//! Greedy round-by-round encoding of a growing sample, with a fixed
//! trade-off and with a per-round rate budget.

use ib_distill::model::{entropy_triple, GaussianModel};
use ib_distill::streaming::{run_online, total_accounting, BetaPolicy};

fn main() -> ib_distill::Result<()> {
    let model = GaussianModel::scalar(1.0, 1.0)?;
    let rounds = 8;

    let state = run_online(&model, rounds, &BetaPolicy::Fixed(20.0))?;
    println!("fixed beta = 20");
    println!("{:>5} {:>9} {:>11} {:>11} {:>9}", "round", "rate", "h(X|T^l)", "h(X|X^l)", "lambda");
    for l in 0..rounds {
        let floor = entropy_triple(&model, l + 1)?.h_x_given_data;
        println!(
            "{:>5} {:>9.5} {:>11.6} {:>11.6} {:>9.5}",
            l + 1,
            state.rates[l],
            state.distortions[l],
            floor,
            state.eigenvalues[l][0]
        );
    }
    let (rate, regret) = total_accounting(&state);
    println!("total rate {rate:.5}, sum regret {regret:.5}\n");

    let budget = run_online(&model, rounds, &BetaPolicy::RateBudget(vec![0.25]))?;
    println!("0.25 nats per round");
    for l in 0..rounds {
        println!("  round {}: beta {:>9.3} rate {:.6} h(X|T^l) {:.6}", l + 1, budget.betas[l], budget.rates[l], budget.distortions[l]);
    }
    Ok(())
}
