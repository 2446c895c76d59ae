//! Backward sweeps that re-solve each round given all other rounds.

use ib_distill::model::GaussianModel;
use ib_distill::streaming::{run_online, run_twopass, twopass_objective, BetaPolicy};

fn main() -> ib_distill::Result<()> {
    let model = GaussianModel::random(10, 0)?;
    let rounds = 4;
    for beta in [1.5, 4.0, 30.0] {
        let policy = BetaPolicy::Fixed(beta);
        let online = run_online(&model, rounds, &policy)?;
        println!("beta = {beta}");
        println!(
            "  online   total rate {:>8.4}  h(X|T^K) {:>9.5}  objective {:>10.5}",
            online.rates.iter().sum::<f64>(),
            online.distortions[rounds - 1],
            twopass_objective(&online, beta)?
        );
        for passes in [1, 2, 5] {
            let tp = run_twopass(&model, rounds, &policy, passes)?;
            println!(
                "  {passes} sweeps total rate {:>8.4}  h(X|T^K) {:>9.5}  objective {:>10.5}",
                tp.rates.iter().sum::<f64>(),
                tp.distortions[rounds - 1],
                twopass_objective(&tp, beta)?
            );
        }
    }
    Ok(())
}
