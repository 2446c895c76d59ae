//! Rate-distortion curve of a Bernoulli source with a uniform prior over the
//! bias, for a few training-set sizes.

use ib_distill::discrete::{histogram_stats, rd_curve_discrete, DiscreteSolverConfig};
use ib_distill::model::DiscreteFamily;

fn main() -> ib_distill::Result<()> {
    let family = DiscreteFamily::bernoulli_uniform(101)?;
    let betas: Vec<f64> = (0..40).map(|i| 10f64.powf(3.0 * i as f64 / 39.0)).collect();

    for k in [4u32, 10] {
        let stats = histogram_stats(&family, k)?;
        println!(
            "k = {k}: {} histograms, H(X) = {:.4}, H(X|X^k) = {:.4} nats",
            stats.num_histograms(),
            stats.entropy_x(),
            stats.entropy_x_given_data()
        );
        let cfg = DiscreteSolverConfig::new(k as usize + 1, 7);
        let hull = rd_curve_discrete(&stats, &betas, &cfg, 3, true)?;
        println!("  {:>10} {:>10} {:>11} {:>4}", "beta", "rate", "distortion", "|T|");
        for c in hull {
            let p = c.point;
            println!("  {:>10.3} {:>10.5} {:>11.6} {:>4}", p.beta, p.rate, p.distortion, p.n_active);
        }
    }
    Ok(())
}
