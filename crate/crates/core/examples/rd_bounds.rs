use ib_distill::discrete::{histogram_stats, rd_curve_discrete, DiscreteSolverConfig};
use ib_distill::model::{rd_bounds, DiscreteFamily, SourceEntropies};

fn main() -> ib_distill::Result<()> {
    let family = DiscreteFamily::bernoulli(&[0.2, 0.8], vec![0.5, 0.5])?;
    let stats = histogram_stats(&family, 3)?;
    let entropies = SourceEntropies {
        h_x: stats.entropy_x(),
        discrete: Some((family.entropy_theta(), family.alphabet_size())),
    };
    let betas: Vec<f64> = (0..30).map(|i| 10f64.powf(2.5 * i as f64 / 29.0)).collect();
    let curve = rd_curve_discrete(&stats, &betas, &DiscreteSolverConfig::new(4, 0), 3, true)?;
    println!("{:>11} {:>9} {:>9} {:>9}", "distortion", "lower", "rate", "upper");
    for c in curve {
        let b = rd_bounds(&entropies, c.point.distortion);
        println!("{:>11.6} {:>9.5} {:>9.5} {:>9.5}", c.point.distortion, b.lower, c.point.rate, b.upper.unwrap());
    }
    Ok(())
}
