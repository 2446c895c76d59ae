use ib_distill::gaussian::{closed_form_rd, iterative_gib, IterativeConfig};
use ib_distill::model::GaussianModel;

fn main() -> ib_distill::Result<()> {
    let model = GaussianModel::random(3, 11)?;
    let k = 5;
    println!("{:>8} {:>12} {:>12} {:>10} {:>6}", "beta", "closed rate", "iter rate", "|dD|", "iters");
    for beta in [1.2, 2.0, 5.0, 20.0, 200.0] {
        let (exact, _) = closed_form_rd(&model, k, beta)?;
        let it = iterative_gib(&model, k, beta, &IterativeConfig::new(3))?;
        println!(
            "{beta:>8.1} {:>12.8} {:>12.8} {:>10.2e} {:>6}",
            exact.rate,
            it.point.rate,
            (exact.distortion - it.point.distortion).abs(),
            it.iterations
        );
    }
    Ok(())
}
