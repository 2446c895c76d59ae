//! Closed-form Gaussian curves: the spectrum of the bottleneck matrix fixes
//! where each component switches on.

use ib_distill::gaussian::{batch_bottleneck_matrix, rd_curve_gaussian};
use ib_distill::model::{entropy_triple, GaussianModel};

fn main() -> ib_distill::Result<()> {
    let model = GaussianModel::random(6, 0)?;
    for k in [5usize, 20, 100] {
        let batch = batch_bottleneck_matrix(&model, k)?;
        let triple = entropy_triple(&model, k)?;
        let crit: Vec<String> = batch.spectrum.critical_betas().iter().map(|b| format!("{b:.2}")).collect();
        println!("k = {k}: critical betas [{}]", crit.join(", "));
        println!("  h(X) = {:.4}, h(X|X^k) = {:.4}", triple.h_x, triple.h_x_given_data);

        let betas = [1.5, 3.0, 10.0, 100.0, 1e4];
        for p in rd_curve_gaussian(&model, k, &betas)? {
            println!("  beta {:>8.1}: rate {:>8.4}  distortion {:>8.4}  active {}", p.beta, p.rate, p.distortion, p.n_active);
        }
    }
    Ok(())
}
