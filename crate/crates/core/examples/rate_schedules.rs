//! How fast must the rate grow with k for h(X|T) to keep up with h(X|X^k)?

use ib_distill::model::GaussianModel;
use ib_distill::scaling::{gap_series, RateSchedule, ScheduleKind};

fn main() -> ib_distill::Result<()> {
    let model = GaussianModel::scalar(1.0, 1.0)?;
    let schedules = [
        RateSchedule::new(ScheduleKind::Constant, 1.0),
        RateSchedule::new(ScheduleKind::Log, 1.0),
        RateSchedule::new(ScheduleKind::Sqrt, 1.0),
    ];
    for s in &schedules {
        let gaps = gap_series(&model, s, 50)?;
        let k0 = gaps.iter().rposition(|g| g.gap_t_xk >= 1e-2).map_or(1, |i| gaps[i].k + 1);
        println!("{:<12} gap at k=1 {:.4}, k=10 {:.4}, k=50 {:.5}; below 1e-2 from k = {k0}", s.label(), gaps[0].gap_t_xk, gaps[9].gap_t_xk, gaps[49].gap_t_xk);
    }
    Ok(())
}
