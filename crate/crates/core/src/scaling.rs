//! How fast the rate budget must grow with the sample count for the
//! compressed distortion `h(X|T)` to track the uncompressed `h(X|X^k)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gaussian::batch_bottleneck_matrix;
use crate::model::{entropy_triple, GaussianModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Log,
    Sqrt,
    Linear,
}

/// Rate budget `R(k)` in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub kind: ScheduleKind,
    pub coefficient: f64,
    #[serde(default)]
    pub offset: f64,
}

impl RateSchedule {
    pub fn new(kind: ScheduleKind, coefficient: f64) -> Self {
        Self { kind, coefficient, offset: 0.0 }
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Log => "log",
            ScheduleKind::Sqrt => "sqrt",
            ScheduleKind::Linear => "linear",
        };
        if self.offset == 0.0 {
            format!("{kind}:{}", self.coefficient)
        } else {
            format!("{kind}:{}:{}", self.coefficient, self.offset)
        }
    }
}

pub fn eval_schedule(s: &RateSchedule, k: usize) -> f64 {
    assert!(k >= 1, "sample count starts at 1");
    let k = k as f64;
    let base = match s.kind {
        ScheduleKind::Constant => s.coefficient,
        ScheduleKind::Log => s.coefficient * k.ln(),
        ScheduleKind::Sqrt => s.coefficient * k.sqrt(),
        ScheduleKind::Linear => s.coefficient * k,
    };
    (base + s.offset).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRecord {
    pub k: usize,
    pub rate: f64,
    pub beta: f64,
    /// False when `R(k)` exceeded the rate reachable in the β window.
    pub reachable: bool,
    pub h_x_given_t: f64,
    pub h_x_given_data: f64,
    pub h_x_given_theta: f64,
    /// `h(X|T) − h(X|X^k)`.
    pub gap_t_xk: f64,
    /// `h(X|T) − h(X|θ)`.
    pub gap_t_theta: f64,
}

/// For each `k ≤ k_max`, the batch encoder whose rate equals `R(k)` and the
/// resulting entropy gaps.
pub fn gap_series(model: &GaussianModel, schedule: &RateSchedule, k_max: usize) -> Result<Vec<GapRecord>> {
    if k_max == 0 {
        return Err(domain("k_max must be at least 1"));
    }
    (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let triple = entropy_triple(model, k)?;
            let spectrum = batch_bottleneck_matrix(model, k)?.spectrum;
            let rate = eval_schedule(schedule, k);
            let (beta, reachable) = spectrum.beta_for_rate(rate, 1e-8);
            let h_x_given_t = triple.h_x + spectrum.distortion_change(beta);
            Ok(GapRecord {
                k,
                rate: spectrum.rate(beta),
                beta,
                reachable,
                h_x_given_t,
                h_x_given_data: triple.h_x_given_data,
                h_x_given_theta: triple.h_x_given_theta,
                gap_t_xk: h_x_given_t - triple.h_x_given_data,
                gap_t_theta: h_x_given_t - triple.h_x_given_theta,
            })
        })
        .collect()
}
