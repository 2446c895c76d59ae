use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::hull::convex_hull_lower;
use crate::model::{gaussian_entropy, sample_mean_joint_cov, GaussianModel};
use crate::optim::{multi_start, MultiStartConfig};
use crate::linalg::Matrix;

/// Per-round information terms of the scalar two-round encoder
/// `T_1 = a_1 S̄_1 + Z_1`, `T_2 = a_21 S̄_1 + a_22 S̄_2 + Z_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComprehensiveTerms {
    /// `I(S̄_1; T_1)`.
    pub rate1: f64,
    /// `I(S̄_1, S̄_2; T_2 | T_1)`.
    pub rate2: f64,
    /// `h(X | T_1)`.
    pub distortion1: f64,
    /// `h(X | T_1, T_2)`.
    pub distortion2: f64,
}

impl ComprehensiveTerms {
    pub fn total_rate(&self) -> f64 {
        self.rate1 + self.rate2
    }

    pub fn total_distortion(&self) -> f64 {
        self.distortion1 + self.distortion2
    }
}

pub fn comprehensive_terms(model: &GaussianModel, params: &[f64; 3]) -> Result<ComprehensiveTerms> {
    if model.dim() != 1 {
        return Err(domain("the comprehensive solver handles scalar models only"));
    }
    let [a1, b1, b2] = *params;
    let j = sample_mean_joint_cov(model, 2);
    let (j11, j12, j22) = (j[(0, 0)], j[(0, 1)], j[(1, 1)]);
    let s_th = model.sigma_theta()[(0, 0)];
    let var_x = model.sigma_test()[(0, 0)];

    let v1 = a1 * a1 * j11 + 1.0;
    let c12 = a1 * (b1 * j11 + b2 * j12);
    let v2 = b1 * b1 * j11 + 2.0 * b1 * b2 * j12 + b2 * b2 * j22 + 1.0;
    let v2_given_1 = (v2 - c12 * c12 / v1).max(1.0);
    let cx1 = s_th * a1;
    let cx2 = s_th * (b1 + b2);

    let var_x1 = var_x - cx1 * cx1 / v1;
    let det = v1 * v2 - c12 * c12;
    let quad = (cx1 * cx1 * v2 - 2.0 * cx1 * cx2 * c12 + cx2 * cx2 * v1) / det;
    let var_x12 = var_x - quad;
    let h = |v: f64| gaussian_entropy(&Matrix::from_element(1, 1, v));
    Ok(ComprehensiveTerms {
        rate1: 0.5 * v1.ln(),
        rate2: 0.5 * v2_given_1.ln(),
        distortion1: h(var_x1)?,
        distortion2: h(var_x12)?,
    })
}

#[derive(Debug, Clone)]
pub struct ComprehensiveConfig {
    /// Trade-off weights `w` of `Σ rates − w Σ_l I(X; T^l)`.
    pub weights: Vec<f64>,
    /// Base search settings; the start magnitudes are shifted by `√w` per
    /// weight and the seed advanced by the weight's index.
    pub search: MultiStartConfig,
}

impl Default for ComprehensiveConfig {
    fn default() -> Self {
        let n = 161;
        let (lo, hi) = (0.25f64.ln(), 1e6f64.ln());
        let weights = (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect();
        Self { weights, search: MultiStartConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComprehensivePoint {
    pub weight: f64,
    pub params: [f64; 3],
    pub terms: ComprehensiveTerms,
    pub total_rate: f64,
    pub total_distortion: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ComprehensiveResult {
    /// Best point per weight, in weight order.
    pub points: Vec<ComprehensivePoint>,
    /// Lower convex hull of `(total_rate, total_distortion)`.
    pub hull: Vec<(f64, f64)>,
}

impl ComprehensiveResult {
    pub fn stagnated(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }
}

/// Jointly optimize both rounds of a scalar two-round stream for each weight
/// and hull the resulting totals.
pub fn comprehensive_k2_scalar(model: &GaussianModel, cfg: &ComprehensiveConfig) -> Result<ComprehensiveResult> {
    if model.dim() != 1 {
        return Err(domain("the comprehensive solver handles scalar models only"));
    }
    if cfg.weights.iter().any(|w| !(*w > 0.0)) {
        return Err(domain("trade-off weights must be positive"));
    }
    let silent = comprehensive_terms(model, &[0.0; 3])?;
    let points: Vec<ComprehensivePoint> = cfg
        .weights
        .par_iter()
        .enumerate()
        .map(|(idx, &w)| -> Result<ComprehensivePoint> {
            let objective = |p: &[f64]| match comprehensive_terms(model, &[p[0], p[1], p[2]]) {
                Ok(t) => t.total_rate() + w * t.total_distortion(),
                Err(_) => f64::INFINITY,
            };
            let shift = 0.5 * w.max(1.0).log10();
            let search = MultiStartConfig {
                seed: cfg.search.seed.wrapping_add(idx as u64),
                log_lo: cfg.search.log_lo + shift,
                log_hi: cfg.search.log_hi + shift,
                ..cfg.search
            };
            let best = multi_start(objective, 3, &search);
            let silent_value = silent.total_rate() + w * silent.total_distortion();
            let (params, converged) = if silent_value <= best.value {
                ([0.0; 3], true)
            } else {
                ([best.x[0], best.x[1], best.x[2]], best.converged)
            };
            if !converged {
                log::warn!("comprehensive search stagnated at weight {w}");
            }
            let terms = comprehensive_terms(model, &params)?;
            Ok(ComprehensivePoint {
                weight: w,
                params,
                terms,
                total_rate: terms.total_rate(),
                total_distortion: terms.total_distortion(),
                converged,
            })
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.total_rate, p.total_distortion)).collect();
    let hull = convex_hull_lower(&pairs);
    Ok(ComprehensiveResult { points, hull })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::entropy_triple;
    use crate::streaming::{run_online, BetaPolicy};
    use approx::assert_relative_eq;

    #[test]
    fn terms_match_online_when_round_two_ignores_history() {
        let m = GaussianModel::scalar(1.0, 1.0).unwrap();
        let st = run_online(&m, 2, &BetaPolicy::Fixed(8.0)).unwrap();
        let p = [st.blocks[0][(0, 0)], 0.0, st.blocks[1][(0, 0)]];
        let t = comprehensive_terms(&m, &p).unwrap();
        assert_relative_eq!(t.rate1, st.rates[0], epsilon = 1e-12);
        assert_relative_eq!(t.rate2, st.rates[1], epsilon = 1e-12);
        assert_relative_eq!(t.distortion1, st.distortions[0], epsilon = 1e-12);
        assert_relative_eq!(t.distortion2, st.distortions[1], epsilon = 1e-12);
    }

    #[test]
    fn silent_encoder() {
        let m = GaussianModel::scalar(1.0, 1.0).unwrap();
        let t = comprehensive_terms(&m, &[0.0; 3]).unwrap();
        let h = entropy_triple(&m, 1).unwrap().h_x;
        assert_eq!(t.total_rate(), 0.0);
        assert_relative_eq!(t.total_distortion(), 2.0 * h, epsilon = 1e-14);
    }
}
