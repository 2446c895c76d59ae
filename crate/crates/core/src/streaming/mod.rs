//! Sequential sources: one new sample per round, one feature `T_k = A_k S̄_k + Z_k`
//! emitted per round with `Z_k ~ N(0, I)`.
//!
//! * [`run_online`] picks each round's projection greedily given all earlier
//!   features.
//! * [`run_twopass`] follows the online pass with backward sweeps that
//!   re-solve each round against every other round's feature.
//! * [`comprehensive_k2_scalar`] optimizes both rounds of a scalar two-round
//!   stream jointly by numerical search.

mod comprehensive;
mod covariance;
mod online;
mod oracle;
mod twopass;

pub use comprehensive::{
    comprehensive_k2_scalar, comprehensive_terms, ComprehensiveConfig, ComprehensivePoint, ComprehensiveResult,
    ComprehensiveTerms,
};
pub use covariance::{conditional_covariances, conditional_on_rounds, stream_joint_cov, ConditionalCovariances};
pub use online::{beta_for_round_rate, online_round, run_online, total_accounting, BetaPolicy, RoundSolution, StreamState};
pub use oracle::{monte_carlo_moments, MonteCarloMoments};
pub use twopass::{run_twopass, twopass_objective};
