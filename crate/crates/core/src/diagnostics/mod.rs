//! Run instrumentation: realized errors, series constants, deterministic
//! error-propagation bounds, the total-variance bound and concentration
//! event thresholds.

pub mod concentration;
pub mod lemmas;
pub mod series;
pub mod trace;
pub mod variance;

pub use concentration::{
    concentration_thresholds, event_violation_rates, event_violations, EventThresholds,
    EventViolations, ThresholdParams, ViolationRates,
};
pub use lemmas::{BoundCheck, DeltaAndValueChecks, LemmaContext, LEMMA_SLACK};
pub use series::{a_gamma_k, a_inf, a_k, drift_bound, SeriesConstants};
pub use trace::{check_s_identity, compute_eps_and_e, enrich_errors, IterationTrace};
pub use variance::{
    return_variance_sequence, total_variance_bound, total_variance_check, TotalVarianceCheck,
};
