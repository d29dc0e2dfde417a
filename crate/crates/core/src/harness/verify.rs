//! Runs greedy MDVI on one MDP for several seeds and checks every
//! deterministic bound at every iteration, plus the concentration events.

use serde::{Deserialize, Serialize};

use super::sweep::{map_seeds, sampler_seed, OPTIMAL_TOL};
use crate::algorithms::{mdvi_run, MdviConfig};
use crate::bellman::exact_optimal;
use crate::diagnostics::{
    check_s_identity, concentration_thresholds, event_violation_rates, total_variance_check,
    BoundCheck, IterationTrace, LemmaContext, ThresholdParams, ViolationRates,
};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub alpha: f64,
    pub iterations: usize,
    pub samples_per_update: usize,
    pub seeds: Vec<u64>,
    /// Confidence level for the concentration thresholds.
    pub delta: f64,
}

/// Aggregate over all seeds and iterations for one bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub name: String,
    /// False when the bound needs `α < 1`.
    pub available: bool,
    pub checks: usize,
    pub failures: usize,
    /// Smallest margin seen (negative means violated); `+∞` serializes as null.
    pub worst_slack: Option<f64>,
}

impl LemmaSummary {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            available: true,
            checks: 0,
            failures: 0,
            worst_slack: None,
        }
    }

    fn record(&mut self, passed: bool, slack: f64) {
        self.checks += 1;
        self.failures += usize::from(!passed);
        if slack.is_finite() {
            self.worst_slack = Some(self.worst_slack.map_or(slack, |w| w.min(slack)));
        }
    }

    fn record_bound(&mut self, check: &BoundCheck) {
        self.record(check.passed(), check.worst_slack());
    }

    fn merge(&mut self, other: &LemmaSummary) {
        self.available &= other.available;
        self.checks += other.checks;
        self.failures += other.failures;
        if let Some(s) = other.worst_slack {
            self.worst_slack = Some(self.worst_slack.map_or(s, |w| w.min(s)));
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Monitored ratios of realized errors to constant-free coarse bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CoarseRatios {
    pub nonstationary_max: Option<f64>,
    pub last_policy_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub config: VerifyConfig,
    pub lemmas: Vec<LemmaSummary>,
    pub s_identity_max_residual: f64,
    pub s_identity_tolerance: f64,
    pub violation_rates: ViolationRates,
    pub coarse_ratios: CoarseRatios,
    pub passed: bool,
}

const NAMES: [&str; 6] = [
    "nonstationary_error_propagation",
    "last_policy_error_propagation",
    "value_magnitude",
    "delta_bound",
    "value_error_propagation",
    "total_variance",
];

struct SeedReport {
    lemmas: Vec<LemmaSummary>,
    s_residual: f64,
    coarse: CoarseRatios,
    trace: Vec<IterationTrace>,
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn check_seed(mdp: &TabularMdp, config: &VerifyConfig, seed: u64) -> Result<SeedReport> {
    let optimal = exact_optimal(mdp, OPTIMAL_TOL)?;
    let run_config = MdviConfig::greedy(
        config.alpha,
        config.iterations,
        config.samples_per_update,
        sampler_seed(seed),
    );
    let run = mdvi_run(mdp, &run_config)?;
    let ctx = LemmaContext::new(mdp, &optimal, &run.trace, config.alpha)?;
    let has_a_inf = config.alpha < 1.0;
    let mut lemmas: Vec<LemmaSummary> = NAMES.iter().map(|n| LemmaSummary::new(n)).collect();
    lemmas[0].available = has_a_inf;
    lemmas[1].available = has_a_inf;
    let mut coarse = CoarseRatios::default();

    for k in 0..=config.iterations {
        if has_a_inf {
            lemmas[1].record_bound(&ctx.check_last_policy_bound(k)?);
            coarse.last_policy_max = max_opt(coarse.last_policy_max, Some(ctx.coarse_last_ratio(k)?));
        }
        if k == 0 {
            continue;
        }
        if has_a_inf {
            lemmas[0].record_bound(&ctx.check_nonstationary_bound(k)?);
            coarse.nonstationary_max =
                max_opt(coarse.nonstationary_max, Some(ctx.coarse_nonstationary_ratio(k)?));
        }
        let dv = ctx.check_delta_and_v_bounds(k)?;
        let magnitude = &dv.value_magnitude;
        lemmas[2].record(
            magnitude.lower_slack >= -1e-10 && magnitude.upper_slack >= -1e-10,
            magnitude.worst_slack(),
        );
        lemmas[3].record_bound(&dv.delta);
        lemmas[4].record_bound(&dv.value_error);
        let tv = total_variance_check(mdp, ctx.policies(), k)?;
        lemmas[5].record(tv.passed(), tv.bound - tv.max_lhs);
    }
    let s_residual = check_s_identity(mdp, &run.trace, config.alpha)?;
    Ok(SeedReport {
        lemmas,
        s_residual,
        coarse,
        trace: run.trace,
    })
}

pub fn verify_lemmas(mdp: &TabularMdp, config: &VerifyConfig) -> Result<LemmaReport> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let reports = map_seeds(&config.seeds, |seed| check_seed(mdp, config, seed))?;

    let mut lemmas: Vec<LemmaSummary> = NAMES.iter().map(|n| LemmaSummary::new(n)).collect();
    let mut s_residual: f64 = 0.0;
    let mut coarse = CoarseRatios::default();
    for r in &reports {
        for (total, part) in lemmas.iter_mut().zip(&r.lemmas) {
            total.merge(part);
        }
        s_residual = s_residual.max(r.s_residual);
        coarse.nonstationary_max = max_opt(coarse.nonstationary_max, r.coarse.nonstationary_max);
        coarse.last_policy_max = max_opt(coarse.last_policy_max, r.coarse.last_policy_max);
    }

    let optimal = exact_optimal(mdp, OPTIMAL_TOL)?;
    let thresholds = concentration_thresholds(
        mdp,
        ThresholdParams {
            alpha: config.alpha,
            iterations: config.iterations,
            samples_per_update: config.samples_per_update,
            delta: config.delta,
        },
        &optimal.v_star,
    )?;
    let traces: Vec<Vec<IterationTrace>> = reports.into_iter().map(|r| r.trace).collect();
    let violation_rates = event_violation_rates(&traces, &thresholds)?;

    let s_identity_tolerance = 1e-9 * config.iterations as f64 * mdp.horizon();
    let passed = lemmas.iter().all(LemmaSummary::passed) && s_residual <= s_identity_tolerance;
    Ok(LemmaReport {
        config: config.clone(),
        lemmas,
        s_identity_max_residual: s_residual,
        s_identity_tolerance,
        violation_rates,
        coarse_ratios: coarse,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garnet::{generate, GarnetParams};

    #[test]
    fn small_report_passes() {
        let mdp = generate(&GarnetParams::new(6, 2, 2, 0.8, 1)).unwrap();
        let config = VerifyConfig {
            alpha: 0.8,
            iterations: 10,
            samples_per_update: 2,
            seeds: vec![0, 1],
            delta: 0.2,
        };
        let report = verify_lemmas(&mdp, &config).unwrap();
        assert!(report.passed, "{report:#?}");
        assert_eq!(report.lemmas[1].checks, 2 * 11);
        assert_eq!(report.lemmas[3].checks, 2 * 10);
        assert_eq!(report.violation_rates.runs, 2);
    }

    #[test]
    fn alpha_one_marks_a_inf_bounds_unavailable() {
        let mdp = generate(&GarnetParams::new(5, 2, 2, 0.8, 1)).unwrap();
        let config = VerifyConfig {
            alpha: 1.0,
            iterations: 5,
            samples_per_update: 1,
            seeds: vec![3],
            delta: 0.2,
        };
        let report = verify_lemmas(&mdp, &config).unwrap();
        assert!(!report.lemmas[0].available && report.lemmas[0].checks == 0);
        assert!(report.passed);
        assert!(report.violation_rates.e1.is_none());
    }
}
