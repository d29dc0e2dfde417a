//! Experiment orchestration: TOML specs, per-seed runs, sample-complexity
//! sweeps, convergence aggregation and the lemma verification report.

pub mod records;
pub mod spec;
pub mod sweep;
pub mod verify;

pub use records::{load_records, read_records, save_records, write_records, RunRecord};
pub use spec::{AlgorithmSpec, ExperimentSpec, MdpSource, Seeds};
pub use sweep::{
    aggregate_convergence, censored_median, convergence_suite, quantile, reference_value, run_all_seeds, run_experiment,
    run_seed, run_seed_on, run_spec, sample_complexity_sweep, sampler_seed, ConvergencePoint, Crossing,
    CrossingEntry, CrossingSummary, ExperimentOutputs, SeedOutcome, SweepResult, SWEEP_SCHEMA_VERSION,
};
pub use verify::{verify_lemmas, LemmaReport, LemmaSummary, VerifyConfig};
