//! Per-seed runs, first-crossing sample counts and their aggregation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::records::{save_records, RunRecord};
use super::spec::{AlgorithmSpec, ExperimentSpec};
use crate::algorithms::{Mdvi, QLearning};
use crate::bellman::{apply_p, exact_optimal, policy_evaluation, policy_q_values};
use crate::error::{Error, Result};
use crate::mdp::{DetPolicy, Policy, QTable, TabularMdp, VTable};

/// Version of the sweep JSON layout.
pub const SWEEP_SCHEMA_VERSION: u32 = 1;

/// Tolerance used for `v*` in every sweep.
pub const OPTIMAL_TOL: f64 = 1e-10;

/// Seed of the sampling stream for a run; kept apart from the seed that
/// generates the run's Garnet.
pub fn sampler_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15)
}

enum Learner<'a> {
    Mdvi(Mdvi<'a>),
    Q(QLearning<'a>),
}

impl Learner<'_> {
    fn iteration(&self) -> usize {
        match self {
            Learner::Mdvi(m) => m.state().iteration,
            Learner::Q(q) => q.iteration(),
        }
    }

    fn samples(&self) -> u64 {
        match self {
            Learner::Mdvi(m) => m.state().samples_used,
            Learner::Q(q) => q.samples_used(),
        }
    }

    fn policy(&self) -> Policy {
        match self {
            Learner::Mdvi(m) => m.policy(),
            Learner::Q(q) => Policy::Deterministic(q.policy()),
        }
    }

    fn step(&mut self) {
        match self {
            Learner::Mdvi(m) => m.step(),
            Learner::Q(q) => q.step(),
        }
    }
}

/// `q^{π'_k}` maintained incrementally: `q'_1 = q^{π_0}`, `q'_{k+1} = r + γ P (π_k q'_k)`.
struct NonStationaryTracker {
    q: Option<QTable>,
    previous: DetPolicy,
}

impl NonStationaryTracker {
    fn new(pi0: &DetPolicy) -> Self {
        Self {
            q: None,
            previous: pi0.clone(),
        }
    }

    /// Advances to iteration `k ≥ 1` given `π_k` and returns `v^{π'_k}`.
    fn advance(&mut self, mdp: &TabularMdp, current: &DetPolicy) -> Result<VTable> {
        let q = match self.q.take() {
            None => policy_q_values(mdp, &self.previous)?,
            Some(q) => {
                let mut next = mdp.rewards().clone();
                next.add_scaled(mdp.discount(), &apply_p(mdp, &self.previous.select(&q))?);
                next
            }
        };
        let v = current.select(&q);
        self.q = Some(q);
        self.previous = current.clone();
        Ok(v)
    }
}

/// Everything recorded for one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    /// First crossing per threshold in the spec's (descending) order.
    pub crossings: Vec<Option<Crossing>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub iteration: usize,
    pub samples: u64,
}

/// Runs one seed of `spec` against a precomputed `v*`.
pub fn run_seed_on(
    spec: &ExperimentSpec,
    mdp: &TabularMdp,
    v_star: &VTable,
    seed: u64,
) -> Result<SeedOutcome> {
    let started = Instant::now();
    let run_seed = sampler_seed(seed);
    let mut learner = match &spec.algorithm {
        AlgorithmSpec::Mdvi { .. } => Learner::Mdvi(Mdvi::new(mdp, spec.algorithm.mdvi_config(run_seed).unwrap())?),
        AlgorithmSpec::Qlearning { .. } => {
            Learner::Q(QLearning::new(mdp, spec.algorithm.qlearning_config(run_seed).unwrap())?)
        }
    };
    let per_iteration = match &spec.algorithm {
        AlgorithmSpec::Mdvi { samples_per_update, .. }
        | AlgorithmSpec::Qlearning { samples_per_update, .. } => {
            (*samples_per_update * mdp.num_states() * mdp.num_actions()) as u64
        }
    };
    let max_iterations = match spec.max_samples {
        Some(budget) => spec.algorithm.iterations().min((budget / per_iteration) as usize),
        None => spec.algorithm.iterations(),
    };

    let mut tracker = None;
    let mut crossings: Vec<Option<Crossing>> = vec![None; spec.errors.len()];
    let mut records = Vec::new();
    loop {
        let k = learner.iteration();
        let policy = learner.policy();
        let error = (v_star - &policy_evaluation(mdp, &policy)?).sup_norm();
        let ns_error = if spec.nonstationary {
            let det = policy
                .as_deterministic()
                .ok_or_else(|| Error::Unavailable("non-stationary error needs greedy policies".into()))?;
            let v_ns = match k {
                0 => {
                    tracker = Some(NonStationaryTracker::new(det));
                    policy_evaluation(mdp, det)?
                }
                _ => tracker.as_mut().unwrap().advance(mdp, det)?,
            };
            Some((v_star - &v_ns).sup_norm())
        } else {
            None
        };
        for (slot, eps) in crossings.iter_mut().zip(&spec.errors) {
            if slot.is_none() && error <= *eps {
                *slot = Some(Crossing {
                    iteration: k,
                    samples: learner.samples(),
                });
            }
        }
        let done = k >= max_iterations
            || (spec.stop_after_all_crossed && crossings.iter().all(Option::is_some));
        if k % spec.record_every == 0 || done {
            records.push(RunRecord {
                seed,
                k,
                samples: learner.samples(),
                sup_error_last: error,
                sup_error_ns: ns_error,
                wall_ms: spec
                    .timing
                    .then(|| started.elapsed().as_secs_f64() * 1e3),
            });
        }
        if done {
            break;
        }
        learner.step();
    }
    Ok(SeedOutcome {
        seed,
        records,
        crossings,
    })
}

/// `v*` as the exact value of the greedy policy of value iteration run to
/// [`OPTIMAL_TOL`]. Evaluating `π*` by the same linear solve used for `π_k`
/// makes the error of an optimal `π_k` exactly zero.
pub fn reference_value(mdp: &TabularMdp) -> Result<VTable> {
    let optimal = exact_optimal(mdp, OPTIMAL_TOL)?;
    policy_evaluation(mdp, &Policy::Deterministic(optimal.pi_star))
}

/// Loads the seed's MDP relative to `base_dir`, solves it and runs it.
pub fn run_seed(spec: &ExperimentSpec, seed: u64, base_dir: &Path) -> Result<SeedOutcome> {
    let mdp = spec.mdp.load(seed, base_dir)?;
    run_seed_on(spec, &mdp, &reference_value(&mdp)?, seed)
}

/// Runs every seed (in parallel when enabled) and returns outcomes in seed order.
pub fn run_all_seeds(spec: &ExperimentSpec, base_dir: &Path) -> Result<Vec<SeedOutcome>> {
    let mut seeds = spec.seeds.resolve();
    seeds.sort_unstable();
    seeds.dedup();
    map_seeds(&seeds, |seed| run_seed(spec, seed, base_dir))
}

#[cfg(feature = "parallel")]
pub(crate) fn map_seeds<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(s)).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_seeds<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T>,
{
    seeds.iter().map(|&s| f(s)).collect()
}

/// One `(ε, seed)` cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEntry {
    pub epsilon: f64,
    pub seed: u64,
    /// True when the threshold was never reached within the budget.
    pub censored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

/// Quantiles across seeds with censored runs ranked above every crossing.
/// A statistic that lands on a censored run is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingSummary {
    pub epsilon: f64,
    pub crossed: usize,
    pub censored: usize,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub algorithm: String,
    pub errors: Vec<f64>,
    pub seeds: Vec<u64>,
    pub entries: Vec<CrossingEntry>,
    pub summary: Vec<CrossingSummary>,
}

impl SweepResult {
    pub fn from_outcomes(spec: &ExperimentSpec, outcomes: &[SeedOutcome]) -> Self {
        let mut entries = Vec::new();
        let mut summary = Vec::new();
        for (i, &epsilon) in spec.errors.iter().enumerate() {
            let mut counts = Vec::with_capacity(outcomes.len());
            for o in outcomes {
                let c = o.crossings[i];
                entries.push(CrossingEntry {
                    epsilon,
                    seed: o.seed,
                    censored: c.is_none(),
                    iteration: c.map(|c| c.iteration),
                    samples: c.map(|c| c.samples),
                });
                counts.push(c.map_or(f64::INFINITY, |c| c.samples as f64));
            }
            counts.sort_by(f64::total_cmp);
            let finite = |q: f64| Some(q).filter(|v| v.is_finite());
            let crossed = counts.iter().filter(|c| c.is_finite()).count();
            summary.push(CrossingSummary {
                epsilon,
                crossed,
                censored: counts.len() - crossed,
                q25: finite(quantile(&counts, 0.25)),
                median: finite(quantile(&counts, 0.5)),
                q75: finite(quantile(&counts, 0.75)),
            });
        }
        Self {
            schema_version: SWEEP_SCHEMA_VERSION,
            algorithm: spec.algorithm.label(),
            errors: spec.errors.clone(),
            seeds: outcomes.iter().map(|o| o.seed).collect(),
            entries,
            summary,
        }
    }

    pub fn summary_for(&self, epsilon: f64) -> Option<&CrossingSummary> {
        self.summary.iter().find(|s| s.epsilon == epsilon)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let result: Self = serde_json::from_str(text)?;
        if result.schema_version != SWEEP_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported sweep schema version {}",
                result.schema_version
            )));
        }
        Ok(result)
    }
}

/// Linearly interpolated quantile of sorted data; infinite if it touches `+∞`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    if sorted[hi].is_infinite() {
        return f64::INFINITY;
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median treating censored runs as `+∞`, so a majority of censored runs
/// gives `+∞`.
pub fn censored_median(samples: &[Option<u64>]) -> f64 {
    let mut v: Vec<f64> = samples
        .iter()
        .map(|s| s.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn sample_complexity_sweep(spec: &ExperimentSpec, base_dir: &Path) -> Result<SweepResult> {
    let outcomes = run_all_seeds(spec, base_dir)?;
    Ok(SweepResult::from_outcomes(spec, &outcomes))
}

/// Mean and standard deviation of `sup_error_last` at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub k: usize,
    pub samples: u64,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n − 1`).
    pub std: f64,
}

/// Aligns runs on the iteration/sample axis and aggregates across seeds.
pub fn aggregate_convergence(outcomes: &[SeedOutcome]) -> Result<Vec<ConvergencePoint>> {
    if outcomes.len() < 2 {
        return Err(Error::InvalidParameter("convergence aggregation needs at least 2 seeds".into()));
    }
    let reference = &outcomes[0].records;
    for o in outcomes {
        let aligned = o.records.len() == reference.len()
            && o.records
                .iter()
                .zip(reference)
                .all(|(a, b)| a.k == b.k && a.samples == b.samples);
        if !aligned {
            return Err(Error::InvalidParameter(format!(
                "seed {} is not aligned with seed {} on the sample axis",
                o.seed, outcomes[0].seed
            )));
        }
    }
    let n = outcomes.len() as f64;
    Ok(reference
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let values: Vec<f64> = outcomes.iter().map(|o| o.records[i].sup_error_last).collect();
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            ConvergencePoint {
                k: r.k,
                samples: r.samples,
                runs: values.len(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect())
}

pub fn convergence_suite(spec: &ExperimentSpec, base_dir: &Path) -> Result<Vec<ConvergencePoint>> {
    if spec.stop_after_all_crossed {
        return Err(Error::Config(
            "convergence aggregation needs full-length runs; disable stop_after_all_crossed".into(),
        ));
    }
    aggregate_convergence(&run_all_seeds(spec, base_dir)?)
}

pub fn save_convergence(path: impl AsRef<Path>, points: &[ConvergencePoint]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Files written by [`run_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutputs {
    pub records: PathBuf,
    pub sweep: PathBuf,
    pub resolved_config: PathBuf,
    /// Present when the spec has at least two seeds and runs are aligned.
    pub convergence: Option<PathBuf>,
}

/// Runs the spec at `config_path` and writes `records.csv`, `sweep.json`,
/// `resolved.toml` and, for multi-seed specs, `convergence.csv` into `out_dir`.
pub fn run_experiment(config_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<ExperimentOutputs> {
    let config_path = config_path.as_ref();
    let spec = ExperimentSpec::load(config_path)?;
    let base_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    run_spec(&spec, base_dir, out_dir.as_ref())
}

pub fn run_spec(spec: &ExperimentSpec, base_dir: &Path, out_dir: &Path) -> Result<ExperimentOutputs> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let outcomes = run_all_seeds(spec, base_dir)?;
    let records: Vec<RunRecord> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();

    let paths = ExperimentOutputs {
        records: out_dir.join("records.csv"),
        sweep: out_dir.join("sweep.json"),
        resolved_config: out_dir.join("resolved.toml"),
        convergence: None,
    };
    save_records(&paths.records, &records)?;
    let sweep = SweepResult::from_outcomes(spec, &outcomes);
    write_text(&paths.sweep, &sweep.to_json_string()?)?;
    write_text(&paths.resolved_config, &spec.to_toml_string()?)?;

    let convergence = if outcomes.len() >= 2 {
        match aggregate_convergence(&outcomes) {
            Ok(points) => {
                let path = out_dir.join("convergence.csv");
                save_convergence(&path, &points)?;
                Some(path)
            }
            Err(e) => {
                log::warn!("skipping convergence.csv: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(ExperimentOutputs { convergence, ..paths })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
