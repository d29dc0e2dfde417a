//! Sampled mirror descent value iteration in its `(s_k, w_k)` form.
//!
//! Each iteration forms `v_k = w_k − α w_{k−1}`, estimates
//! `q_{k+1} = r + γ P̂_k v_k` from `M` fresh next-state samples per `(x, a)`,
//! then accumulates `s_{k+1} = q_{k+1} + α s_k` and `w_{k+1} = soft_value(s_{k+1}, β)`.
//! Draws are consumed with `x` outer, `a` next and the `M` samples innermost.

use serde::{Deserialize, Serialize};

use super::sampling::GenerativeModel;
use super::softmax::{boltzmann_policy, soft_value, Beta};
use crate::bellman;
use crate::diagnostics::trace::{enrich_errors, IterationTrace};
use crate::error::{Error, Result};
use crate::mdp::{DetPolicy, Policy, QTable, TabularMdp, VTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdviConfig {
    pub alpha: f64,
    pub beta: Beta,
    pub iterations: usize,
    pub samples_per_update: usize,
    pub seed: u64,
    #[serde(default)]
    pub exact_mode: bool,
}

impl MdviConfig {
    /// Greedy-limit configuration (`β = ∞`) in sampled mode.
    pub fn greedy(alpha: f64, iterations: usize, samples_per_update: usize, seed: u64) -> Self {
        Self {
            alpha,
            beta: Beta::Infinite,
            iterations,
            samples_per_update,
            seed,
            exact_mode: false,
        }
    }

    pub fn exact(alpha: f64, iterations: usize) -> Self {
        Self {
            exact_mode: true,
            ..Self::greedy(alpha, iterations, 1, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if let Beta::Finite(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("beta must be positive, got {b}")));
            }
        }
        if self.iterations == 0 || self.samples_per_update == 0 {
            return Err(Error::InvalidParameter(
                "iterations and samples_per_update must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Accumulators after `iteration` updates.
#[derive(Clone, Debug, PartialEq)]
pub struct MdviState {
    pub iteration: usize,
    /// Latest action-value estimate `q_k` (zero before the first update).
    pub q: QTable,
    pub s: QTable,
    pub w: VTable,
    pub w_prev: VTable,
    /// Generative-model queries charged so far. Exact mode charges the same
    /// `M·X·A` per iteration so that sample axes line up across modes.
    pub samples_used: u64,
}

impl MdviState {
    pub fn initial(mdp: &TabularMdp) -> Self {
        let (xs, acts) = (mdp.num_states(), mdp.num_actions());
        Self {
            iteration: 0,
            q: QTable::zeros(xs, acts),
            s: QTable::zeros(xs, acts),
            w: VTable::zeros(xs),
            w_prev: VTable::zeros(xs),
            samples_used: 0,
        }
    }

    /// `v_k = w_k − α w_{k−1}`.
    pub fn value(&self, alpha: f64) -> VTable {
        self.w.zip_map(&self.w_prev, |w, wp| w - alpha * wp)
    }

    pub fn policy(&self, beta: Beta) -> Policy {
        boltzmann_policy(&self.s, beta)
    }
}

/// One MDVI update. `model` supplies samples unless `config.exact_mode`.
pub fn mdvi_iteration(
    mdp: &TabularMdp,
    state: &MdviState,
    config: &MdviConfig,
    model: &mut GenerativeModel<'_>,
) -> MdviState {
    let alpha = config.alpha;
    let v = state.value(alpha);
    let (xs, acts) = (mdp.num_states(), mdp.num_actions());
    let per_iteration = (config.samples_per_update * xs * acts) as u64;

    let q_next = if config.exact_mode {
        bellman::backup(mdp, &v).expect("state shapes match the MDP")
    } else {
        let gamma = mdp.discount();
        let m = config.samples_per_update;
        let mut q = QTable::zeros(xs, acts);
        for x in 0..xs {
            for a in 0..acts {
                let total: f64 = (0..m).map(|_| v[model.sample(x, a)]).sum();
                q[(x, a)] = mdp.reward(x, a) + gamma * total / m as f64;
            }
        }
        q
    };

    let mut s_next = q_next.clone();
    s_next.add_scaled(alpha, &state.s);
    let w_next = soft_value(&s_next, config.beta);
    MdviState {
        iteration: state.iteration + 1,
        q: q_next,
        s: s_next,
        w_prev: state.w.clone(),
        w: w_next,
        samples_used: state.samples_used + per_iteration,
    }
}

/// Streaming MDVI runner; owns its sampler so runs are reproducible from
/// `config.seed` alone.
pub struct Mdvi<'a> {
    mdp: &'a TabularMdp,
    config: MdviConfig,
    model: GenerativeModel<'a>,
    state: MdviState,
}

impl<'a> Mdvi<'a> {
    pub fn new(mdp: &'a TabularMdp, config: MdviConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            mdp,
            model: GenerativeModel::new(mdp, config.seed),
            state: MdviState::initial(mdp),
            config,
        })
    }

    pub fn step(&mut self) {
        self.state = mdvi_iteration(self.mdp, &self.state, &self.config, &mut self.model);
    }

    pub fn state(&self) -> &MdviState {
        &self.state
    }

    pub fn config(&self) -> &MdviConfig {
        &self.config
    }

    pub fn policy(&self) -> Policy {
        self.state.policy(self.config.beta)
    }

    /// Next-state queries actually issued to the simulator.
    pub fn queries_issued(&self) -> u64 {
        self.model.samples_used()
    }
}

/// Output of [`mdvi_run`]: `π_0, …, π_K` and one trace entry per `k = 0..=K`.
#[derive(Clone, Debug)]
pub struct MdviRun {
    pub config: MdviConfig,
    pub policies: Vec<Policy>,
    pub trace: Vec<IterationTrace>,
}

impl MdviRun {
    /// The policy sequence when `β = ∞`.
    pub fn deterministic_policies(&self) -> Option<Vec<DetPolicy>> {
        self.policies
            .iter()
            .map(|p| p.as_deterministic().cloned())
            .collect()
    }
}

/// Runs `K` iterations, recording `q_k, s_k, w_k, v_k, π_k` and the realized
/// errors `ε_k, E_k` (computed against the true `P`).
pub fn mdvi_run(mdp: &TabularMdp, config: &MdviConfig) -> Result<MdviRun> {
    let mut runner = Mdvi::new(mdp, config.clone())?;
    let alpha = config.alpha;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut record = |state: &MdviState| {
        trace.push(IterationTrace {
            k: state.iteration,
            q: state.q.clone(),
            s: state.s.clone(),
            w: state.w.clone(),
            v: state.value(alpha),
            eps: QTable::zeros(mdp.num_states(), mdp.num_actions()),
            big_e: QTable::zeros(mdp.num_states(), mdp.num_actions()),
            policy: state.policy(config.beta),
            samples_used: state.samples_used,
        });
    };
    record(runner.state());
    for _ in 0..config.iterations {
        runner.step();
        record(runner.state());
    }
    enrich_errors(mdp, &mut trace, alpha)?;
    let policies = trace.iter().map(|t| t.policy.clone()).collect();
    Ok(MdviRun {
        config: config.clone(),
        policies,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garnet::{generate, GarnetParams};

    #[test]
    fn first_update_returns_rewards() {
        let mdp = generate(&GarnetParams::new(5, 3, 2, 0.9, 11)).unwrap();
        let config = MdviConfig::greedy(0.7, 1, 3, 5);
        let mut runner = Mdvi::new(&mdp, config).unwrap();
        runner.step();
        assert_eq!(runner.state().q, *mdp.rewards());
        assert_eq!(runner.state().s, *mdp.rewards());
    }

    #[test]
    fn sampled_iteration_consumes_m_x_a_queries() {
        let mdp = generate(&GarnetParams::new(6, 2, 3, 0.9, 1)).unwrap();
        let mut runner = Mdvi::new(&mdp, MdviConfig::greedy(0.9, 4, 7, 3)).unwrap();
        for k in 1..=4u64 {
            runner.step();
            assert_eq!(runner.queries_issued(), k * 7 * 6 * 2);
            assert_eq!(runner.state().samples_used, k * 7 * 6 * 2);
        }
    }

    #[test]
    fn exact_mode_issues_no_queries() {
        let mdp = generate(&GarnetParams::new(4, 2, 2, 0.9, 1)).unwrap();
        let mut runner = Mdvi::new(&mdp, MdviConfig::exact(0.5, 3)).unwrap();
        runner.step();
        runner.step();
        assert_eq!(runner.queries_issued(), 0);
        assert_eq!(runner.state().samples_used, 2 * 4 * 2);
    }

    #[test]
    fn initial_policy_is_first_action() {
        let mdp = generate(&GarnetParams::new(4, 3, 2, 0.9, 1)).unwrap();
        let run = mdvi_run(&mdp, &MdviConfig::exact(0.5, 2)).unwrap();
        assert_eq!(run.policies.len(), 3);
        let pi0 = run.policies[0].as_deterministic().unwrap();
        assert_eq!(pi0, &DetPolicy::first_action(4, 3));
    }

    #[test]
    fn config_validation() {
        assert!(MdviConfig::greedy(1.0, 1, 1, 0).validate().is_ok());
        assert!(MdviConfig::greedy(1.1, 1, 1, 0).validate().is_err());
        assert!(MdviConfig::greedy(0.5, 0, 1, 0).validate().is_err());
        assert!(MdviConfig::greedy(0.5, 1, 0, 0).validate().is_err());
    }
}
