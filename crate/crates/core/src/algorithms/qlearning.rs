//! Synchronous sampled Q-learning baseline with step size `η_k = (k + 1)^{−w}`.

use serde::{Deserialize, Serialize};

use super::sampling::GenerativeModel;
use crate::error::{Error, Result};
use crate::mdp::{DetPolicy, QTable, TabularMdp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QLearningConfig {
    pub iterations: usize,
    pub samples_per_update: usize,
    pub rate_exponent: f64,
    pub seed: u64,
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.rate_exponent) {
            return Err(Error::InvalidParameter(format!(
                "rate exponent must lie in [0.5, 1], got {}",
                self.rate_exponent
            )));
        }
        if self.samples_per_update == 0 {
            return Err(Error::InvalidParameter("samples_per_update must be at least 1".into()));
        }
        Ok(())
    }

    pub fn step_size(&self, k: usize) -> f64 {
        ((k + 1) as f64).powf(-self.rate_exponent)
    }
}

pub struct QLearning<'a> {
    mdp: &'a TabularMdp,
    config: QLearningConfig,
    model: GenerativeModel<'a>,
    q: QTable,
    iteration: usize,
}

impl<'a> QLearning<'a> {
    pub fn new(mdp: &'a TabularMdp, config: QLearningConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            mdp,
            model: GenerativeModel::new(mdp, config.seed),
            q: QTable::zeros(mdp.num_states(), mdp.num_actions()),
            iteration: 0,
            config,
        })
    }

    pub fn step(&mut self) {
        let mdp = self.mdp;
        let gamma = mdp.discount();
        let m = self.config.samples_per_update;
        let next_max = self.q.row_max();
        let eta = self.config.step_size(self.iteration);
        let mut target = QTable::zeros(mdp.num_states(), mdp.num_actions());
        for x in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                let total: f64 = (0..m).map(|_| next_max[self.model.sample(x, a)]).sum();
                target[(x, a)] = mdp.reward(x, a) + gamma * total / m as f64;
            }
        }
        self.q = self.q.zip_map(&target, |q, t| (1.0 - eta) * q + eta * t);
        self.iteration += 1;
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn samples_used(&self) -> u64 {
        self.model.samples_used()
    }

    pub fn policy(&self) -> DetPolicy {
        DetPolicy::greedy(&self.q)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QLearningStep {
    pub k: usize,
    pub q: QTable,
    pub policy: DetPolicy,
    pub samples_used: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QLearningRun {
    pub policy: DetPolicy,
    pub trace: Vec<QLearningStep>,
}

pub fn q_learning_run(mdp: &TabularMdp, config: &QLearningConfig) -> Result<QLearningRun> {
    let mut learner = QLearning::new(mdp, config.clone())?;
    let snapshot = |l: &QLearning<'_>| QLearningStep {
        k: l.iteration(),
        q: l.q().clone(),
        policy: l.policy(),
        samples_used: l.samples_used(),
    };
    let mut trace = vec![snapshot(&learner)];
    for _ in 0..config.iterations {
        learner.step();
        trace.push(snapshot(&learner));
    }
    Ok(QLearningRun {
        policy: learner.policy(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize, w: f64) -> QLearningConfig {
        QLearningConfig {
            iterations: k,
            samples_per_update: 1,
            rate_exponent: w,
            seed: 0,
        }
    }

    #[test]
    fn harmonic_step_sizes() {
        let c = config(3, 1.0);
        assert_eq!(c.step_size(0), 1.0);
        assert_eq!(c.step_size(1), 0.5);
    }

    #[test]
    fn zero_iterations_give_first_action_policy() {
        let mdp = TabularMdp::new(3, 2, 0.9, vec![0.5; 6], [1.0, 0.0, 0.0].repeat(6)).unwrap();
        let run = q_learning_run(&mdp, &config(0, 1.0)).unwrap();
        assert_eq!(run.policy, DetPolicy::first_action(3, 2));
        assert_eq!(run.trace.len(), 1);
    }

    #[test]
    fn rate_exponent_is_validated() {
        assert!(config(1, 0.4).validate().is_err());
        assert!(config(1, 1.01).validate().is_err());
        assert!(config(1, 0.5).validate().is_ok());
    }
}
