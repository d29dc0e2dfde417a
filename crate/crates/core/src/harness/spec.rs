//! TOML experiment specifications.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{Beta, MdviConfig, QLearningConfig};
use crate::error::{Error, Result};
use crate::garnet::{generate, GarnetParams};
use crate::mdp::TabularMdp;

/// Where each seed's MDP comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum MdpSource {
    /// A fresh Garnet per seed, or one shared Garnet when `mdp_seed` is set.
    Garnet {
        states: usize,
        actions: usize,
        branching: usize,
        discount: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mdp_seed: Option<u64>,
    },
    /// One MDP loaded from JSON, shared by all seeds.
    File { path: PathBuf },
}

impl MdpSource {
    pub fn load(&self, seed: u64, base_dir: &Path) -> Result<TabularMdp> {
        match self {
            MdpSource::Garnet {
                states,
                actions,
                branching,
                discount,
                mdp_seed,
            } => generate(&GarnetParams::new(
                *states,
                *actions,
                *branching,
                *discount,
                mdp_seed.unwrap_or(seed),
            )),
            MdpSource::File { path } => TabularMdp::load(base_dir.join(path)),
        }
    }

    /// True when every seed sees the same MDP.
    pub fn is_shared(&self) -> bool {
        !matches!(self, MdpSource::Garnet { mdp_seed: None, .. })
    }
}

fn default_beta() -> Beta {
    Beta::Infinite
}

fn one() -> usize {
    1
}

fn default_rate() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Mdvi {
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: Beta,
        iterations: usize,
        #[serde(default = "one")]
        samples_per_update: usize,
        #[serde(default)]
        exact_mode: bool,
    },
    Qlearning {
        iterations: usize,
        #[serde(default = "one")]
        samples_per_update: usize,
        #[serde(default = "default_rate")]
        rate_exponent: f64,
    },
}

impl AlgorithmSpec {
    pub fn iterations(&self) -> usize {
        match self {
            AlgorithmSpec::Mdvi { iterations, .. } | AlgorithmSpec::Qlearning { iterations, .. } => {
                *iterations
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Mdvi {
                alpha,
                beta,
                samples_per_update,
                exact_mode,
                ..
            } => format!(
                "mdvi(alpha={alpha},beta={beta},M={samples_per_update}{})",
                if *exact_mode { ",exact" } else { "" }
            ),
            AlgorithmSpec::Qlearning {
                samples_per_update,
                rate_exponent,
                ..
            } => format!("qlearning(w={rate_exponent},M={samples_per_update})"),
        }
    }

    pub fn mdvi_config(&self, seed: u64) -> Option<MdviConfig> {
        match self {
            AlgorithmSpec::Mdvi {
                alpha,
                beta,
                iterations,
                samples_per_update,
                exact_mode,
            } => Some(MdviConfig {
                alpha: *alpha,
                beta: *beta,
                iterations: *iterations,
                samples_per_update: *samples_per_update,
                seed,
                exact_mode: *exact_mode,
            }),
            AlgorithmSpec::Qlearning { .. } => None,
        }
    }

    pub fn qlearning_config(&self, seed: u64) -> Option<QLearningConfig> {
        match self {
            AlgorithmSpec::Qlearning {
                iterations,
                samples_per_update,
                rate_exponent,
            } => Some(QLearningConfig {
                iterations: *iterations,
                samples_per_update: *samples_per_update,
                rate_exponent: *rate_exponent,
                seed,
            }),
            AlgorithmSpec::Mdvi { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AlgorithmSpec::Mdvi { .. } => self.mdvi_config(0).unwrap().validate(),
            AlgorithmSpec::Qlearning { iterations, .. } => {
                if *iterations == 0 {
                    return Err(Error::InvalidParameter("iterations must be at least 1".into()));
                }
                self.qlearning_config(0).unwrap().validate()
            }
        }
    }
}

/// Seeds as an explicit list or a count `n` meaning `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

fn default_record_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Error thresholds; sorted into descending order on load.
    pub errors: Vec<f64>,
    pub seeds: Seeds,
    /// Stop a run before an iteration that would exceed this many samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_samples: Option<u64>,
    /// Write a record every this many iterations (the last one is always written).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Also track `‖v* − v^{π'_k}‖_∞` (greedy MDVI only).
    #[serde(default)]
    pub nonstationary: bool,
    /// Fill the `wall_ms` column. Off by default so outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
    /// End a run once every threshold has been crossed.
    #[serde(default)]
    pub stop_after_all_crossed: bool,
    pub mdp: MdpSource,
    pub algorithm: AlgorithmSpec,
}

impl ExperimentSpec {
    /// Parses, sorts the error grid and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.normalize()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// TOML with every default written out.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn normalize(&mut self) -> Result<()> {
        if self.errors.is_empty() {
            return Err(Error::Config("error grid must be nonempty".into()));
        }
        if let Some(bad) = self.errors.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!("error thresholds must be positive, got {bad}")));
        }
        self.errors.sort_by(|a, b| b.total_cmp(a));
        self.errors.dedup();
        if self.seeds.resolve().is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if self.nonstationary {
            match &self.algorithm {
                AlgorithmSpec::Mdvi { beta, .. } if beta.is_infinite() => {}
                _ => {
                    return Err(Error::Config(
                        "nonstationary tracking needs MDVI with beta = inf".into(),
                    ))
                }
            }
        }
        if let MdpSource::Garnet {
            states,
            actions,
            branching,
            discount,
            ..
        } = &self.mdp
        {
            GarnetParams::new(*states, *actions, *branching, *discount, 0).validate()?;
        }
        self.algorithm.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
errors = [0.01, 1.0, 0.1]
seeds = 3

[mdp]
source = "garnet"
states = 8
actions = 2
branching = 2
discount = 0.9

[algorithm]
kind = "mdvi"
alpha = 0.9
iterations = 20
exact_mode = true
"#;

    #[test]
    fn parses_and_sorts_errors() {
        let spec = ExperimentSpec::from_toml_str(MINIMAL).unwrap();
        assert_eq!(spec.errors, vec![1.0, 0.1, 0.01]);
        assert_eq!(spec.seeds.resolve(), vec![0, 1, 2]);
        assert_eq!(spec.record_every, 1);
        match spec.algorithm {
            AlgorithmSpec::Mdvi { beta, samples_per_update, .. } => {
                assert_eq!(beta, Beta::Infinite);
                assert_eq!(samples_per_update, 1);
            }
            _ => panic!("wrong algorithm"),
        }
    }

    #[test]
    fn resolved_echo_round_trips() {
        let spec = ExperimentSpec::from_toml_str(MINIMAL).unwrap();
        let echoed = spec.to_toml_string().unwrap();
        assert!(echoed.contains("record_every = 1"));
        assert_eq!(ExperimentSpec::from_toml_str(&echoed).unwrap(), spec);
    }

    #[test]
    fn rejects_bad_specs() {
        let empty = MINIMAL.replace("errors = [0.01, 1.0, 0.1]", "errors = []");
        assert!(ExperimentSpec::from_toml_str(&empty).is_err());
        let typo = MINIMAL.replace("alpha = 0.9", "alhpa = 0.9");
        let err = ExperimentSpec::from_toml_str(&typo).unwrap_err().to_string();
        assert!(err.contains("alhpa") || err.contains("alpha"), "{err}");
        let bad_alpha = MINIMAL.replace("alpha = 0.9", "alpha = 1.5");
        assert!(ExperimentSpec::from_toml_str(&bad_alpha).is_err());
    }
}
