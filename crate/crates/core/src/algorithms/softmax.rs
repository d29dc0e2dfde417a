use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mdp::{DetPolicy, Policy, QTable, StochPolicy, VTable};

/// Inverse temperature `β`; `Infinite` is the greedy limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn finite(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 {
            Ok(Beta::Finite(beta))
        } else if beta == f64::INFINITY {
            Ok(Beta::Infinite)
        } else {
            Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Beta::Infinite)
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Beta::Infinite),
            other => {
                let b: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse beta {s:?}")))?;
                Beta::finite(b)
            }
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(b) => serializer.serialize_f64(*b),
            Beta::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(b) => Beta::finite(b),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `β^{-1} log Σ_a exp(β s(x, a))` with max-shift; row max when `β = ∞`.
pub fn soft_value(s: &QTable, beta: Beta) -> VTable {
    match beta {
        Beta::Infinite => s.row_max(),
        Beta::Finite(b) => VTable::new(
            (0..s.num_states())
                .map(|x| log_sum_exp_scaled(s.row(x), b))
                .collect(),
        ),
    }
}

fn log_sum_exp_scaled(row: &[f64], beta: f64) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|v| (beta * (v - max)).exp()).sum();
    max + sum.ln() / beta
}

/// Policy with `π(a|x) ∝ exp(β s(x, a))`; greedy with lowest-index ties when
/// `β = ∞`.
pub fn boltzmann_policy(s: &QTable, beta: Beta) -> Policy {
    match beta {
        Beta::Infinite => Policy::Deterministic(DetPolicy::greedy(s)),
        Beta::Finite(b) => {
            let mut probs = s.clone();
            for x in 0..s.num_states() {
                let row = probs.row_mut(x);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.iter_mut().for_each(|v| *v = (b * (*v - max)).exp());
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= total);
            }
            Policy::Stochastic(
                StochPolicy::new(probs).expect("normalized exponentials form a simplex row"),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::ActionDistribution;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_action_soft_value_is_identity() {
        let s = QTable::from_rows(&[vec![3.25], vec![-1.5]]).unwrap();
        assert_eq!(soft_value(&s, Beta::Finite(0.37)).as_slice(), &[3.25, -1.5]);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn log_two_at_unit_beta() {
        let s = QTable::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(soft_value(&s, Beta::Finite(1.0))[0], 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(2f64.ln(), 0.693147, epsilon = 1e-6);
    }

    #[test]
    fn huge_scores_do_not_overflow() {
        let s = QTable::from_rows(&[vec![1e6, 1e6 - 1.0]]).unwrap();
        let v = soft_value(&s, Beta::Finite(10.0))[0];
        assert!(v.is_finite() && v >= 1e6);
    }

    #[test]
    fn two_point_softmax() {
        let s = QTable::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let p = boltzmann_policy(&s, Beta::Finite(1.0));
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(p.prob(0, 0), e / (e + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(0, 1), 1.0 / (e + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob(0, 0), 0.731059, epsilon = 1e-6);
    }

    #[test]
    fn tiny_beta_is_nearly_uniform() {
        let s = QTable::from_rows(&[vec![5.0, -3.0, 0.0]]).unwrap();
        let p = boltzmann_policy(&s, Beta::Finite(1e-8));
        for a in 0..3 {
            assert!((p.prob(0, a) - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn infinite_beta_ties_pick_lowest_index() {
        let s = QTable::from_rows(&[vec![2.0, 2.0, 1.0]]).unwrap();
        let p = boltzmann_policy(&s, Beta::Infinite);
        assert_eq!(p.as_deterministic().unwrap().actions(), &[0]);
    }

    #[test]
    fn beta_parsing() {
        assert_eq!("inf".parse::<Beta>().unwrap(), Beta::Infinite);
        assert_eq!("2.5".parse::<Beta>().unwrap(), Beta::Finite(2.5));
        assert!("0".parse::<Beta>().is_err());
        assert!("-1".parse::<Beta>().is_err());
        assert!("abc".parse::<Beta>().is_err());
    }
}
