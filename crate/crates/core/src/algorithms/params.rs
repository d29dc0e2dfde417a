//! Iteration and sample counts prescribed by the two sample-complexity
//! guarantees. Logarithms are natural; `K` is computed first and then fed
//! into `M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Guarantee for the non-stationary policy `π'_K` (`α = γ`).
    NonStationary,
    /// Guarantee for the last policy `π_K` (`α = 1 − (1 − γ)²`).
    LastPolicy,
}

impl Regime {
    pub fn from_theorem(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Regime::NonStationary),
            2 => Ok(Regime::LastPolicy),
            _ => Err(Error::InvalidParameter(format!("theorem must be 1 or 2, got {n}"))),
        }
    }
}

/// The constants `c1..c4`; only existence is known, so all default to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub regime: Regime,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub constants: Constants,
    pub alpha: f64,
    pub iterations: u64,
    pub samples_per_update: u64,
    /// Set when `ε` exceeds the range the guarantee assumes.
    pub warnings: Vec<String>,
}

impl TheoremParams {
    /// `K · M · X · A`.
    pub fn total_samples(&self, num_states: usize, num_actions: usize) -> u128 {
        self.iterations as u128 * self.samples_per_update as u128 * (num_states * num_actions) as u128
    }
}

#[allow(clippy::too_many_arguments)]
pub fn theorem_params(
    regime: Regime,
    gamma: f64,
    num_states: usize,
    num_actions: usize,
    epsilon: f64,
    delta: f64,
    constants: Constants,
) -> Result<TheoremParams> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if num_states == 0 || num_actions == 0 {
        return Err(Error::InvalidParameter("state and action counts must be positive".into()));
    }
    let Constants { c1, c2, c3, c4 } = constants;
    if [c1, c2, c3, c4].iter().any(|c| c.is_nan() || *c <= 0.0) {
        return Err(Error::InvalidParameter("constants c1..c4 must be positive".into()));
    }

    let h = 1.0 / (1.0 - gamma);
    let xa = (num_states * num_actions) as f64;
    let mut warnings = Vec::new();
    let (alpha, k_factor, c_k, m_scale) = match regime {
        Regime::NonStationary => {
            if epsilon > 1.0 / h.sqrt() {
                warnings.push(format!(
                    "epsilon {epsilon} exceeds 1/sqrt(H) = {:.6}; the non-stationary guarantee assumes epsilon <= 1/sqrt(H)",
                    1.0 / h.sqrt()
                ));
            }
            (gamma, 3.0, c1, c2 * h * h)
        }
        Regime::LastPolicy => {
            if epsilon > 1.0 / h {
                warnings.push(format!(
                    "epsilon {epsilon} exceeds 1/H = {:.6}; the last-policy guarantee assumes epsilon <= 1/H",
                    1.0 / h
                ));
            }
            (1.0 - (1.0 - gamma).powi(2), 5.0, c3, c4 * h)
        }
    };
    let k = (k_factor / (1.0 - alpha) * (c_k * h / epsilon).ln() + 2.0).ceil();
    let m = (m_scale / (epsilon * epsilon) * (16.0 * k * xa / delta).ln()).ceil();
    Ok(TheoremParams {
        regime,
        gamma,
        epsilon,
        delta,
        constants,
        alpha,
        iterations: k as u64,
        samples_per_update: m as u64,
        warnings,
    })
}
