//! Geometric series constants used by the error-propagation bounds.

use serde::{Deserialize, Serialize};

/// `A_k = Σ_{j<k} α^j`.
pub fn a_k(alpha: f64, k: usize) -> f64 {
    if alpha == 1.0 {
        k as f64
    } else {
        (1.0 - alpha.powi(k as i32)) / (1.0 - alpha)
    }
}

/// `A_∞ = 1 / (1 − α)`; undefined at `α = 1`.
pub fn a_inf(alpha: f64) -> Option<f64> {
    (alpha < 1.0).then(|| 1.0 / (1.0 - alpha))
}

/// `A_{γ,k} = Σ_{j=0}^{k−1} γ^{k−j} α^j`.
///
/// Closed form `γ (α^k − γ^k) / (α − γ)`, or `k γ^k` when `α = γ`. Close
/// pairs fall back to summation to avoid cancellation.
pub fn a_gamma_k(alpha: f64, gamma: f64, k: usize) -> f64 {
    let gap = alpha - gamma;
    if gap.abs() <= 1e-14 {
        k as f64 * gamma.powi(k as i32)
    } else if gap.abs() < 1e-2 {
        (0..k)
            .map(|j| gamma.powi((k - j) as i32) * alpha.powi(j as i32))
            .sum()
    } else {
        gamma * (alpha.powi(k as i32) - gamma.powi(k as i32)) / gap
    }
}

/// `Σ_{j=0}^{k−1} γ^{k−1−j} α^j`, the per-step drift bound on `w_k − w_{k−1}`.
///
/// Satisfies `B_1 = 1` and `B_k = α^{k−1} + γ B_{k−1}`; equals `A_{γ,k} / γ`
/// for `γ > 0`.
pub fn drift_bound(alpha: f64, gamma: f64, k: usize) -> f64 {
    (0..k).fold(0.0, |acc, j| gamma * acc + alpha.powi(j as i32))
}

/// Series constants and log terms for one run configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConstants {
    pub a_k: f64,
    pub a_inf: Option<f64>,
    pub a_gamma_k: f64,
    pub iota1: f64,
    pub iota2: f64,
}

impl SeriesConstants {
    /// `ι₁ = ln(8 K X A / δ)` and `ι₂ = ln(16 K X A / δ)`.
    pub fn new(
        alpha: f64,
        gamma: f64,
        k: usize,
        iterations: usize,
        num_states: usize,
        num_actions: usize,
        delta: f64,
    ) -> Self {
        let kxa = (iterations * num_states * num_actions) as f64;
        Self {
            a_k: a_k(alpha, k),
            a_inf: a_inf(alpha),
            a_gamma_k: a_gamma_k(alpha, gamma, k),
            iota1: (8.0 * kxa / delta).ln(),
            iota2: (16.0 * kxa / delta).ln(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn a_gamma_k_examples() {
        assert_eq!(a_gamma_k(0.5, 0.9, 0), 0.0);
        assert_abs_diff_eq!(a_gamma_k(0.5, 0.9, 3), 0.729 + 0.405 + 0.225, epsilon = 1e-14);
        assert_abs_diff_eq!(a_gamma_k(0.5, 0.9, 3), 1.359, epsilon = 1e-12);
        assert_abs_diff_eq!(a_gamma_k(0.9, 0.9, 2), 1.62, epsilon = 1e-14);
        assert_abs_diff_eq!(a_gamma_k(0.0, 0.9, 4), 0.9f64.powi(4), epsilon = 1e-15);
    }

    #[test]
    fn drift_bound_recursion() {
        let (alpha, gamma) = (0.7, 0.9);
        assert_eq!(drift_bound(alpha, gamma, 0), 0.0);
        assert_eq!(drift_bound(alpha, gamma, 1), 1.0);
        for k in 2..30 {
            let rec = alpha.powi(k as i32 - 1) + gamma * drift_bound(alpha, gamma, k - 1);
            assert_abs_diff_eq!(drift_bound(alpha, gamma, k), rec, epsilon = 1e-13);
            assert_abs_diff_eq!(drift_bound(alpha, gamma, k), a_gamma_k(alpha, gamma, k) / gamma, epsilon = 1e-12);
        }
        assert_eq!(drift_bound(0.5, 0.0, 3), 0.25);
    }

    #[test]
    fn a_k_and_a_inf() {
        assert_abs_diff_eq!(a_k(0.5, 3), 1.75, epsilon = 1e-15);
        assert_eq!(a_k(1.0, 7), 7.0);
        assert_eq!(a_inf(1.0), None);
        assert_abs_diff_eq!(a_inf(0.9).unwrap(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn iota_terms() {
        let c = SeriesConstants::new(0.9, 0.9, 1, 10, 8, 2, 0.1);
        assert_abs_diff_eq!(c.iota1, 12800f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.iota2, 25600f64.ln(), epsilon = 1e-12);
    }
}
