//! Total-variance bound for a sequence of deterministic policies.
//!
//! With `q'_0 = q^{π_0}`, `q'_m = r + γ P v'_{m−1}` and `v'_m = π_m q'_m`,
//! the one-step deviations are `σ_m = σ(v'_{m−1})` for `m ≥ 1` and
//! `σ_0 = σ(v^{π_0})`. The weighted chain
//! `L_k = Σ_{j<k} γ^{j+1} P^{π_{k−1}} ⋯ P^{π_{k−j}} σ_{k−j}` never exceeds `√(2H³)`.

use serde::Serialize;

use crate::bellman::{apply_p, policy_q_values, pvar_sigma, Resolvent};
use crate::error::{Error, Result};
use crate::mdp::{ActionDistribution, DetPolicy, QTable, TabularMdp, VTable};

/// Absolute slack on the total-variance comparison.
pub const VARIANCE_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TotalVarianceCheck {
    pub k: usize,
    pub lhs: QTable,
    pub bound: f64,
    pub max_lhs: f64,
}

impl TotalVarianceCheck {
    pub fn passed(&self) -> bool {
        self.max_lhs <= self.bound + VARIANCE_SLACK
    }
}

/// `√(2H³)`.
pub fn total_variance_bound(gamma: f64) -> f64 {
    let h = 1.0 / (1.0 - gamma);
    (2.0 * h * h * h).sqrt()
}

fn check_sequence(mdp: &TabularMdp, policies: &[DetPolicy], needed: usize) -> Result<()> {
    if policies.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "need at least {needed} policies, got {}",
            policies.len()
        )));
    }
    for p in policies {
        if p.actions().len() != mdp.num_states() || p.num_actions() != mdp.num_actions() {
            return Err(Error::Dimension("policy does not match the MDP".into()));
        }
    }
    Ok(())
}

/// `q'_0, …, q'_{n−1}` for the policy prefix `π_0, …, π_{n−1}`.
pub fn nonstationary_q_sequence(
    mdp: &TabularMdp,
    policies: &[DetPolicy],
    n: usize,
) -> Result<Vec<QTable>> {
    check_sequence(mdp, policies, n.max(1))?;
    let gamma = mdp.discount();
    let mut out = Vec::with_capacity(n);
    let mut q = policy_q_values(mdp, &policies[0])?;
    for m in 0..n {
        if m > 0 {
            let v_prev = policies[m - 1].select(&q);
            let mut next = mdp.rewards().clone();
            next.add_scaled(gamma, &apply_p(mdp, &v_prev)?);
            q = next;
        }
        out.push(q.clone());
    }
    Ok(out)
}

/// `σ_0, …, σ_n` as defined in the module docs.
pub fn sigma_sequence(mdp: &TabularMdp, policies: &[DetPolicy], n: usize) -> Result<Vec<QTable>> {
    let qs = nonstationary_q_sequence(mdp, policies, n.max(1))?;
    let v0 = policies[0].select(&qs[0]);
    let mut out = vec![pvar_sigma(mdp, &v0)?.1];
    for m in 1..=n {
        let v = policies[m - 1].select(&qs[m - 1]);
        out.push(pvar_sigma(mdp, &v)?.1);
    }
    Ok(out)
}

/// `P^π g = P (π g)`.
fn p_pi(mdp: &TabularMdp, policy: &DetPolicy, g: &QTable) -> Result<QTable> {
    apply_p(mdp, &policy.select(g))
}

/// Evaluates `L_k` for `k ≥ 1` using `L_k = γ σ_k + γ P^{π_{k−1}} L_{k−1}`.
pub fn total_variance_check(
    mdp: &TabularMdp,
    policies: &[DetPolicy],
    k: usize,
) -> Result<TotalVarianceCheck> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    check_sequence(mdp, policies, k)?;
    let gamma = mdp.discount();
    let sigmas = sigma_sequence(mdp, policies, k)?;
    let mut lhs = QTable::zeros(mdp.num_states(), mdp.num_actions());
    for m in 1..=k {
        let mut next = &sigmas[m] * gamma;
        if m > 1 {
            next.add_scaled(gamma, &p_pi(mdp, &policies[m - 1], &lhs)?);
        }
        lhs = next;
    }
    let max_lhs = lhs.max_entry();
    Ok(TotalVarianceCheck {
        k,
        lhs,
        bound: total_variance_bound(gamma),
        max_lhs,
    })
}

/// Return variances `Σ_0², …, Σ_n²` of the non-stationary policy that plays
/// `π_{m−t}` at step `t ≤ m` and `π_0` afterwards, via
/// `Σ_m² = γ² σ_m² + γ² P^{π_{m−1}} Σ_{m−1}²`.
pub fn return_variance_sequence(
    mdp: &TabularMdp,
    policies: &[DetPolicy],
    n: usize,
) -> Result<Vec<QTable>> {
    let gamma = mdp.discount();
    let g2 = gamma * gamma;
    let sigmas = sigma_sequence(mdp, policies, n)?;
    let sigma0_sq = sigmas[0].map(|s| s * s);

    // π_0 Σ_0² solves u = γ² π_0 σ_0² + γ² S_0 u.
    let resolvent = Resolvent::for_policy(mdp, &policies[0])?;
    let kernel = resolvent.kernel().clone();
    let u = Resolvent::new(kernel, g2).solve(&policies[0].select(&sigma0_sq).map(|s| g2 * s))?;
    let mut base = &sigma0_sq * g2;
    base.add_scaled(g2, &apply_p(mdp, &u)?);

    let mut out = vec![base];
    for m in 1..=n {
        let mut next = sigmas[m].map(|s| g2 * s * s);
        next.add_scaled(g2, &p_pi(mdp, &policies[m - 1], &out[m - 1])?);
        out.push(next);
    }
    Ok(out)
}

/// Value of the policy sequence as a [`VTable`]: `v'_n = π_n q'_n`.
pub fn nonstationary_value_sequence(
    mdp: &TabularMdp,
    policies: &[DetPolicy],
    n: usize,
) -> Result<Vec<VTable>> {
    let qs = nonstationary_q_sequence(mdp, policies, n + 1)?;
    Ok(qs
        .iter()
        .enumerate()
        .map(|(m, q)| policies[m].select(q))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{compose_transitions, eval_nonstationary, mat_vec};
    use crate::garnet::{generate, GarnetParams};
    use crate::mdp::NonStationaryPolicy;
    use approx::assert_abs_diff_eq;

    fn policies(x: usize, a: usize, n: usize, salt: usize) -> Vec<DetPolicy> {
        (0..n)
            .map(|i| DetPolicy::new((0..x).map(|s| (s * 7 + i * 3 + salt) % a).collect(), a).unwrap())
            .collect()
    }

    #[test]
    fn bound_at_gamma_point_nine() {
        assert_abs_diff_eq!(total_variance_bound(0.9), 2000f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(total_variance_bound(0.9), 44.7214, epsilon = 1e-4);
    }

    #[test]
    fn deterministic_mdp_has_zero_lhs() {
        let mdp = generate(&GarnetParams::new(6, 2, 1, 0.9, 3)).unwrap();
        let check = total_variance_check(&mdp, &policies(6, 2, 10, 1), 10).unwrap();
        assert_eq!(check.max_lhs, 0.0);
        assert!(check.passed());
    }

    #[test]
    fn values_match_nonstationary_evaluation() {
        let mdp = generate(&GarnetParams::new(5, 3, 2, 0.8, 9)).unwrap();
        let pols = policies(5, 3, 6, 2);
        let vs = nonstationary_value_sequence(&mdp, &pols, 5).unwrap();
        for (k, v) in vs.iter().enumerate().skip(1) {
            let direct = eval_nonstationary(&mdp, &NonStationaryPolicy::from_sequence(&pols, k).unwrap()).unwrap();
            assert!((v - &direct).sup_norm() < 1e-12);
        }
    }

    #[test]
    fn horner_matches_explicit_chain() {
        let mdp = generate(&GarnetParams::new(5, 2, 3, 0.9, 4)).unwrap();
        let pols = policies(5, 2, 8, 0);
        let k = 7;
        let gamma = mdp.discount();
        let sigmas = sigma_sequence(&mdp, &pols, k).unwrap();
        let mut explicit = QTable::zeros(5, 2);
        for j in 0..k {
            let i = k - j;
            // P^{π_{k−1}} ⋯ P^{π_i} σ_i = P S_{k−1} ⋯ S_{i+1} (π_i σ_i)
            let chain = compose_transitions(&mdp, &pols, i + 1, k - 1).unwrap();
            let state = mat_vec(&chain, &pols[i].select(&sigmas[i]));
            let term = if j == 0 { sigmas[k].clone() } else { apply_p(&mdp, &state).unwrap() };
            explicit.add_scaled(gamma.powi(j as i32 + 1), &term);
        }
        let check = total_variance_check(&mdp, &pols, k).unwrap();
        assert!((&check.lhs - &explicit).sup_norm() < 1e-12);
    }

    #[test]
    fn stationary_return_variance_is_a_fixed_point() {
        let mdp = generate(&GarnetParams::new(4, 2, 2, 0.7, 5)).unwrap();
        let pols = vec![DetPolicy::first_action(4, 2); 4];
        let seq = return_variance_sequence(&mdp, &pols, 3).unwrap();
        for m in 1..=3 {
            assert!((&seq[m] - &seq[0]).sup_norm() < 1e-12);
        }
    }
}
