use crate::bellman::apply_p;
use crate::diagnostics::series::a_k;
use crate::error::{Error, Result};
use crate::mdp::{Policy, QTable, TabularMdp, VTable};

/// Snapshot of an MDVI run after `k` updates.
///
/// `eps` is `ε_k = γ P̂_{k−1} v_{k−1} − γ P v_{k−1}`, recovered as
/// `q_k − r − γ P v_{k−1}`; `big_e` is `E_k = Σ_{j ≤ k} α^{k−j} ε_j`.
/// Both are zero at `k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    pub k: usize,
    pub q: QTable,
    pub s: QTable,
    pub w: VTable,
    pub v: VTable,
    pub eps: QTable,
    pub big_e: QTable,
    pub policy: Policy,
    pub samples_used: u64,
}

pub(crate) fn check_indexing(trace: &[IterationTrace]) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    if let Some((i, t)) = trace.iter().enumerate().find(|(i, t)| t.k != *i) {
        return Err(Error::InvalidParameter(format!(
            "trace entry {i} records iteration {}",
            t.k
        )));
    }
    Ok(())
}

/// Fills `eps` and `big_e` in place from `q_k` and `v_{k−1}`.
pub fn enrich_errors(mdp: &TabularMdp, trace: &mut [IterationTrace], alpha: f64) -> Result<()> {
    check_indexing(trace)?;
    let gamma = mdp.discount();
    let (xs, acts) = (mdp.num_states(), mdp.num_actions());
    trace[0].eps = QTable::zeros(xs, acts);
    trace[0].big_e = QTable::zeros(xs, acts);
    for k in 1..trace.len() {
        let expected = apply_p(mdp, &trace[k - 1].v)?;
        let mut eps = &trace[k].q - mdp.rewards();
        eps.add_scaled(-gamma, &expected);
        let mut big_e = eps.clone();
        big_e.add_scaled(alpha, &trace[k - 1].big_e);
        trace[k].eps = eps;
        trace[k].big_e = big_e;
    }
    Ok(())
}

/// Returns a copy of `trace` with `ε_k` and `E_k` recomputed.
pub fn compute_eps_and_e(
    mdp: &TabularMdp,
    trace: &[IterationTrace],
    alpha: f64,
) -> Result<Vec<IterationTrace>> {
    let mut out = trace.to_vec();
    enrich_errors(mdp, &mut out, alpha)?;
    Ok(out)
}

/// `max_k ‖s_k − (A_k r + γ P w_{k−1} + E_k)‖_∞` over `k = 1..=K`.
pub fn check_s_identity(mdp: &TabularMdp, trace: &[IterationTrace], alpha: f64) -> Result<f64> {
    check_indexing(trace)?;
    let gamma = mdp.discount();
    let mut worst: f64 = 0.0;
    for k in 1..trace.len() {
        let mut rhs = mdp.rewards() * a_k(alpha, k);
        rhs.add_scaled(gamma, &apply_p(mdp, &trace[k - 1].w)?);
        rhs.add_scaled(1.0, &trace[k].big_e);
        worst = worst.max((&trace[k].s - &rhs).sup_norm());
    }
    Ok(worst)
}
