//! Exact Bellman machinery: transition expectations, policy evaluation,
//! optimal values, predictive variances and discounted resolvents.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::error::{Error, Result};
use crate::mdp::{ActionDistribution, DetPolicy, NonStationaryPolicy, QTable, TabularMdp, VTable};

fn check_len(mdp: &TabularMdp, v: &VTable) -> Result<()> {
    if v.len() != mdp.num_states() {
        return Err(Error::Dimension(format!(
            "value table has length {}, MDP has {} states",
            v.len(),
            mdp.num_states()
        )));
    }
    Ok(())
}

fn check_q(mdp: &TabularMdp, q: &QTable) -> Result<()> {
    if q.shape() != (mdp.num_states(), mdp.num_actions()) {
        return Err(Error::Dimension(format!(
            "Q-table is {:?}, MDP is {}x{}",
            q.shape(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

/// `(P v)(x, a) = Σ_y P(y | x, a) v(y)`.
pub fn apply_p(mdp: &TabularMdp, v: &VTable) -> Result<QTable> {
    check_len(mdp, v)?;
    let (xs, acts) = (mdp.num_states(), mdp.num_actions());
    let values = mdp
        .transitions()
        .chunks(xs)
        .map(|row| row.iter().zip(v.iter()).map(|(p, v)| p * v).sum())
        .collect();
    QTable::from_vec(xs, acts, values)
}

/// `r + γ P v`.
pub fn backup(mdp: &TabularMdp, v: &VTable) -> Result<QTable> {
    let mut q = apply_p(mdp, v)?;
    let gamma = mdp.discount();
    for (qv, r) in q.values_mut().iter_mut().zip(mdp.rewards().values()) {
        *qv = r + gamma * *qv;
    }
    Ok(q)
}

/// `T^π q = r + γ P (π q)`.
pub fn bellman_backup<P>(mdp: &TabularMdp, policy: &P, q: &QTable) -> Result<QTable>
where
    P: ActionDistribution + ?Sized,
{
    check_q(mdp, q)?;
    policy.check_shape(mdp.num_states(), mdp.num_actions())?;
    backup(mdp, &policy.aggregate(q)?)
}

/// Optimal action values, state values and a greedy optimal policy.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalSolution {
    pub q_star: QTable,
    pub v_star: VTable,
    pub pi_star: DetPolicy,
}

const MAX_VALUE_ITERATIONS: usize = 10_000_000;

/// Value iteration to `‖q − q*‖_∞ ≤ tol`.
///
/// Stops once successive iterates differ by at most `tol (1 − γ) / (2γ)`,
/// which bounds the distance to the fixed point by `tol / 2`.
pub fn exact_optimal(mdp: &TabularMdp, tol: f64) -> Result<OptimalSolution> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let gamma = mdp.discount();
    let mut q = mdp.rewards().clone();
    if gamma > 0.0 {
        let threshold = tol * (1.0 - gamma) / (2.0 * gamma);
        let mut converged = false;
        for _ in 0..MAX_VALUE_ITERATIONS {
            let next = backup(mdp, &q.row_max())?;
            let change = (&next - &q).sup_norm();
            q = next;
            if change <= threshold {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Solver("value iteration did not converge".into()));
        }
    }
    Ok(OptimalSolution {
        v_star: q.row_max(),
        pi_star: DetPolicy::greedy(&q),
        q_star: q,
    })
}

/// State-to-state kernel `(πP)(x, y) = Σ_a π(a|x) P(y | x, a)`.
pub fn state_transition_matrix<P>(mdp: &TabularMdp, policy: &P) -> Result<DMatrix<f64>>
where
    P: ActionDistribution + ?Sized,
{
    policy.check_shape(mdp.num_states(), mdp.num_actions())?;
    let n = mdp.num_states();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        for a in 0..mdp.num_actions() {
            let w = policy.prob(x, a);
            if w == 0.0 {
                continue;
            }
            for (y, p) in mdp.transition_row(x, a).iter().enumerate() {
                m[(x, y)] += w * p;
            }
        }
    }
    Ok(m)
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &VTable) -> VTable {
    let out = m * DVector::from_column_slice(v.as_slice());
    VTable::new(out.iter().copied().collect())
}

/// LU factorization of `I − γ S` for a state kernel `S`, reusable across
/// right-hand sides.
pub struct Resolvent {
    kernel: DMatrix<f64>,
    discount: f64,
    lu: LU<f64, Dyn, Dyn>,
}

impl Resolvent {
    pub fn new(kernel: DMatrix<f64>, discount: f64) -> Self {
        let n = kernel.nrows();
        let system = DMatrix::identity(n, n) - &kernel * discount;
        Self {
            kernel,
            discount,
            lu: system.lu(),
        }
    }

    pub fn for_policy<P>(mdp: &TabularMdp, policy: &P) -> Result<Self>
    where
        P: ActionDistribution + ?Sized,
    {
        Ok(Self::new(state_transition_matrix(mdp, policy)?, mdp.discount()))
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Solves `(I − γ S) x = f` with one round of iterative refinement.
    pub fn solve(&self, f: &VTable) -> Result<VTable> {
        let n = self.kernel.nrows();
        if f.len() != n {
            return Err(Error::Dimension(format!(
                "right-hand side has length {}, expected {n}",
                f.len()
            )));
        }
        let b = DVector::from_column_slice(f.as_slice());
        let mut x = self
            .lu
            .solve(&b)
            .ok_or_else(|| Error::Solver("singular discounted system".into()))?;
        let residual = &b - (&x - (&self.kernel * &x) * self.discount);
        if let Some(correction) = self.lu.solve(&residual) {
            x += correction;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution".into()));
        }
        Ok(VTable::new(x.iter().copied().collect()))
    }

    /// Sup norm of `f − (I − γ S) x`.
    pub fn residual(&self, x: &VTable, f: &VTable) -> f64 {
        let sx = mat_vec(&self.kernel, x);
        (0..x.len())
            .map(|i| (f[i] - (x[i] - self.discount * sx[i])).abs())
            .fold(0.0, f64::max)
    }
}

/// `v^π`, the solution of `v = π r + γ (πP) v`, by dense LU.
pub fn policy_evaluation<P>(mdp: &TabularMdp, policy: &P) -> Result<VTable>
where
    P: ActionDistribution + ?Sized,
{
    let resolvent = Resolvent::for_policy(mdp, policy)?;
    let reward = policy.aggregate(mdp.rewards())?;
    let v = resolvent.solve(&reward)?;
    let residual = resolvent.residual(&v, &reward);
    if residual > 1e-10 * mdp.horizon() {
        return Err(Error::Solver(format!(
            "policy evaluation residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(v)
}

/// `q^π = r + γ P v^π`.
pub fn policy_q_values<P>(mdp: &TabularMdp, policy: &P) -> Result<QTable>
where
    P: ActionDistribution + ?Sized,
{
    backup(mdp, &policy_evaluation(mdp, policy)?)
}

/// `v^{π'} = π_k T^{π_{k−1}} ⋯ T^{π_1} q^{π_0}` for `head = (π_k, …, π_1)`.
pub fn eval_nonstationary(mdp: &TabularMdp, nsp: &NonStationaryPolicy) -> Result<VTable> {
    let (newest, older) = nsp
        .head()
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("non-stationary policy has an empty head".into()))?;
    let mut q = policy_q_values(mdp, nsp.tail())?;
    for policy in older.iter().rev() {
        q = bellman_backup(mdp, policy, &q)?;
    }
    newest.aggregate(&q)
}

/// `PVar(v)(x, a) = (P v²)(x, a) − (P v)²(x, a)` and its square root `σ(v)`.
///
/// Evaluated in the centered form `Σ_y P(y|x,a) (v(y) − (Pv)(x,a))²`, which is
/// algebraically identical and never negative.
pub fn pvar_sigma(mdp: &TabularMdp, v: &VTable) -> Result<(QTable, QTable)> {
    let mean = apply_p(mdp, v)?;
    let xs = mdp.num_states();
    let pvar_values: Vec<f64> = mdp
        .transitions()
        .chunks(xs)
        .zip(mean.values())
        .map(|(row, m)| {
            row.iter()
                .zip(v.iter())
                .map(|(p, val)| p * (val - m) * (val - m))
                .sum()
        })
        .collect();
    let pvar = QTable::from_vec(xs, mdp.num_actions(), pvar_values)?;
    let sigma = pvar.map(f64::sqrt);
    Ok((pvar, sigma))
}

/// Ordered product `S_i S_{i−1} ⋯ S_j` of the state kernels `S_t = π_t P`;
/// the identity when `i < j`.
pub fn compose_transitions(
    mdp: &TabularMdp,
    policies: &[DetPolicy],
    j: usize,
    i: usize,
) -> Result<DMatrix<f64>> {
    let n = mdp.num_states();
    if i < j {
        return Ok(DMatrix::identity(n, n));
    }
    if i >= policies.len() {
        return Err(Error::InvalidParameter(format!(
            "policy index {i} out of range for {} policies",
            policies.len()
        )));
    }
    let mut product = state_transition_matrix(mdp, &policies[i])?;
    for t in (j..i).rev() {
        product *= state_transition_matrix(mdp, &policies[t])?;
    }
    Ok(product)
}

/// `N^π f = (I − γ πP)^{−1} f = Σ_t (γ πP)^t f`.
pub fn apply_resolvent<P>(mdp: &TabularMdp, policy: &P, f: &VTable) -> Result<VTable>
where
    P: ActionDistribution + ?Sized,
{
    check_len(mdp, f)?;
    Resolvent::for_policy(mdp, policy)?.solve(f)
}
