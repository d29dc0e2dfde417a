//! Deterministic error-propagation bounds evaluated on a realized greedy
//! MDVI trace.
//!
//! Every bound here holds pointwise given the realized errors `ε_k`, so a
//! violation beyond [`LEMMA_SLACK`] means either the run or the checker is
//! wrong. Chains of the form `π_i P π_{i−1} P ⋯ π_j f` are evaluated with the
//! state kernels `S_t = π_t P`: `S_i S_{i−1} ⋯ S_{j+1} (π_j f)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bellman::{
    self, eval_nonstationary, mat_vec, state_transition_matrix, OptimalSolution, Resolvent,
};
use crate::diagnostics::series::{a_gamma_k, a_inf, drift_bound};
use crate::diagnostics::trace::{check_indexing, IterationTrace};
use crate::error::{Error, Result};
use crate::mdp::{DetPolicy, NonStationaryPolicy, QTable, TabularMdp, VTable};

/// Absolute slack on every elementwise comparison.
pub const LEMMA_SLACK: f64 = 1e-8;

/// Bracket `lower ≤ quantity ≤ upper` with the worst margins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub k: usize,
    pub quantity: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// `min_x (quantity − lower)`; `+∞` when there is no lower side.
    pub lower_slack: f64,
    /// `min_x (upper − quantity)`; `+∞` when there is no upper side.
    pub upper_slack: f64,
}

impl BoundCheck {
    fn new(k: usize, quantity: VTable, lower: Option<VTable>, upper: Option<VTable>) -> Self {
        let lower_slack = lower.as_ref().map_or(f64::INFINITY, |l| (&quantity - l).min());
        let upper_slack = upper.as_ref().map_or(f64::INFINITY, |u| (u - &quantity).min());
        Self {
            k,
            quantity: quantity.into_vec(),
            lower: lower.map(VTable::into_vec),
            upper: upper.map(VTable::into_vec),
            lower_slack,
            upper_slack,
        }
    }

    pub fn lower_ok(&self) -> bool {
        self.lower_slack >= -LEMMA_SLACK
    }

    pub fn upper_ok(&self) -> bool {
        self.upper_slack >= -LEMMA_SLACK
    }

    pub fn passed(&self) -> bool {
        self.lower_ok() && self.upper_ok()
    }

    pub fn worst_slack(&self) -> f64 {
        self.lower_slack.min(self.upper_slack)
    }
}

/// Results of the value-magnitude, `Δ_k` and `v*−v_k` brackets at one `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaAndValueChecks {
    /// `−H ≤ v_k ≤ H` (slack `1e−10`).
    pub value_magnitude: BoundCheck,
    /// Bracket on `Δ_k = w_k − w_{k−1}`.
    pub delta: BoundCheck,
    /// Bracket on `v* − v_k`; the upper side needs `A_∞` and is absent at `α = 1`.
    pub value_error: BoundCheck,
}

impl DeltaAndValueChecks {
    pub fn passed(&self) -> bool {
        self.value_magnitude.lower_slack >= -1e-10
            && self.value_magnitude.upper_slack >= -1e-10
            && self.delta.passed()
            && self.value_error.passed()
    }
}

/// Precomputed kernels and values for checking bounds on one greedy run.
pub struct LemmaContext<'a> {
    mdp: &'a TabularMdp,
    trace: &'a [IterationTrace],
    alpha: f64,
    v_star: VTable,
    pi_star: DetPolicy,
    policies: Vec<DetPolicy>,
    kernels: Vec<DMatrix<f64>>,
    star_kernel: DMatrix<f64>,
    star_resolvent: Resolvent,
}

impl<'a> LemmaContext<'a> {
    pub fn new(
        mdp: &'a TabularMdp,
        optimal: &OptimalSolution,
        trace: &'a [IterationTrace],
        alpha: f64,
    ) -> Result<Self> {
        check_indexing(trace)?;
        let policies = trace
            .iter()
            .map(|t| t.policy.as_deterministic().cloned())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                Error::Unavailable("error-propagation bounds need greedy (beta = inf) policies".into())
            })?;
        let kernels = policies
            .iter()
            .map(|p| state_transition_matrix(mdp, p))
            .collect::<Result<Vec<_>>>()?;
        let star_resolvent = Resolvent::for_policy(mdp, &optimal.pi_star)?;
        Ok(Self {
            mdp,
            trace,
            alpha,
            v_star: optimal.v_star.clone(),
            pi_star: optimal.pi_star.clone(),
            star_kernel: star_resolvent.kernel().clone(),
            star_resolvent,
            policies,
            kernels,
        })
    }

    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    pub fn policies(&self) -> &[DetPolicy] {
        &self.policies
    }

    fn horizon(&self) -> f64 {
        self.mdp.horizon()
    }

    fn a_inf(&self, what: &str) -> Result<f64> {
        a_inf(self.alpha).ok_or_else(|| Error::Unavailable(format!("{what} requires alpha < 1")))
    }

    fn check_k(&self, k: usize, min: usize) -> Result<()> {
        if k < min || k > self.iterations() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} outside [{min}, {}]",
                self.iterations()
            )));
        }
        Ok(())
    }

    /// `S_hi S_{hi−1} ⋯ S_{hi−count+1} f`.
    fn chain(&self, hi: usize, count: usize, f: &VTable) -> VTable {
        let mut g = f.clone();
        for t in (hi + 1 - count)..=hi {
            g = mat_vec(&self.kernels[t], &g);
        }
        g
    }

    fn select(&self, t: usize, q: &QTable) -> VTable {
        self.policies[t].select(q)
    }

    fn eps(&self, k: usize) -> &QTable {
        &self.trace[k].eps
    }

    fn big_e(&self, k: usize) -> &QTable {
        &self.trace[k].big_e
    }

    /// `E'_m = ε_m − (1 − α) E_{m−1}`.
    fn e_prime(&self, m: usize) -> QTable {
        let mut out = self.eps(m).clone();
        out.add_scaled(-(1.0 - self.alpha), self.big_e(m - 1));
        out
    }

    /// `v^{π'_k}` (equal to `v^{π_0}` at `k = 0`).
    pub fn nonstationary_value(&self, k: usize) -> Result<VTable> {
        if k == 0 {
            return bellman::policy_evaluation(self.mdp, &self.policies[0]);
        }
        eval_nonstationary(self.mdp, &NonStationaryPolicy::from_sequence(&self.policies, k)?)
    }

    /// `Γ_k = A_∞^{−1} Σ_{j<k} γ^j (π_k P_{k−j}^{k−1} − π_* P_*^j) E_{k−j} + 2H(α^k + A_{γ,k}/A_∞)`.
    pub fn gamma_k(&self, k: usize) -> Result<VTable> {
        let a_inf = self.a_inf("Gamma_k")?;
        let gamma = self.mdp.discount();
        let h = self.horizon();
        let n = self.mdp.num_states();
        let mut sum = VTable::zeros(n);
        let mut star_power = DMatrix::<f64>::identity(n, n);
        for j in 0..k {
            let e = self.big_e(k - j);
            let along_run = self.chain(k, j, &self.select(k - j, e));
            let along_star = mat_vec(&star_power, &self.pi_star.select(e));
            sum.add_scaled(gamma.powi(j as i32), &(&along_run - &along_star));
            star_power = &star_power * &self.star_kernel;
        }
        let constant = 2.0 * h * (self.alpha.powi(k as i32) + a_gamma_k(self.alpha, gamma, k) / a_inf);
        Ok(sum.map(|v| v / a_inf + constant))
    }

    /// `0 ≤ v* − v^{π'_k} ≤ Γ_k`.
    pub fn check_nonstationary_bound(&self, k: usize) -> Result<BoundCheck> {
        self.check_k(k, 1)?;
        let gap = &self.v_star - &self.nonstationary_value(k)?;
        let upper = self.gamma_k(k)?;
        let n = gap.len();
        Ok(BoundCheck::new(k, gap, Some(VTable::zeros(n)), Some(upper)))
    }

    /// Right side of the last-policy error propagation:
    /// `2H(α^k + A_{γ,k}/A_∞) + A_∞^{−1}(N^{π_k}π_k − N^{π_*}π_*)E_k
    ///  + A_∞^{−1} Σ_{j=1}^k γ^j (N^{π_*}π_* P_{k+1−j}^k − N^{π_k}π_k P_{k−j}^{k−1}) E'_{k+1−j}`.
    pub fn last_policy_rhs(&self, k: usize) -> Result<VTable> {
        let a_inf = self.a_inf("last-policy bound")?;
        let gamma = self.mdp.discount();
        let h = self.horizon();
        let n = self.mdp.num_states();
        let own = Resolvent::new(self.kernels[k].clone(), gamma);

        let mut own_rhs = self.select(k, self.big_e(k));
        let mut star_rhs = self.pi_star.select(self.big_e(k));
        for j in 1..=k {
            let weight = gamma.powi(j as i32);
            let e_prime = self.e_prime(k + 1 - j);
            let through_run = self.chain(k, j - 1, &self.select(k + 1 - j, &e_prime));
            star_rhs.add_scaled(-weight, &mat_vec(&self.star_kernel, &through_run));
            own_rhs.add_scaled(-weight, &self.chain(k, j, &self.select(k - j, &e_prime)));
        }
        // own_rhs = π_k E_k − Σ γ^j π_k P E', star_rhs = π_* E_k − Σ γ^j π_* P E'
        let diff = &own.solve(&own_rhs)? - &self.star_resolvent.solve(&star_rhs)?;
        let constant = 2.0 * h * (self.alpha.powi(k as i32) + a_gamma_k(self.alpha, gamma, k) / a_inf);
        debug_assert_eq!(diff.len(), n);
        Ok(diff.map(|v| v / a_inf + constant))
    }

    /// `0 ≤ v* − v^{π_k} ≤` [`Self::last_policy_rhs`].
    pub fn check_last_policy_bound(&self, k: usize) -> Result<BoundCheck> {
        self.check_k(k, 0)?;
        let value = bellman::policy_evaluation(self.mdp, &self.policies[k])?;
        let gap = &self.v_star - &value;
        let upper = self.last_policy_rhs(k)?;
        let n = gap.len();
        Ok(BoundCheck::new(k, gap, Some(VTable::zeros(n)), Some(upper)))
    }

    /// Value magnitude, `Δ_k` and `v* − v_k` brackets at `k ≥ 1`.
    ///
    /// `Δ_k` lies in
    /// `[π_{k−1} Σ_j γ^j P_{k−1−j}^{k−2} E'_{k−j} − B_k, π_k Σ_j γ^j P_{k−j}^{k−1} E'_{k−j} + B_k]`
    /// with `B_k` from [`drift_bound`], and `v* − v_k` lies in
    /// `[−2γ^k H − Σ_j γ^j π_k P_{k−j}^{k−1} ε_{k−j}, Γ_{k−1} + 2Hγ^k − Σ_j γ^j π_{k−1} P_{k−1−j}^{k−2} ε_{k−j}]`.
    pub fn check_delta_and_v_bounds(&self, k: usize) -> Result<DeltaAndValueChecks> {
        self.check_k(k, 1)?;
        let gamma = self.mdp.discount();
        let h = self.horizon();
        let n = self.mdp.num_states();
        let v_k = self.trace[k].v.clone();

        let value_magnitude = BoundCheck::new(
            k,
            v_k.clone(),
            Some(VTable::constant(n, -h)),
            Some(VTable::constant(n, h)),
        );

        let drift = drift_bound(self.alpha, gamma, k);
        let mut delta_lo = VTable::zeros(n);
        let mut delta_hi = VTable::zeros(n);
        let mut eps_newer = VTable::zeros(n);
        let mut eps_older = VTable::zeros(n);
        for j in 0..k {
            let weight = gamma.powi(j as i32);
            let e_prime = self.e_prime(k - j);
            delta_hi.add_scaled(weight, &self.chain(k, j, &self.select(k - j, &e_prime)));
            delta_lo.add_scaled(weight, &self.chain(k - 1, j, &self.select(k - 1 - j, &e_prime)));
            let eps = self.eps(k - j);
            eps_newer.add_scaled(weight, &self.chain(k, j, &self.select(k - j, eps)));
            eps_older.add_scaled(weight, &self.chain(k - 1, j, &self.select(k - 1 - j, eps)));
        }
        let delta = BoundCheck::new(
            k,
            &self.trace[k].w - &self.trace[k - 1].w,
            Some(delta_lo.map(|v| v - drift)),
            Some(delta_hi.map(|v| v + drift)),
        );

        let tail = 2.0 * h * gamma.powi(k as i32);
        let v_lower = eps_newer.map(|v| -tail - v);
        let v_upper = match a_inf(self.alpha) {
            Some(_) => {
                let gamma_prev = self.gamma_k(k - 1)?;
                Some(gamma_prev.zip_map(&eps_older, |g, e| g + tail - e))
            }
            None => None,
        };
        let value_error = BoundCheck::new(k, &self.v_star - &v_k, Some(v_lower), v_upper);

        Ok(DeltaAndValueChecks {
            value_magnitude,
            delta,
            value_error,
        })
    }

    /// `‖v* − v^{π'_k}‖_∞` divided by its constant-free coarse bound
    /// `2H(α^k + A_{γ,k}/A_∞) + (2/A_∞) Σ_{j<k} γ^j ‖E_{k−j}‖_∞`.
    pub fn coarse_nonstationary_ratio(&self, k: usize) -> Result<f64> {
        let a_inf = self.a_inf("coarse bound")?;
        let gamma = self.mdp.discount();
        let gap = (&self.v_star - &self.nonstationary_value(k)?).sup_norm();
        let errors: f64 = (0..k)
            .map(|j| gamma.powi(j as i32) * self.big_e(k - j).sup_norm())
            .sum();
        let bound = 2.0 * self.horizon() * (self.alpha.powi(k as i32) + a_gamma_k(self.alpha, gamma, k) / a_inf)
            + 2.0 * errors / a_inf;
        Ok(gap / bound)
    }

    /// `‖v* − v^{π_k}‖_∞` divided by the constant-free coarse bound
    /// `2H(α^k + A_{γ,k}/A_∞) + (2H/A_∞)(‖E_k‖ + Σ_j γ^j (‖ε_{k+1−j}‖ + (1−α)‖E_{k−j}‖))`.
    pub fn coarse_last_ratio(&self, k: usize) -> Result<f64> {
        let a_inf = self.a_inf("coarse bound")?;
        let gamma = self.mdp.discount();
        let h = self.horizon();
        let value = bellman::policy_evaluation(self.mdp, &self.policies[k])?;
        let gap = (&self.v_star - &value).sup_norm();
        let errors: f64 = self.big_e(k).sup_norm()
            + (1..=k)
                .map(|j| {
                    gamma.powi(j as i32)
                        * (self.eps(k + 1 - j).sup_norm()
                            + (1.0 - self.alpha) * self.big_e(k - j).sup_norm())
                })
                .sum::<f64>();
        let bound = 2.0 * h * (self.alpha.powi(k as i32) + a_gamma_k(self.alpha, gamma, k) / a_inf)
            + 2.0 * h * errors / a_inf;
        Ok(gap / bound)
    }
}
