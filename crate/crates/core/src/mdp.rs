//! Dense tabular MDPs, value tables and policies.
//!
//! Tables are stored row-major: a [`QTable`] indexes `(x, a)` at `x * A + a`
//! and transitions index `(x, a, y)` at `(x * A + a) * X + y`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on transition row sums for programmatically built MDPs.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Rows loaded from JSON may be off by at most this much; they are renormalized.
pub const LOAD_ROW_SUM_TOL: f64 = 1e-9;

/// A finite discounted MDP `(X, A, γ, r, P)` with rewards in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    rewards: QTable,
    transitions: Vec<f64>,
}

impl TabularMdp {
    /// Builds an MDP from flat row-major buffers, enforcing every invariant
    /// with the strict row-sum tolerance.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
    ) -> Result<Self> {
        Self::build(num_states, num_actions, discount, rewards, transitions, ROW_SUM_TOL, false)
    }

    fn build(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        rewards: Vec<f64>,
        mut transitions: Vec<f64>,
        row_tol: f64,
        renormalize: bool,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp(
                "state and action counts must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidMdp(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        let xa = num_states * num_actions;
        if rewards.len() != xa {
            return Err(Error::Dimension(format!(
                "rewards has {} entries, expected {xa}",
                rewards.len()
            )));
        }
        if transitions.len() != xa * num_states {
            return Err(Error::Dimension(format!(
                "transitions has {} entries, expected {}",
                transitions.len(),
                xa * num_states
            )));
        }
        for (i, &r) in rewards.iter().enumerate() {
            if !r.is_finite() || r.abs() > 1.0 {
                return Err(Error::InvalidMdp(format!(
                    "reward at (x={}, a={}) is {r}, outside [-1, 1]",
                    i / num_actions,
                    i % num_actions
                )));
            }
        }
        for (row_idx, row) in transitions.chunks_mut(num_states).enumerate() {
            let (x, a) = (row_idx / num_actions, row_idx % num_actions);
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::InvalidMdp(format!(
                    "transition row (x={x}, a={a}) has invalid entry {p}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > row_tol {
                return Err(Error::InvalidMdp(format!(
                    "transition row (x={x}, a={a}) sums to {sum}"
                )));
            }
            if renormalize && sum != 1.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            discount,
            rewards: QTable::from_vec(num_states, num_actions, rewards)?,
            transitions,
        })
    }

    /// Builds an MDP from nested `X×A` rewards and `X×A×X` transitions.
    pub fn from_nested(
        discount: f64,
        rewards: &[Vec<f64>],
        transitions: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let doc = MdpDocument {
            num_states: rewards.len(),
            num_actions: rewards.first().map_or(0, Vec::len),
            discount,
            rewards: rewards.to_vec(),
            transitions: transitions.to_vec(),
        };
        doc.into_mdp(ROW_SUM_TOL, false)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Effective horizon `H = 1 / (1 - γ)`.
    pub fn horizon(&self) -> f64 {
        1.0 / (1.0 - self.discount)
    }

    pub fn rewards(&self) -> &QTable {
        &self.rewards
    }

    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards[(x, a)]
    }

    /// Next-state distribution `P(· | x, a)`.
    pub fn transition_row(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Wire format of a [`TabularMdp`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl MdpDocument {
    fn into_mdp(self, row_tol: f64, renormalize: bool) -> Result<TabularMdp> {
        let (x_count, a_count) = (self.num_states, self.num_actions);
        if self.rewards.len() != x_count || self.rewards.iter().any(|row| row.len() != a_count) {
            return Err(Error::Dimension(format!(
                "rewards must be a {x_count}x{a_count} array"
            )));
        }
        let shape_ok = self.transitions.len() == x_count
            && self.transitions.iter().all(|per_action| {
                per_action.len() == a_count && per_action.iter().all(|row| row.len() == x_count)
            });
        if !shape_ok {
            return Err(Error::Dimension(format!(
                "transitions must be a {x_count}x{a_count}x{x_count} array"
            )));
        }
        let rewards = self.rewards.into_iter().flatten().collect();
        let transitions = self.transitions.into_iter().flatten().flatten().collect();
        TabularMdp::build(
            x_count,
            a_count,
            self.discount,
            rewards,
            transitions,
            row_tol,
            renormalize,
        )
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        doc.into_mdp(LOAD_ROW_SUM_TOL, true)
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(mdp: TabularMdp) -> Self {
        let (x_count, a_count) = (mdp.num_states, mdp.num_actions);
        let rewards = (0..x_count).map(|x| mdp.rewards.row(x).to_vec()).collect();
        let transitions = (0..x_count)
            .map(|x| (0..a_count).map(|a| mdp.transition_row(x, a).to_vec()).collect())
            .collect();
        MdpDocument {
            num_states: x_count,
            num_actions: a_count,
            discount: mdp.discount,
            rewards,
            transitions,
        }
    }
}

/// State-value function over `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VTable(Vec<f64>);

impl VTable {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(num_states: usize) -> Self {
        Self(vec![0.0; num_states])
    }

    pub fn constant(num_states: usize, c: f64) -> Self {
        Self(vec![c; num_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// `‖v‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.len(), other.len(), "VTable length mismatch");
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Self) {
        assert_eq!(self.len(), other.len(), "VTable length mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for VTable {
    type Output = f64;
    fn index(&self, x: usize) -> &f64 {
        &self.0[x]
    }
}

impl IndexMut<usize> for VTable {
    fn index_mut(&mut self, x: usize) -> &mut f64 {
        &mut self.0[x]
    }
}

impl Add for &VTable {
    type Output = VTable;
    fn add(self, rhs: &VTable) -> VTable {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &VTable {
    type Output = VTable;
    fn sub(self, rhs: &VTable) -> VTable {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &VTable {
    type Output = VTable;
    fn mul(self, rhs: f64) -> VTable {
        self.map(|v| v * rhs)
    }
}

/// State-action function over `X×A`; serializes as nested rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::constant(num_states, num_actions, 0.0)
    }

    pub fn constant(num_states: usize, num_actions: usize, c: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![c; num_states * num_actions],
        }
    }

    pub fn from_vec(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "{} values for a {num_states}x{num_actions} table",
                values.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(Error::Dimension("ragged Q-table rows".into()));
        }
        Self::from_vec(rows.len(), num_actions, rows.concat())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_states, self.num_actions)
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.num_actions..(x + 1) * self.num_actions]
    }

    pub fn row_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.values[x * self.num_actions..(x + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Row-wise maximum `x ↦ max_a q(x, a)`.
    pub fn row_max(&self) -> VTable {
        VTable::new(
            (0..self.num_states)
                .map(|x| self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "QTable shape mismatch");
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "QTable shape mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    /// Adds `v(x)` to every entry of row `x`.
    pub fn add_state_values(&self, v: &VTable) -> Self {
        assert_eq!(self.num_states, v.len(), "QTable/VTable length mismatch");
        let mut out = self.clone();
        for x in 0..self.num_states {
            out.row_mut(x).iter_mut().for_each(|q| *q += v[x]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl From<QTable> for Vec<Vec<f64>> {
    fn from(q: QTable) -> Self {
        (0..q.num_states).map(|x| q.row(x).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for QTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        QTable::from_rows(&rows)
    }
}

impl Index<(usize, usize)> for QTable {
    type Output = f64;
    fn index(&self, (x, a): (usize, usize)) -> &f64 {
        &self.values[x * self.num_actions + a]
    }
}

impl IndexMut<(usize, usize)> for QTable {
    fn index_mut(&mut self, (x, a): (usize, usize)) -> &mut f64 {
        &mut self.values[x * self.num_actions + a]
    }
}

impl Add for &QTable {
    type Output = QTable;
    fn add(self, rhs: &QTable) -> QTable {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &QTable {
    type Output = QTable;
    fn sub(self, rhs: &QTable) -> QTable {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &QTable {
    type Output = QTable;
    fn mul(self, rhs: f64) -> QTable {
        self.map(|v| v * rhs)
    }
}

/// Anything that assigns each state a distribution over actions.
pub trait ActionDistribution {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn prob(&self, x: usize, a: usize) -> f64;

    /// `(π q)(x) = Σ_a π(a|x) q(x, a)`.
    fn aggregate(&self, q: &QTable) -> Result<VTable> {
        self.check_shape(q.num_states(), q.num_actions())?;
        Ok(VTable::new(
            (0..q.num_states())
                .map(|x| {
                    q.row(x)
                        .iter()
                        .enumerate()
                        .map(|(a, v)| self.prob(x, a) * v)
                        .sum()
                })
                .collect(),
        ))
    }

    fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.num_states() != num_states || self.num_actions() != num_actions {
            return Err(Error::Dimension(format!(
                "policy is {}x{}, expected {num_states}x{num_actions}",
                self.num_states(),
                self.num_actions()
            )));
        }
        Ok(())
    }
}

/// Deterministic stationary policy.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DetPolicy {
    actions: Vec<usize>,
    num_actions: usize,
}

impl DetPolicy {
    pub fn new(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if let Some((x, a)) = actions.iter().enumerate().find(|(_, &a)| a >= num_actions) {
            return Err(Error::InvalidParameter(format!(
                "action {a} at state {x} is out of range for {num_actions} actions"
            )));
        }
        Ok(Self {
            actions,
            num_actions,
        })
    }

    /// The policy that takes action 0 everywhere.
    pub fn first_action(num_states: usize, num_actions: usize) -> Self {
        Self {
            actions: vec![0; num_states],
            num_actions,
        }
    }

    /// Greedy policy of `q` with lowest-index tie-breaking.
    pub fn greedy(q: &QTable) -> Self {
        let actions = (0..q.num_states())
            .map(|x| {
                let row = q.row(x);
                let mut best = 0;
                for (a, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect();
        Self {
            actions,
            num_actions: q.num_actions(),
        }
    }

    pub fn action(&self, x: usize) -> usize {
        self.actions[x]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Selects `q(x, π(x))` without the generic aggregation loop.
    pub fn select(&self, q: &QTable) -> VTable {
        VTable::new(
            self.actions
                .iter()
                .enumerate()
                .map(|(x, &a)| q[(x, a)])
                .collect(),
        )
    }
}

impl ActionDistribution for DetPolicy {
    fn num_states(&self) -> usize {
        self.actions.len()
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn prob(&self, x: usize, a: usize) -> f64 {
        if self.actions[x] == a {
            1.0
        } else {
            0.0
        }
    }

    fn aggregate(&self, q: &QTable) -> Result<VTable> {
        self.check_shape(q.num_states(), q.num_actions())?;
        Ok(self.select(q))
    }
}

/// Stochastic stationary policy with simplex rows.
#[derive(Clone, Debug, PartialEq)]
pub struct StochPolicy {
    probs: QTable,
}

impl StochPolicy {
    pub fn new(probs: QTable) -> Result<Self> {
        for x in 0..probs.num_states() {
            let row = probs.row(x);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "policy row {x} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "policy row {x} sums to {sum}"
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: QTable::constant(num_states, num_actions, 1.0 / num_actions as f64),
        }
    }

    pub fn probs(&self) -> &QTable {
        &self.probs
    }
}

impl ActionDistribution for StochPolicy {
    fn num_states(&self) -> usize {
        self.probs.num_states()
    }

    fn num_actions(&self) -> usize {
        self.probs.num_actions()
    }

    fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[(x, a)]
    }
}

impl From<&DetPolicy> for StochPolicy {
    fn from(p: &DetPolicy) -> Self {
        let mut probs = QTable::zeros(p.num_states(), p.num_actions());
        for (x, &a) in p.actions().iter().enumerate() {
            probs[(x, a)] = 1.0;
        }
        Self { probs }
    }
}

/// Either kind of stationary policy.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Deterministic(DetPolicy),
    Stochastic(StochPolicy),
}

impl Policy {
    pub fn as_deterministic(&self) -> Option<&DetPolicy> {
        match self {
            Policy::Deterministic(p) => Some(p),
            Policy::Stochastic(_) => None,
        }
    }
}

impl ActionDistribution for Policy {
    fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic(p) => p.num_states(),
            Policy::Stochastic(p) => p.num_states(),
        }
    }

    fn num_actions(&self) -> usize {
        match self {
            Policy::Deterministic(p) => p.num_actions(),
            Policy::Stochastic(p) => p.num_actions(),
        }
    }

    fn prob(&self, x: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(p) => p.prob(x, a),
            Policy::Stochastic(p) => p.prob(x, a),
        }
    }

    fn aggregate(&self, q: &QTable) -> Result<VTable> {
        match self {
            Policy::Deterministic(p) => p.aggregate(q),
            Policy::Stochastic(p) => p.aggregate(q),
        }
    }
}

/// Policy that follows `head[t]` at time step `t` while `t < head.len()`
/// and `tail` afterwards. For MDVI output, `head = (π_k, …, π_1)` and
/// `tail = π_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonStationaryPolicy {
    head: Vec<DetPolicy>,
    tail: DetPolicy,
}

impl NonStationaryPolicy {
    pub fn new(head: Vec<DetPolicy>, tail: DetPolicy) -> Result<Self> {
        let shape = (tail.num_states(), tail.num_actions());
        if head.iter().any(|p| (p.num_states(), p.num_actions()) != shape) {
            return Err(Error::Dimension(
                "non-stationary policy members disagree on shape".into(),
            ));
        }
        Ok(Self { head, tail })
    }

    /// `π'_k` built from a sequence `(π_0, …, π_K)`.
    pub fn from_sequence(policies: &[DetPolicy], k: usize) -> Result<Self> {
        if k >= policies.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} but only {} policies available",
                policies.len()
            )));
        }
        let head = policies[1..=k].iter().rev().cloned().collect();
        Self::new(head, policies[0].clone())
    }

    pub fn head(&self) -> &[DetPolicy] {
        &self.head
    }

    pub fn tail(&self) -> &DetPolicy {
        &self.tail
    }

    /// Action taken at time step `t` in state `x`.
    pub fn action_at(&self, t: usize, x: usize) -> usize {
        self.head.get(t).unwrap_or(&self.tail).action(x)
    }
}
