//! Garnet random MDPs.
//!
//! Generation order, all from one `ChaCha8Rng` seeded with `seed`:
//!
//! 1. for each `(x, a)` in row-major order, draw `B` distinct successors by a
//!    partial Fisher-Yates shuffle of `0..X` (`j ~ U{i..X}`, swap, for
//!    `i = 0..B`), then `B − 1` uniform cut points in `[0, 1)`; after sorting,
//!    the `k`-th drawn successor receives `p_k − p_{k−1}` with `p_0 = 0`,
//!    `p_B = 1`;
//! 2. for each state `x`, one reward `ρ(x) ~ U(−1, 1)`, shared by all actions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GarnetParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub branching: usize,
    pub discount: f64,
    pub seed: u64,
}

impl GarnetParams {
    pub fn new(num_states: usize, num_actions: usize, branching: usize, discount: f64, seed: u64) -> Self {
        Self {
            num_states,
            num_actions,
            branching,
            discount,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 || self.branching == 0 {
            return Err(Error::InvalidParameter(
                "garnet sizes and branching must be positive".into(),
            ));
        }
        if self.branching > self.num_states {
            return Err(Error::InvalidParameter(format!(
                "branching {} exceeds state count {}",
                self.branching, self.num_states
            )));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        Ok(())
    }
}

pub fn generate(params: &GarnetParams) -> Result<TabularMdp> {
    params.validate()?;
    let GarnetParams {
        num_states: xs,
        num_actions: acts,
        branching,
        discount,
        seed,
    } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut transitions = vec![0.0; xs * acts * xs];
    let mut order: Vec<usize> = Vec::with_capacity(xs);
    let mut cuts: Vec<f64> = Vec::with_capacity(branching + 1);
    for row in transitions.chunks_mut(xs) {
        order.clear();
        order.extend(0..xs);
        for i in 0..branching {
            let j = rng.random_range(i..xs);
            order.swap(i, j);
        }
        cuts.clear();
        cuts.extend((1..branching).map(|_| rng.random::<f64>()));
        cuts.sort_by(f64::total_cmp);
        cuts.push(1.0);
        let mut prev = 0.0;
        for (&succ, &cut) in order[..branching].iter().zip(&cuts) {
            row[succ] = cut - prev;
            prev = cut;
        }
    }

    let state_rewards: Vec<f64> = (0..xs).map(|_| open_symmetric_unit(&mut rng)).collect();
    let rewards = state_rewards
        .iter()
        .flat_map(|&r| std::iter::repeat_n(r, acts))
        .collect();

    TabularMdp::new(xs, acts, discount, rewards, transitions)
}

/// Uniform draw on the open interval `(−1, 1)`.
fn open_symmetric_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let r: f64 = rng.random_range(-1.0..1.0);
        if r > -1.0 {
            return r;
        }
    }
}
