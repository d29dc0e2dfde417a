//! Mirror descent value iteration (MDVI) on tabular MDPs with a simulated
//! generative model.
//!
//! The crate covers exact MDP machinery ([`bellman`]), random Garnet MDPs
//! ([`garnet`]), sampled MDVI and a Q-learning baseline ([`algorithms`]),
//! checks of the error-propagation bounds on realized runs ([`diagnostics`])
//! and sample-complexity sweeps with CSV/JSON output ([`harness`]).

pub mod algorithms;
pub mod bellman;
pub mod diagnostics;
pub mod error;
pub mod garnet;
pub mod harness;
pub mod mdp;

pub use error::{Error, Result};
pub use mdp::{
    ActionDistribution, DetPolicy, NonStationaryPolicy, Policy, QTable, StochPolicy, TabularMdp,
    VTable,
};
