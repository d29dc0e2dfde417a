//! Sampled MDVI, the Q-learning baseline and their building blocks.

pub mod mdvi;
pub mod params;
pub mod qlearning;
pub mod sampling;
pub mod softmax;

pub use mdvi::{mdvi_iteration, mdvi_run, Mdvi, MdviConfig, MdviRun, MdviState};
pub use params::{theorem_params, Constants, Regime, TheoremParams};
pub use qlearning::{q_learning_run, QLearning, QLearningConfig, QLearningRun, QLearningStep};
pub use sampling::GenerativeModel;
pub use softmax::{boltzmann_policy, soft_value, Beta};
