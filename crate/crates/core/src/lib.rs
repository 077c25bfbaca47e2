//! Unsupervised environment design on desk-scale gridworlds.
//!
//! The crate trains small tabular-free PPO agents while a curriculum
//! mechanism decides which procedurally generated levels they see:
//! domain randomisation, prioritised level replay (plain and robust),
//! minimax and PAIRED-style adversarial generators, evolutionary level
//! editing, and sampling-corrected replay for environments with aleatoric
//! state. A separate module checks the underlying two-player game theory
//! numerically on explicit payoff matrices.
//!
//! Layout:
//! - [`env`]: the level families (mazes, icy mazes, fruit rooms), their
//!   simulators, generation, editing, and analysis;
//! - [`policy`], [`optim`], [`ppo`]: the learner (manual-backprop MLP,
//!   SGD/Adam, clipped-objective PPO with GAE);
//! - [`scoring`], [`buffer`]: level scores and the prioritised replay store;
//! - [`rollout`]: episode collection and reference actors;
//! - [`curricula`]: the orchestrators tying all of this together;
//! - [`samplr`]: fictitious-transition correction for aleatoric levels;
//! - [`games`]: explicit payoff-matrix games, equilibrium search, and the
//!   regret-bound checks;
//! - [`stats`], [`metrics`]: hypothesis tests and evaluation suites;
//! - [`harness`]: config-driven experiment runner with checkpointing.

pub mod buffer;
pub mod curricula;
pub mod env;
pub mod games;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod ppo;
pub mod rollout;
pub mod samplr;
pub mod scoring;
pub mod stats;
