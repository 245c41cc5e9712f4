//! Policy-decoupled data augmentation for offline reinforcement learning.
//!
//! This crate trains five generative/value models on a fixed transition
//! dataset and uses them to synthesize high-quality transitions:
//!
//! 1. a conditional VAE proposes candidate next states for dataset states,
//! 2. a value function trained with a negative-sampling penalty picks the
//!    candidate with the highest (pessimistic) value,
//! 3. inverse-action and reward CVAEs replenish the action and reward,
//! 4. a forward dynamics model scores each synthetic transition by how
//!    consistent the generated action is with the selected next state, and
//!    only the most consistent λ-portion is kept.
//!
//! The synthetic data carries no information from any downstream policy, so
//! the same augmented dataset can feed any offline learner. A TD3+BC-style
//! actor-critic ([`policy`]) and two self-contained desk-scale environments
//! ([`envs`]) are included to measure the augmentation's effect end to end.
//!
//! See the `book/` guide for a narrative walk-through; its code snippets are
//! compiled and run as part of `cargo test --doc`.

pub mod analysis;
pub mod augment;
pub mod checkpoint;
pub mod config;
pub mod cvae;
pub mod data;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod nn;
pub mod pipeline;
pub mod policy;
pub mod rng;
pub mod value;

#[cfg(any(test, feature = "testutil"))]
pub mod testutil;

mod book;

pub use error::{Error, Result};
