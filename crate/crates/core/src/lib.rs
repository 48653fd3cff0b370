//! Goal-conditioned reinforcement learning over set-structured object
//! representations, with a surrogate 2D multi-object Push/Rearrange
//! environment.
//!
//! The crate trains a soft actor-critic agent whose policy and critics read
//! an unordered set of per-object latents through goal-conditioned and
//! goal-unconditional attention heads, generates its own goals from a fitted
//! position prior, relabels replayed experience with hindsight and imagined
//! goals, and at evaluation time cycles through the sub-goals extracted from
//! a goal scene. A flat-vector SAC+HER baseline, a DeepSets set aggregator,
//! and representation analyses (k-means over identity latents, mutual
//! information gap) cover the comparison and ablation studies.

pub mod autodiff;
pub mod env;
pub mod error;
pub mod eval;
pub mod harness;
pub mod parallel;
pub mod policy;
pub mod repr;
pub mod rewards;
pub mod rng;
pub mod sac;

pub use error::{Error, Result};
