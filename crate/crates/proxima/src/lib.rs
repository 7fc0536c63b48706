//! Proximal policy optimization toolkit.
//!
//! Everything needed to run and dissect PPO at desk scale: a dense-network
//! substrate with hand-derived gradients, Gaussian/categorical policy
//! distributions, analytically solvable toy environments with optimal-return
//! oracles, truncated generalized advantage estimation, every surrogate
//! objective variant (unclipped, clipped, fixed and adaptive KL penalty),
//! the actor-critic training loop, and an experiment harness for ablation
//! suites and objective-geometry diagnostics.
//!
//! Start with the runnable examples in `examples/`, or the `proxima` binary
//! for the command-line surface.

pub mod distributions;
pub mod envs;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod nn;
pub mod objectives;
pub mod policy;
pub mod rollout;
pub mod trainer;

pub use error::{Error, Result};
