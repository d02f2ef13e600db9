//! Temporal-difference learning with neural network value functions, fed
//! either raw normalized observations or sparse binned / tile-coded inputs.
//!
//! The crate covers the full experiment pipeline: classic-control dynamics
//! ([`env`]), input preprocessing ([`featurize`]), a hand-differentiated MLP
//! ([`net`]), SGD and Adam ([`optim`]), TD(0)/Sarsa(0) learners with replay
//! and target networks ([`agent`]), value error and gradient interference
//! measures ([`eval`]), run statistics ([`stats`]) and the sweep harness
//! behind the `tdlab` binary ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod env;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod harness;
pub mod net;
pub mod optim;
pub mod stats;

pub use error::{Error, Result};

/// Random stream used by every seeded component.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the random stream `stream` of a run seeded with `seed`.
///
/// Streams keep environment resets, network init and exploration
/// independent, so two configurations sharing a seed see the same resets.
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    use rand::SeedableRng;
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids passed to [`seeded_stream`].
pub mod streams {
    pub const ENV: u64 = 0;
    pub const NET: u64 = 1;
    pub const AGENT: u64 = 2;
}
