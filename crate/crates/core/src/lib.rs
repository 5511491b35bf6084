//! Popularity-amongst-friends (PAF) collaborative filtering together with the
//! noisy block-constant rating model it is analysed under.
//!
//! The crate is organised bottom-up:
//!
//! * [`matrix`] holds the sparse ternary [`ObservedMatrix`] every recommender reads.
//! * [`synthetic`] generates block-constant latent matrices and passes them through
//!   a binary symmetric channel followed by an erasure channel.
//! * [`paf`] is the recommender itself: row similarity, top-T neighbours and the
//!   most-popular-column vote.
//! * [`cluster`] holds the cluster-based recommenders (true-partition oracle and the
//!   k-nearest clustering recommender).
//! * [`theory`] evaluates the limiting bit error rates and classifies parameter points
//!   into phases.
//! * [`tail_bounds`] contains exact binomial/hypergeometric tails and the concentration
//!   bounds used to reason about them.
//! * [`harness`] runs seeded Monte Carlo trials and sweeps.
//! * [`dataset`] loads MovieLens-style ratings and runs the hide-30% evaluation protocol.

pub mod cluster;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod paf;
pub mod seed;
pub mod synthetic;
pub mod tail_bounds;
pub mod theory;

pub use error::{Error, Result};
pub use matrix::ObservedMatrix;
pub use paf::Recommendation;
pub use synthetic::{LatentModel, ModelParams};
