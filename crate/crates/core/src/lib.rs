//! Score-space multi-objective optimization.
//!
//! Objective losses are mapped through their (smoothed) empirical
//! complementary CDFs into scores that share the range `[0, 1]`. In score
//! space Pareto-efficient solutions can be ranked by an unweighted sum, a
//! weighted-sum scalarization becomes meaningful without nadir or ideal
//! vectors, and a small neural network can learn which preference attains a
//! desired trade-off.
//!
//! Modules:
//! - [`problem`]: box-bounded problems and the Viennet benchmark
//! - [`ecdf`]: smoothed ECDFs and the score transform
//! - [`direct`]: DIRECT-L global minimizer
//! - [`scalarize`]: weighted-sum scalarization over losses or scores
//! - [`pareto`]: dominance, front generation and total-score ordering
//! - [`prefnet`]: the preference-correction network
//! - [`analysis`]: trade-off errors, quantile tables and density reports
//! - [`io`]: CSV / JSON persistence

pub mod analysis;
pub mod direct;
pub mod ecdf;
pub mod error;
pub mod io;
pub mod pareto;
pub mod prefnet;
pub mod problem;
pub mod scalarize;

pub use error::{Error, Result};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every stochastic operation in the crate.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
