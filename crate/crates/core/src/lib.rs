//! Numerical laboratory for quenched central limit theorems and quenched
//! invariance principles of stationary Markov chains.
//!
//! * [`probkit`]: quantile and tail functions, mixing integrals, KS distance.
//! * [`finite_chain`]: exact engines on finite-state kernels.
//! * [`intermittent`]: the intermittent map, its Ulam discretization and the
//!   Markov chain driven by its transfer operator.
//! * [`quenched_mc`]: replicated trajectories from a fixed start.
//! * [`counterexample`]: a process satisfying the projective condition while
//!   the Gordin, Maxwell-Woodroofe and Hannan-Heyde conditions fail.

pub mod counterexample;
pub mod error;
pub mod finite_chain;
pub mod intermittent;
pub mod numerics;
pub mod probkit;
pub mod quenched_mc;
pub mod rng;
pub mod series;

pub use error::{Error, Result};
pub use series::{SeriesReport, Verdict};
