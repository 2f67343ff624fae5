//! Markovian-model machinery for measuring how context and credit diffuse
//! through products of stochastic matrices.
//!
//! The crate is organised bottom-up:
//!
//! - [`stochastic`]: validated row-stochastic matrices, the Dobrushin and
//!   Birkhoff ergodicity coefficients, projective distance, product chains
//!   and stationary-distribution analysis.
//! - [`graph`]: incidence graphs, strongly connected components, periods,
//!   primitivity and the canonical (primitive / periodic / transient) block
//!   decomposition.
//! - [`hmm`]: discrete-emission HMMs with scaled forward-backward, credit
//!   propagation, and Baum-Welch training.
//! - [`experiments`]: seeded reproductions of the topology-dependent
//!   diffusion, random-product row-equality and span-controlled training
//!   experiments.
//! - [`io`]: JSON and text file formats shared with the command-line tool.

// Lets test-only helpers shared with the integration tests name the crate.
#[cfg(test)]
extern crate self as markov_diffusion;

pub mod error;
pub mod experiments;
pub mod graph;
pub mod hmm;
pub mod io;
pub mod matrix;
pub mod stochastic;

pub use error::{Error, Result};
pub use graph::{CanonicalDecomposition, SccInfo, TransitionGraph};
pub use hmm::{Hmm, ObservationSequence};
pub use matrix::Matrix;
pub use stochastic::{Coefficient, CoefficientKind, ProbabilityVector, ProductTrace, StochasticMatrix};
