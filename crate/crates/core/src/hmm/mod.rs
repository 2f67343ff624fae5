//! Discrete-emission hidden Markov models.
//!
//! Conventions: `A[i][j] = P(x_t = j | x_{t-1} = i)`,
//! `B[l][i] = P(y_t = l | x_t = i)` (k rows, n columns) and `pi` is the
//! distribution of the silent initial state `x_0`. The first observation is
//! emitted by `x_1`, so `alpha_1 = Lambda_1 A' pi`.

mod credit;
mod em;
mod inference;
mod model;

pub use credit::{credit_gradient, credit_product, credit_trace, CreditTrace};
pub use em::{em_step, em_step_with, log_likelihood, train, EmOptions, Training, EMISSION_FLOOR};
pub use inference::{forward, forward_backward, nonhomogeneous_forward, AlphaTrace, ForwardBackward};
pub use model::{Hmm, ObservationSequence, SampledSequence};

#[cfg(test)]
#[path = "../../tests/common/oracle.rs"]
pub(crate) mod oracle;
