//! Backward propagation of credit through emission-weighted transition
//! products.
//!
//! With `L = sum_i alpha_{i,T}`, the gradient with respect to the forward
//! variables at time `t` is
//!
//! ```text
//! dL/dalpha_t = (A Lambda_{t+1}) (A Lambda_{t+2}) ... (A Lambda_T) 1
//! ```
//!
//! which coincides with the standard backward variable `beta_t`. As the
//! product grows its rows tend to proportionality, so the gradient tends to
//! a multiple of the all-ones vector and no longer distinguishes states.

use serde::Serialize;

use super::model::{Hmm, ObservationSequence};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stochastic::diagonal_dobrushin;

fn check_time(y: &ObservationSequence, t: usize) -> Result<()> {
    if t == 0 || t > y.len() {
        return Err(Error::TimeOutOfRange { t, len: y.len() });
    }
    Ok(())
}

/// `V_t = (A Lambda_t) (A Lambda_{t+1}) ... (A Lambda_T)` for `t` in
/// `1..=T`. Unscaled; entries underflow on long suffixes.
pub fn credit_product(model: &Hmm, y: &ObservationSequence, t: usize) -> Result<Matrix> {
    y.check_alphabet(model.k())?;
    check_time(y, t)?;
    let a = model.transitions().as_matrix();
    let mut v = Matrix::identity(model.n());
    for &s in y.symbols()[t - 1..].iter().rev() {
        v = a.scale_columns(model.emission_row(s)).mul(&v);
    }
    Ok(v)
}

/// Gradient of the (unscaled) likelihood with respect to the unscaled
/// forward variables `alpha_{., t}`, for `t` in `1..=T`.
pub fn credit_gradient(model: &Hmm, y: &ObservationSequence, t: usize) -> Result<Vec<f64>> {
    y.check_alphabet(model.k())?;
    check_time(y, t)?;
    let a = model.transitions().as_matrix();
    let mut g = vec![1.0; model.n()];
    for &s in y.symbols()[t..].iter().rev() {
        let weighted: Vec<f64> = g.iter().zip(model.emission_row(s)).map(|(g, e)| g * e).collect();
        g = a.mul_vec(&weighted);
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreditTrace {
    /// Entry `t - 1`: Dobrushin coefficient of the row-normalized `V_t`;
    /// `None` when some row of `V_t` is zero.
    pub tau1_series: Vec<Option<f64>>,
    /// Entry `t - 1`: `prod_{s = t}^{T} tau1(Lambda_s) tau1(A)`.
    pub bound_series: Vec<f64>,
    /// Entry `t - 1`: `birkhoff(A)^(T - t + 1)`. Diagonal scaling leaves
    /// projective distances unchanged, so this bounds the normalized
    /// product's coefficient (1 when `A` is not column-allowable).
    pub birkhoff_bound_series: Vec<f64>,
}

pub fn credit_trace(model: &Hmm, y: &ObservationSequence) -> Result<CreditTrace> {
    y.check_alphabet(model.k())?;
    let big_t = y.len();
    let a = model.transitions();
    let tau_a = a.dobrushin().value;
    let tau_b = a.birkhoff().map_or(1.0, |c| c.value);
    let mut tau1_series = vec![None; big_t];
    let mut bound_series = vec![0.0; big_t];
    let mut birkhoff_bound_series = vec![0.0; big_t];
    let mut v = Matrix::identity(model.n());
    let mut bound = 1.0;
    let mut birkhoff_bound = 1.0;
    for t in (1..=big_t).rev() {
        let e = model.emission_row(y.symbols()[t - 1]);
        v = a.as_matrix().scale_columns(e).mul(&v);
        // A global rescale leaves the row-normalized product unchanged.
        let m = v.max_abs();
        if m > 0.0 {
            v.scale(1.0 / m);
        }
        tau1_series[t - 1] = v.row_normalized().map(|p| p.half_max_row_l1().clamp(0.0, 1.0));
        bound *= diagonal_dobrushin(e) * tau_a;
        birkhoff_bound *= tau_b;
        bound_series[t - 1] = bound;
        birkhoff_bound_series[t - 1] = birkhoff_bound;
    }
    Ok(CreditTrace {
        tau1_series,
        bound_series,
        birkhoff_bound_series,
    })
}
