//! Baum-Welch re-estimation.
//!
//! The transition update `A_ij <- A_ij dL/dA_ij / sum_j A_ij dL/dA_ij`
//! reduces to normalized posterior expected transition counts, since
//! `A_ij dL/dA_ij / L = sum_t P(x_{t-1} = i, x_t = j | y)`. Counts are
//! accumulated over every transition `x_0 -> x_1 .. x_{T-1} -> x_T`.

use serde::Serialize;

use super::inference::forward_backward;
use super::model::{Hmm, ObservationSequence};
use crate::error::{Error, Result};
use crate::stochastic::{ProbabilityVector, StochasticMatrix};

/// Emission floor applied when [`EmOptions::emission_floor`] is enabled.
pub const EMISSION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EmOptions {
    /// Lower bound on every re-estimated emission probability (columns are
    /// renormalized afterwards). Off by default.
    pub emission_floor: Option<f64>,
}

struct Counts {
    transitions: Vec<f64>,
    emissions: Vec<f64>,
    initial: Vec<f64>,
}

impl Counts {
    fn new(n: usize, k: usize) -> Self {
        Self {
            transitions: vec![0.0; n * n],
            emissions: vec![0.0; k * n],
            initial: vec![0.0; n],
        }
    }
}

/// Adds one sequence's posterior expected counts; returns its
/// log-likelihood.
fn accumulate(model: &Hmm, y: &ObservationSequence, counts: &mut Counts) -> Result<f64> {
    let fb = forward_backward(model, y)?;
    let n = model.n();
    let a = model.transitions();
    let pi = model.initial().as_slice();
    let mut posterior_x0 = vec![0.0; n];
    for t in 0..y.len() {
        let e = model.emission_row(y.symbols()[t]);
        let prev = if t == 0 { pi } else { &fb.alpha[t - 1] };
        // xi_t(i, j) = alpha_hat_{t-1,i} A_ij w_j with w_j = e_j beta_hat_{t,j} / c_t
        let s = fb.scale[t];
        let w: Vec<f64> = e.iter().zip(&fb.beta[t]).map(|(e, b)| e * b * s).collect();
        for (i, &p) in prev.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = &mut counts.transitions[i * n..(i + 1) * n];
            let mut total = 0.0;
            for ((r, &a), &w) in row.iter_mut().zip(a.row(i)).zip(&w) {
                let x = a * w;
                total += x;
                *r += p * x;
            }
            if t == 0 {
                posterior_x0[i] = p * total;
            }
        }
        for (i, g) in fb.gamma(t + 1).into_iter().enumerate() {
            counts.emissions[y.symbols()[t] * n + i] += g;
        }
    }
    for (c, p) in counts.initial.iter_mut().zip(posterior_x0) {
        *c += p;
    }
    Ok(fb.log_likelihood)
}

/// One re-estimation step with default options. Returns the updated model
/// and the log-likelihood of the *input* model on `data`.
pub fn em_step(model: &Hmm, data: &[ObservationSequence]) -> Result<(Hmm, f64)> {
    em_step_with(model, data, EmOptions::default())
}

pub fn em_step_with(model: &Hmm, data: &[ObservationSequence], options: EmOptions) -> Result<(Hmm, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n, k) = (model.n(), model.k());
    let mut counts = Counts::new(n, k);
    let mut ll = 0.0;
    for y in data {
        ll += accumulate(model, y, &mut counts)?;
    }

    // States with no expected occupancy keep their old parameters.
    let mut a = model.transitions().as_matrix().clone();
    for i in 0..n {
        let row = &counts.transitions[i * n..(i + 1) * n];
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for j in 0..n {
                a[(i, j)] = row[j] / total;
            }
        }
    }

    let mut b = model.emissions().clone();
    for i in 0..n {
        let total: f64 = (0..k).map(|l| counts.emissions[l * n + i]).sum();
        if total <= 0.0 {
            continue;
        }
        for l in 0..k {
            b[(l, i)] = counts.emissions[l * n + i] / total;
        }
        if let Some(floor) = options.emission_floor {
            let mut col_sum = 0.0;
            for l in 0..k {
                b[(l, i)] = b[(l, i)].max(floor);
                col_sum += b[(l, i)];
            }
            for l in 0..k {
                b[(l, i)] /= col_sum;
            }
        }
    }

    let total: f64 = counts.initial.iter().sum();
    let pi = if total > 0.0 {
        ProbabilityVector::new(counts.initial.iter().map(|c| c / total).collect())?
    } else {
        model.initial().clone()
    };

    let next = Hmm::from_parts_unchecked(StochasticMatrix::from_matrix_unchecked(a), b, pi);
    Ok((next, ll))
}

/// Total log-likelihood of `data`.
pub fn log_likelihood(model: &Hmm, data: &[ObservationSequence]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    data.iter()
        .map(|y| super::inference::forward(model, y).map(|f| f.log_likelihood))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Training {
    pub model: Hmm,
    pub epochs: usize,
    /// Entry `e - 1` is the log-likelihood of the model after `e` epochs.
    pub history: Vec<f64>,
    /// Log-likelihood of the starting model.
    pub initial_log_likelihood: f64,
}

/// Repeats [`em_step`] until `max_epochs` or until the relative
/// improvement `(l_e - l_{e-1}) / |l_e|` falls below `rel_tol`.
pub fn train(model: &Hmm, data: &[ObservationSequence], max_epochs: usize, rel_tol: f64) -> Result<Training> {
    if max_epochs == 0 {
        return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidConfig(format!("rel_tol must be positive, got {rel_tol}")));
    }
    // Each step also scores its input, so scoring the model after epoch e
    // comes for free with the update that would produce epoch e + 1.
    let (mut current, initial_log_likelihood) = em_step(model, data)?;
    let mut previous_ll = initial_log_likelihood;
    let mut history = Vec::new();
    loop {
        let (next, ll) = em_step(&current, data)?;
        history.push(ll);
        let improvement = (ll - previous_ll) / ll.abs();
        if history.len() >= max_epochs || improvement < rel_tol {
            return Ok(Training {
                model: current,
                epochs: history.len(),
                history,
                initial_log_likelihood,
            });
        }
        previous_ll = ll;
        current = next;
    }
}
