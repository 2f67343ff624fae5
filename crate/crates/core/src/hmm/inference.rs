//! Scaled forward-backward recursions.
//!
//! Forward variables are renormalized at every step:
//! `alpha_hat_t = alpha_t / (c_1 ... c_t)` with `sum_i alpha_hat_{i,t} = 1`.
//! The recorded scale factor is `scale_t = 1 / c_t`, so
//! `ln L = sum_t ln c_t = -sum_t ln scale_t`. Backward variables use the
//! standard convention `beta_{i,t} = P(y_{t+1..T} | x_t = i)` and are
//! scaled with the same factors, `beta_hat_t = beta_t / (c_{t+1} ... c_T)`,
//! which makes `sum_i alpha_hat_{i,t} beta_hat_{i,t} = 1` for every `t`.

use serde::Serialize;

use super::model::{Hmm, ObservationSequence};
use crate::error::{Error, Result};
use crate::stochastic::{ProbabilityVector, StochasticMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaTrace {
    /// Row `t - 1` holds `alpha_hat_t`.
    pub alpha: Vec<Vec<f64>>,
    pub scale: Vec<f64>,
    pub log_likelihood: f64,
}

impl AlphaTrace {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// `alpha_t` without scaling, for time `t` in `1..=T`. Underflows on
    /// long sequences; meant for checks on short ones.
    pub fn unscaled_alpha(&self, t: usize) -> Vec<f64> {
        let log_c: f64 = self.scale[..t].iter().map(|s| -s.ln()).sum();
        let f = log_c.exp();
        self.alpha[t - 1].iter().map(|a| a * f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardBackward {
    pub alpha: Vec<Vec<f64>>,
    /// Row `t - 1` holds `beta_hat_t`; the last row is all ones.
    pub beta: Vec<Vec<f64>>,
    pub scale: Vec<f64>,
    pub log_likelihood: f64,
}

impl ForwardBackward {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Posterior `P(x_t = i | y)` for `t` in `1..=T`.
    pub fn gamma(&self, t: usize) -> Vec<f64> {
        self.alpha[t - 1]
            .iter()
            .zip(&self.beta[t - 1])
            .map(|(a, b)| a * b)
            .collect()
    }

    pub fn unscaled_alpha(&self, t: usize) -> Vec<f64> {
        let log_c: f64 = self.scale[..t].iter().map(|s| -s.ln()).sum();
        let f = log_c.exp();
        self.alpha[t - 1].iter().map(|a| a * f).collect()
    }

    /// `beta_t = P(y_{t+1..T} | x_t = i)` without scaling.
    pub fn unscaled_beta(&self, t: usize) -> Vec<f64> {
        let log_c: f64 = self.scale[t..].iter().map(|s| -s.ln()).sum();
        let f = log_c.exp();
        self.beta[t - 1].iter().map(|b| b * f).collect()
    }

    /// The backward quantity with the time-`t` emission folded in,
    /// `P(y_t | x_t = i) beta_{i,t} = P(y_{t..T} | x_t = i)`.
    pub fn unscaled_beta_inclusive(&self, model: &Hmm, y: &ObservationSequence, t: usize) -> Vec<f64> {
        let e = model.emission_row(y.symbols()[t - 1]);
        self.unscaled_beta(t).iter().zip(e).map(|(b, e)| b * e).collect()
    }
}

/// One scaled forward step: `alpha_next = Lambda A' alpha_prev`, normalized.
fn forward_step(
    a: &StochasticMatrix,
    emission: &[f64],
    prev: &[f64],
    t: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut next = a.left_apply(prev);
    for (x, e) in next.iter_mut().zip(emission) {
        *x *= e;
    }
    let c: f64 = next.iter().sum();
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::ZeroLikelihood { t });
    }
    next.iter_mut().for_each(|x| *x /= c);
    Ok((next, c))
}

fn run_forward<'a>(
    initial: &[f64],
    steps: impl Iterator<Item = (&'a StochasticMatrix, &'a [f64])>,
) -> Result<AlphaTrace> {
    let mut alpha: Vec<Vec<f64>> = Vec::new();
    let mut scale = Vec::new();
    let mut log_likelihood = 0.0;
    for (t, (a, emission)) in steps.enumerate() {
        let prev = alpha.last().map_or(initial, Vec::as_slice);
        let (next, c) = forward_step(a, emission, prev, t + 1)?;
        alpha.push(next);
        scale.push(1.0 / c);
        log_likelihood += c.ln();
    }
    Ok(AlphaTrace {
        alpha,
        scale,
        log_likelihood,
    })
}

pub fn forward(model: &Hmm, y: &ObservationSequence) -> Result<AlphaTrace> {
    y.check_alphabet(model.k())?;
    let a = model.transitions();
    run_forward(
        model.initial().as_slice(),
        y.symbols().iter().map(|&s| (a, model.emission_row(s))),
    )
}

pub fn forward_backward(model: &Hmm, y: &ObservationSequence) -> Result<ForwardBackward> {
    let AlphaTrace {
        alpha,
        scale,
        log_likelihood,
    } = forward(model, y)?;
    let n = model.n();
    let big_t = y.len();
    let a = model.transitions();
    let mut beta = vec![vec![1.0; n]; big_t];
    for t in (0..big_t - 1).rev() {
        let e = model.emission_row(y.symbols()[t + 1]);
        let s = scale[t + 1];
        let (head, tail) = beta.split_at_mut(t + 1);
        let next = &tail[0];
        for (i, b) in head[t].iter_mut().enumerate() {
            *b = a
                .row(i)
                .iter()
                .zip(e)
                .zip(next)
                .map(|((a, e), b)| a * e * b)
                .sum::<f64>()
                * s;
        }
    }
    Ok(ForwardBackward {
        alpha,
        beta,
        scale,
        log_likelihood,
    })
}

/// Forward recursion with a different transition matrix and emission
/// diagonal at every step: `alpha_t = Lambda_t A_t' alpha_{t-1}`.
pub fn nonhomogeneous_forward(
    matrices: &[StochasticMatrix],
    emissions: &[Vec<f64>],
    initial: &ProbabilityVector,
) -> Result<AlphaTrace> {
    if matrices.is_empty() {
        return Err(Error::EmptyList);
    }
    if matrices.len() != emissions.len() {
        return Err(Error::DimensionMismatch {
            expected: matrices.len(),
            found: emissions.len(),
        });
    }
    let n = initial.len();
    for m in matrices {
        if m.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.n(),
            });
        }
    }
    for e in emissions {
        if e.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: e.len(),
            });
        }
    }
    run_forward(
        initial.as_slice(),
        matrices.iter().zip(emissions.iter().map(Vec::as_slice)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::oracle::{brute_force_beta, brute_force_likelihood, random_model, random_sequence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_state_likelihood_is_sum_of_log_emissions() {
        let m = Hmm::new(
            StochasticMatrix::identity(1),
            &[vec![0.2], vec![0.5], vec![0.3]],
            ProbabilityVector::uniform(1),
        )
        .unwrap();
        let y = ObservationSequence::new(vec![0, 2, 2, 1, 0], 3).unwrap();
        let expected: f64 = [0.2f64, 0.3, 0.3, 0.5, 0.2].iter().map(|p| p.ln()).sum();
        assert!((forward(&m, &y).unwrap().log_likelihood - expected).abs() < 1e-14);
    }

    #[test]
    fn uniform_model_likelihood() {
        let (n, k) = (3, 4);
        let m = Hmm::new(
            StochasticMatrix::uniform(n),
            &vec![vec![0.25; n]; k],
            ProbabilityVector::uniform(n),
        )
        .unwrap();
        let y = ObservationSequence::new(vec![0, 1, 3, 3, 2, 0, 1], k).unwrap();
        let ll = forward(&m, &y).unwrap().log_likelihood;
        assert!((ll - 7.0 * 0.25f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn two_state_length_three_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let m = random_model(2, 2, &mut rng);
            let y = random_sequence(2, 3, &mut rng);
            let ll = forward(&m, &y).unwrap().log_likelihood;
            assert!((ll - brute_force_likelihood(&m, &y).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_base_case_and_posterior_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let m = random_model(2, 3, &mut rng);
        let y = random_sequence(3, 3, &mut rng);
        let fb = forward_backward(&m, &y).unwrap();
        assert_eq!(fb.beta[2], vec![1.0, 1.0]);
        assert_eq!(fb.unscaled_beta(3), vec![1.0, 1.0]);
        for t in 1..=3 {
            assert!((fb.gamma(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unscaled_beta_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let m = random_model(2, 2, &mut rng);
            let y = random_sequence(2, 4, &mut rng);
            let fb = forward_backward(&m, &y).unwrap();
            let oracle = brute_force_beta(&m, &y, 1);
            for (b, o) in fb.unscaled_beta(1).iter().zip(&oracle) {
                assert!((b - o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn likelihood_is_consistent_at_every_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..30 {
            let n = rng.random_range(1..5);
            let k = rng.random_range(1..4);
            let t = rng.random_range(1..12);
            let m = random_model(n, k, &mut rng);
            let y = random_sequence(k, t, &mut rng);
            let fb = forward_backward(&m, &y).unwrap();
            let l = fb.log_likelihood.exp();
            for s in 1..=t {
                let joint: f64 = fb
                    .unscaled_alpha(s)
                    .iter()
                    .zip(fb.unscaled_beta(s))
                    .map(|(a, b)| a * b)
                    .sum();
                assert!(((joint - l) / l).abs() < 1e-10);
                assert!((fb.alpha[s - 1].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_likelihood_is_reported() {
        let m = Hmm::new(
            StochasticMatrix::identity(2),
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            ProbabilityVector::point_mass(2, 0),
        )
        .unwrap();
        let y = ObservationSequence::new(vec![0, 0, 1], 2).unwrap();
        assert_eq!(forward(&m, &y), Err(Error::ZeroLikelihood { t: 3 }));
        let y = ObservationSequence::new(vec![0, 5], 6).unwrap();
        assert!(matches!(forward(&m, &y), Err(Error::SymbolOutOfRange { .. })));
    }

    #[test]
    fn nonhomogeneous_reduces_to_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let m = random_model(3, 2, &mut rng);
        let y = random_sequence(2, 9, &mut rng);
        let mats = vec![m.transitions().clone(); 9];
        let ems: Vec<Vec<f64>> = y.symbols().iter().map(|&s| m.emission_row(s).to_vec()).collect();
        let nh = nonhomogeneous_forward(&mats, &ems, m.initial()).unwrap();
        let h = forward(&m, &y).unwrap();
        for (x, z) in nh.alpha.iter().flatten().zip(h.alpha.iter().flatten()) {
            assert!((x - z).abs() < 1e-12);
        }
        assert!((nh.log_likelihood - h.log_likelihood).abs() < 1e-12);
    }

    #[test]
    fn nonhomogeneous_single_step() {
        let a = StochasticMatrix::new(&[vec![0.9, 0.1], vec![0.3, 0.7]], false).unwrap();
        let pi = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        let trace = nonhomogeneous_forward(&[a], &[vec![0.5, 0.2]], &pi).unwrap();
        // Lambda A' pi = [0.5 * (0.225 + 0.225), 0.2 * (0.025 + 0.525)]
        let expected = [0.5 * 0.45, 0.2 * 0.55];
        for (x, e) in trace.unscaled_alpha(1).iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn nonhomogeneous_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..20 {
            let mats: Vec<_> = (0..3)
                .map(|_| {
                    let rows: Vec<Vec<f64>> =
                        (0..2).map(|_| (0..2).map(|_| rng.random::<f64>() + 0.01).collect()).collect();
                    StochasticMatrix::new(&rows, true).unwrap()
                })
                .collect();
            let ems: Vec<Vec<f64>> = (0..3).map(|_| (0..2).map(|_| rng.random::<f64>()).collect()).collect();
            let pi = ProbabilityVector::new(vec![0.4, 0.6]).unwrap();
            let trace = nonhomogeneous_forward(&mats, &ems, &pi).unwrap();
            let mut total = 0.0;
            for path in 0..16usize {
                let x: Vec<usize> = (0..4).map(|b| (path >> b) & 1).collect();
                let mut p = pi.as_slice()[x[0]];
                for t in 1..4 {
                    p *= mats[t - 1].get(x[t - 1], x[t]) * ems[t - 1][x[t]];
                }
                total += p;
            }
            assert!((trace.log_likelihood - total.ln()).abs() < 1e-12);
            let final_sum: f64 = trace.unscaled_alpha(3).iter().sum();
            assert!((final_sum - total).abs() < 1e-12);
        }
    }

    #[test]
    fn nonhomogeneous_dimension_errors() {
        let pi = ProbabilityVector::uniform(2);
        let a = StochasticMatrix::uniform(2);
        assert_eq!(nonhomogeneous_forward(&[], &[], &pi), Err(Error::EmptyList));
        assert!(matches!(
            nonhomogeneous_forward(&[a.clone(), a.clone()], &[vec![1.0, 1.0]], &pi),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            nonhomogeneous_forward(&[StochasticMatrix::uniform(3)], &[vec![1.0, 1.0]], &pi),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
