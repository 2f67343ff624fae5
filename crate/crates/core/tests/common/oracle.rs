//! Exhaustive path-enumeration oracles for small HMMs. Everything here sums
//! over all hidden paths `x_0 .. x_T` directly and shares no code with the
//! recursions it checks.

#![allow(dead_code)]

use markov_diffusion::hmm::{Hmm, ObservationSequence};
use markov_diffusion::stochastic::{ProbabilityVector, StochasticMatrix};
use rand::Rng;

pub fn random_model(n: usize, k: usize, rng: &mut impl Rng) -> Hmm {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random::<f64>() + 0.05).collect())
        .collect();
    let a = StochasticMatrix::new(&rows, true).unwrap();
    let mut b = vec![vec![0.0; n]; k];
    for i in 0..n {
        let col: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = col.iter().sum();
        for l in 0..k {
            b[l][i] = col[l] / s;
        }
    }
    let pi: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = pi.iter().sum();
    let pi = ProbabilityVector::new(pi.iter().map(|p| p / s).collect()).unwrap();
    Hmm::new(a, &b, pi).unwrap()
}

pub fn random_sequence(k: usize, len: usize, rng: &mut impl Rng) -> ObservationSequence {
    ObservationSequence::new((0..len).map(|_| rng.random_range(0..k)).collect(), k).unwrap()
}

/// Calls `f` on every path of `len` states over `n` values.
pub fn for_each_path(n: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0; len];
    loop {
        f(&path);
        let mut pos = 0;
        loop {
            if pos == len {
                return;
            }
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

/// `P(x_0 .. x_T, y_1 .. y_T)`.
pub fn path_joint(model: &Hmm, y: &ObservationSequence, path: &[usize]) -> f64 {
    let a = model.transitions();
    let mut p = model.initial().as_slice()[path[0]];
    for (t, &s) in y.symbols().iter().enumerate() {
        p *= a.get(path[t], path[t + 1]) * model.emissions()[(s, path[t + 1])];
    }
    p
}

pub fn brute_force_likelihood(model: &Hmm, y: &ObservationSequence) -> f64 {
    let mut total = 0.0;
    for_each_path(model.n(), y.len() + 1, |p| total += path_joint(model, y, p));
    total
}

/// `P(y_{t+1} .. y_T | x_t = i)` for every `i`.
pub fn brute_force_beta(model: &Hmm, y: &ObservationSequence, t: usize) -> Vec<f64> {
    let n = model.n();
    let a = model.transitions();
    let rest = &y.symbols()[t..];
    (0..n)
        .map(|i| {
            let mut total = 0.0;
            for_each_path(n, rest.len(), |suffix| {
                let mut prev = i;
                let mut p = 1.0;
                for (&x, &s) in suffix.iter().zip(rest) {
                    p *= a.get(prev, x) * model.emissions()[(s, x)];
                    prev = x;
                }
                total += p;
            });
            total
        })
        .collect()
}

/// Posterior expected statistics of one sequence, by enumeration.
pub struct ExpectedCounts {
    pub transitions: Vec<Vec<f64>>,
    pub emissions: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

pub fn brute_force_counts(model: &Hmm, y: &ObservationSequence) -> ExpectedCounts {
    let (n, k) = (model.n(), model.k());
    let l = brute_force_likelihood(model, y);
    let mut c = ExpectedCounts {
        transitions: vec![vec![0.0; n]; n],
        emissions: vec![vec![0.0; n]; k],
        initial: vec![0.0; n],
    };
    for_each_path(n, y.len() + 1, |p| {
        let w = path_joint(model, y, p) / l;
        c.initial[p[0]] += w;
        for (t, &s) in y.symbols().iter().enumerate() {
            c.transitions[p[t]][p[t + 1]] += w;
            c.emissions[s][p[t + 1]] += w;
        }
    });
    c
}

/// Baum-Welch update computed from enumerated expected counts.
pub fn brute_force_em_update(model: &Hmm, data: &[ObservationSequence]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let (n, k) = (model.n(), model.k());
    let mut trans = vec![vec![0.0; n]; n];
    let mut emit = vec![vec![0.0; n]; k];
    let mut init = vec![0.0; n];
    for y in data {
        let c = brute_force_counts(model, y);
        for i in 0..n {
            init[i] += c.initial[i];
            for j in 0..n {
                trans[i][j] += c.transitions[i][j];
            }
            for l in 0..k {
                emit[l][i] += c.emissions[l][i];
            }
        }
    }
    for row in &mut trans {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    for i in 0..n {
        let s: f64 = (0..k).map(|l| emit[l][i]).sum();
        for l in 0..k {
            emit[l][i] /= s;
        }
    }
    let s: f64 = init.iter().sum();
    init.iter_mut().for_each(|x| *x /= s);
    (trans, emit, init)
}
