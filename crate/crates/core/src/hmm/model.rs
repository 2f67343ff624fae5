use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stochastic::{ProbabilityVector, StochasticMatrix, INPUT_ROW_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hmm {
    transitions: StochasticMatrix,
    /// k x n, columns sum to one.
    emissions: Matrix,
    initial: ProbabilityVector,
}

impl Hmm {
    /// `emissions` has one row per output symbol and one column per state.
    /// Columns within [`INPUT_ROW_TOLERANCE`] of one are renormalized.
    pub fn new(
        transitions: StochasticMatrix,
        emissions: &[Vec<f64>],
        initial: ProbabilityVector,
    ) -> Result<Self> {
        let n = transitions.n();
        let k = emissions.len();
        if k == 0 {
            return Err(Error::InvalidModel("emission matrix has no rows".into()));
        }
        if initial.len() != n {
            return Err(Error::InvalidModel(format!(
                "initial distribution has {} entries for {n} states",
                initial.len()
            )));
        }
        let mut b = Matrix::from_rows(emissions)?;
        if b.cols() != n {
            return Err(Error::InvalidModel(format!(
                "emission matrix has {} columns for {n} states",
                b.cols()
            )));
        }
        for i in 0..n {
            let mut sum = 0.0;
            for l in 0..k {
                let v = b[(l, i)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "emission ({l}, {i}) is negative or not finite: {v}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > INPUT_ROW_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "emission column {i} sums to {sum}"
                )));
            }
            for l in 0..k {
                b[(l, i)] /= sum;
            }
        }
        Ok(Self {
            transitions,
            emissions: b,
            initial,
        })
    }

    pub(crate) fn from_parts_unchecked(
        transitions: StochasticMatrix,
        emissions: Matrix,
        initial: ProbabilityVector,
    ) -> Self {
        Self {
            transitions,
            emissions,
            initial,
        }
    }

    pub fn n(&self) -> usize {
        self.transitions.n()
    }

    pub fn k(&self) -> usize {
        self.emissions.rows()
    }

    pub fn transitions(&self) -> &StochasticMatrix {
        &self.transitions
    }

    pub fn emissions(&self) -> &Matrix {
        &self.emissions
    }

    pub fn initial(&self) -> &ProbabilityVector {
        &self.initial
    }

    /// `P(y = symbol | x = i)` for every state `i`: the diagonal of the
    /// emission matrix `Lambda` for that symbol.
    pub fn emission_row(&self, symbol: usize) -> &[f64] {
        self.emissions.row(symbol)
    }

    pub fn sample(&self, length: usize, rng: &mut impl Rng) -> SampledSequence {
        self.sample_until(length, |_| false, rng)
    }

    /// Samples until a state satisfying `stop` has emitted (inclusive) or
    /// `max_length` observations have been produced.
    pub fn sample_until(
        &self,
        max_length: usize,
        stop: impl Fn(usize) -> bool,
        rng: &mut impl Rng,
    ) -> SampledSequence {
        let mut state = draw(self.initial.as_slice().iter().copied(), rng);
        let mut states = vec![state];
        let mut symbols = Vec::with_capacity(max_length);
        while symbols.len() < max_length {
            state = draw(self.transitions.row(state).iter().copied(), rng);
            let k = self.k();
            symbols.push(draw((0..k).map(|l| self.emissions[(l, state)]), rng));
            states.push(state);
            if stop(state) {
                break;
            }
        }
        SampledSequence {
            observations: ObservationSequence { symbols },
            states,
        }
    }
}

/// Inverse-CDF draw from a probability vector.
fn draw(probs: impl Iterator<Item = f64>, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObservationSequence {
    symbols: Vec<usize>,
}

impl ObservationSequence {
    pub fn new(symbols: Vec<usize>, k: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some((position, &symbol)) = symbols.iter().enumerate().find(|(_, &s)| s >= k) {
            return Err(Error::SymbolOutOfRange {
                symbol,
                position,
                k,
            });
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub(crate) fn check_alphabet(&self, k: usize) -> Result<()> {
        match self.symbols.iter().enumerate().find(|(_, &s)| s >= k) {
            Some((position, &symbol)) => Err(Error::SymbolOutOfRange {
                symbol,
                position,
                k,
            }),
            None if self.symbols.is_empty() => Err(Error::EmptySequence),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledSequence {
    pub observations: ObservationSequence,
    /// Hidden path `x_0, x_1, ..., x_T`; one longer than the observations.
    pub states: Vec<usize>,
}
