//! Row-stochastic matrices and ergodicity coefficients.
//!
//! A [`StochasticMatrix`] holds transition probabilities
//! `A[i][j] = P(x_t = j | x_{t-1} = i)`. Two proper ergodicity coefficients
//! measure how far such a matrix is from having identical rows:
//!
//! ```text
//! dobrushin(A) = 1/2 max_{i,j} sum_k |A_ik - A_jk|
//! birkhoff(A)  = (1 - sqrt(phi)) / (1 + sqrt(phi)),
//!                phi = min_{i,j,k,l} (A_ik A_jl) / (A_jk A_il)
//! ```
//!
//! Both lie in `[0, 1]`, vanish exactly on rank-one matrices and are
//! submultiplicative, so they bound how fast a product of transition
//! matrices forgets its initial state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TransitionGraph;
use crate::matrix::Matrix;

/// Largest deviation of a raw row sum from one that construction accepts.
pub const INPUT_ROW_TOLERANCE: f64 = 1e-6;
/// Row sums of a constructed matrix are within this of one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;
/// Two rows closer than this in L1 count as equal.
pub const ROW_EQUALITY_TOLERANCE: f64 = 1e-12;

pub const STATIONARY_MAX_ITERATIONS: usize = 100_000;
pub const STATIONARY_STEP_TOLERANCE: f64 = 1e-12;

/// Geometric-rate fits ignore errors at or below this level.
pub const RATE_FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMatrix {
    inner: Matrix,
}

impl StochasticMatrix {
    /// Validates `raw` and renormalizes every row to sum to one.
    ///
    /// With `normalize == false` a row whose sum deviates from one by more
    /// than [`INPUT_ROW_TOLERANCE`] is rejected; with `normalize == true`
    /// any row with a positive sum is rescaled.
    pub fn new(raw: &[Vec<f64>], normalize: bool) -> Result<Self> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in raw.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare {
                    row: i,
                    len: row.len(),
                    n,
                });
            }
            if let Some((j, &value)) = row
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
            {
                return Err(Error::NegativeEntry { row: i, col: j, value });
            }
            let sum: f64 = row.iter().sum();
            if sum == 0.0 {
                return Err(Error::ZeroRow { row: i });
            }
            if !normalize && (sum - 1.0).abs() > INPUT_ROW_TOLERANCE {
                return Err(Error::RowSumOutOfTolerance { row: i, sum });
            }
            data.extend(row.iter().map(|v| v / sum));
        }
        let m = Self {
            inner: Matrix::from_raw(n, n, data),
        };
        m.assert_unit_row_sums();
        Ok(m)
    }

    /// Builds a matrix from rows known to be stochastic up to rounding
    /// (for example a product of stochastic matrices).
    pub(crate) fn from_matrix_unchecked(inner: Matrix) -> Self {
        debug_assert_eq!(inner.rows(), inner.cols());
        Self { inner }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Matrix::identity(n),
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            inner: Matrix::from_raw(n, n, vec![1.0 / n as f64; n * n]),
        }
    }

    /// `A 1 = 1`: the all-ones vector is a right eigenvector with
    /// eigenvalue one.
    fn assert_unit_row_sums(&self) {
        for (i, s) in self.inner.row_sums().into_iter().enumerate() {
            assert!(
                (s - 1.0).abs() <= ROW_SUM_TOLERANCE,
                "row {i} sums to {s} after normalization"
            );
        }
    }

    pub fn n(&self) -> usize {
        self.inner.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.inner.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    /// Left-to-right product `self * other`.
    pub fn mul(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(Self::from_matrix_unchecked(self.inner.mul(&other.inner)))
    }

    pub fn power(&self, t: usize) -> StochasticMatrix {
        let mut p = StochasticMatrix::identity(self.n());
        for _ in 0..t {
            p = Self::from_matrix_unchecked(p.inner.mul(&self.inner));
        }
        p
    }

    /// Row vector times matrix, `v' A`.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// Every column has a positive sum.
    pub fn is_column_allowable(&self) -> bool {
        self.first_zero_column().is_none()
    }

    fn first_zero_column(&self) -> Option<usize> {
        let n = self.n();
        (0..n).find(|&j| (0..n).all(|i| self.get(i, j) == 0.0))
    }

    pub fn is_positive(&self) -> bool {
        self.inner.as_slice().iter().all(|&x| x > 0.0)
    }

    /// Largest over columns of (max entry - min entry) in that column.
    pub fn max_column_spread(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| {
                let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let x = self.get(i, j);
                    (lo.min(x), hi.max(x))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn rows_equal(&self) -> bool {
        let n = self.n();
        (1..n).all(|i| {
            self.row(0)
                .iter()
                .zip(self.row(i))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                <= ROW_EQUALITY_TOLERANCE
        })
    }

    pub fn dobrushin(&self) -> Coefficient {
        dobrushin(self)
    }

    pub fn birkhoff(&self) -> Result<Coefficient> {
        birkhoff(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    Dobrushin,
    Birkhoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub kind: CoefficientKind,
}

impl Coefficient {
    fn new(value: f64, kind: CoefficientKind) -> Self {
        // Rounding can push a sum of probabilities a hair outside [0, 1].
        Self {
            value: value.clamp(0.0, 1.0),
            kind,
        }
    }
}

pub fn dobrushin(a: &StochasticMatrix) -> Coefficient {
    Coefficient::new(a.as_matrix().half_max_row_l1(), CoefficientKind::Dobrushin)
}

/// Dobrushin's coefficient of a diagonal matrix: half the sum of its two
/// largest entries (zero for a 1x1 matrix, which has no pair of rows).
pub fn diagonal_dobrushin(diag: &[f64]) -> f64 {
    if diag.len() < 2 {
        return 0.0;
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &d in diag {
        let d = d.abs();
        if d > first {
            second = first;
            first = d;
        } else if d > second {
            second = d;
        }
    }
    0.5 * (first + second)
}

/// Birkhoff's contraction coefficient, via the closed form in the
/// cross-ratio `phi`. Quadruples with a zero denominator are skipped; a zero
/// numerator over a positive denominator forces `phi = 0` and the
/// coefficient to one.
pub fn birkhoff(a: &StochasticMatrix) -> Result<Coefficient> {
    if let Some(col) = a.first_zero_column() {
        return Err(Error::NotColumnAllowable { col });
    }
    let n = a.n();
    let mut phi = f64::INFINITY;
    'outer: for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..n {
                for l in 0..n {
                    if k == l {
                        continue;
                    }
                    let den = a.get(j, k) * a.get(i, l);
                    if den <= 0.0 {
                        continue;
                    }
                    let ratio = a.get(i, k) * a.get(j, l) / den;
                    if ratio < phi {
                        phi = ratio;
                        if phi == 0.0 {
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    // n == 1, or no admissible quadruple: every ratio is one.
    if !phi.is_finite() {
        phi = 1.0;
    }
    let phi = phi.min(1.0);
    let s = phi.sqrt();
    Ok(Coefficient::new((1.0 - s) / (1.0 + s), CoefficientKind::Birkhoff))
}

/// Hilbert projective distance `max_{i,j} ln(v_i w_j / (v_j w_i))`.
pub fn projective_distance(v: &[f64], w: &[f64]) -> Result<f64> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: v.len(),
            right: w.len(),
        });
    }
    for (index, &value) in v.iter().chain(w).enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveEntry {
                index: index % v.len(),
                value,
            });
        }
    }
    // max_{i,j} [ln(v_i/w_i) - ln(v_j/w_j)] = max r - min r
    let (lo, hi) = v
        .iter()
        .zip(w)
        .map(|(a, b)| a.ln() - b.ln())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        });
    Ok((hi - lo).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidProbabilityVector("empty".into()));
        }
        if let Some(bad) = entries.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidProbabilityVector(format!(
                "entry {bad} is negative or not finite"
            )));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > INPUT_ROW_TOLERANCE {
            return Err(Error::InvalidProbabilityVector(format!("sums to {sum}")));
        }
        Ok(Self(entries.into_iter().map(|v| v / sum).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Running forward product `A_1 A_2 ... A_t` with the Dobrushin coefficient
/// recorded after every factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductTrace {
    pub running_product: StochasticMatrix,
    pub tau1_series: Vec<f64>,
}

impl ProductTrace {
    pub fn start(first: StochasticMatrix) -> Self {
        let tau = first.dobrushin().value;
        Self {
            running_product: first,
            tau1_series: vec![tau],
        }
    }

    pub fn push(&mut self, next: &StochasticMatrix) -> Result<f64> {
        self.running_product = self.running_product.mul(next)?;
        let tau = self.running_product.dobrushin().value;
        self.tau1_series.push(tau);
        Ok(tau)
    }

    pub fn steps(&self) -> usize {
        self.tau1_series.len()
    }
}

pub fn product_chain(matrices: &[StochasticMatrix]) -> Result<ProductTrace> {
    let (first, rest) = matrices.split_first().ok_or(Error::EmptyList)?;
    let mut trace = ProductTrace::start(first.clone());
    for m in rest {
        trace.push(m)?;
    }
    Ok(trace)
}

/// Left Perron vector of a primitive matrix by power iteration on `v' A`.
pub fn stationary_distribution(a: &StochasticMatrix) -> Result<ProbabilityVector> {
    if !TransitionGraph::incidence(a, 0.0).is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let n = a.n();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..STATIONARY_MAX_ITERATIONS {
        let mut next = a.left_apply(&v);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let step = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if step < STATIONARY_STEP_TOLERANCE {
            return Ok(ProbabilityVector(v));
        }
    }
    Err(Error::NoConvergence {
        iterations: STATIONARY_MAX_ITERATIONS,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricRate {
    /// `exp(slope)` of the least-squares line through `ln e_t`.
    pub rate: f64,
    /// Coefficient of determination of that fit.
    pub fit_quality: f64,
    /// `e_t = max |A^t - 1 v'|` for `t = 1..=max_t`.
    pub errors: Vec<f64>,
}

pub fn geometric_rate_estimate(a: &StochasticMatrix, max_t: usize) -> Result<GeometricRate> {
    let v = stationary_distribution(a)?;
    let n = a.n();
    let mut power = StochasticMatrix::identity(n);
    let mut errors = Vec::with_capacity(max_t);
    for _ in 0..max_t {
        power = power.mul(a)?;
        let e = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (power.get(i, j) - v.as_slice()[j]).abs())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let points: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .take_while(|(_, &e)| e > RATE_FIT_FLOOR)
        .map(|(t, &e)| ((t + 1) as f64, e.ln()))
        .collect();
    if points.len() < 2 {
        // Already at (or within rounding of) rank one.
        return Ok(GeometricRate {
            rate: 0.0,
            fit_quality: 1.0,
            errors,
        });
    }
    let (slope, r2) = least_squares(&points);
    Ok(GeometricRate {
        rate: slope.exp().min(1.0),
        fit_quality: r2,
        errors,
    })
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}
