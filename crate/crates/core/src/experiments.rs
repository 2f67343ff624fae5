//! Seeded experiment harnesses: diffusion of the Dobrushin coefficient in
//! non-homogeneous products, row equalization of random positive products,
//! and span-controlled training of HMMs on a two-branch generator.
//!
//! Every experiment is a pure function of its configuration and seeds.
//! Per-trial seeds are derived with [`mix_seed`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::TransitionGraph;
use crate::hmm::{log_likelihood, train, Hmm, ObservationSequence};
use crate::stochastic::{ProbabilityVector, ProductTrace, StochasticMatrix};

/// Smallest coefficient value recorded by the diffusion experiment.
pub const TAU1_FLOOR: f64 = 1e-300;

/// `base * 1_000_003 + index`, wrapping.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Full,
    LeftToRight,
    LeftToRightSkip1,
    Periodic { period: usize },
    SparseRandom { density: f64, state_multiplier: usize },
}

impl TopologyKind {
    /// Learner used for the sparse training runs: three times the
    /// generator's states, 20% connection probability.
    pub const SPARSE_DEFAULT: TopologyKind = TopologyKind::SparseRandom {
        density: 0.2,
        state_multiplier: 3,
    };

    pub fn validate(&self) -> Result<()> {
        match *self {
            TopologyKind::Periodic { period } if period < 2 => {
                Err(Error::InvalidConfig(format!("period must be at least 2, got {period}")))
            }
            TopologyKind::SparseRandom { density, .. } if !(density > 0.0 && density <= 1.0) => {
                Err(Error::InvalidConfig(format!("density must be in (0, 1], got {density}")))
            }
            TopologyKind::SparseRandom { state_multiplier: 0, .. } => {
                Err(Error::InvalidConfig("state multiplier must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Number of learner states for a generator with `n` states.
    pub fn learner_states(&self, n: usize) -> usize {
        match *self {
            TopologyKind::SparseRandom { state_multiplier, .. } => n * state_multiplier,
            _ => n,
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Full => write!(f, "full"),
            TopologyKind::LeftToRight => write!(f, "left_to_right"),
            TopologyKind::LeftToRightSkip1 => write!(f, "left_to_right_skip1"),
            TopologyKind::Periodic { period } => write!(f, "periodic{period}"),
            TopologyKind::SparseRandom {
                density,
                state_multiplier,
            } => write!(f, "sparse:{density}:{state_multiplier}"),
        }
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    /// Accepts `full`, `left_to_right`, `left_to_right_skip1`, `periodic<d>`
    /// (or `periodic:<d>`), `sparse` and `sparse:<density>:<multiplier>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown topology '{s}'"));
        let kind = match s {
            "full" => TopologyKind::Full,
            "left_to_right" | "ltr" => TopologyKind::LeftToRight,
            "left_to_right_skip1" | "bidiagonal" => TopologyKind::LeftToRightSkip1,
            "sparse" => TopologyKind::SPARSE_DEFAULT,
            _ => {
                if let Some(rest) = s.strip_prefix("periodic") {
                    let period = rest.trim_start_matches(':').parse().map_err(|_| bad())?;
                    TopologyKind::Periodic { period }
                } else if let Some(rest) = s.strip_prefix("sparse:") {
                    let (d, m) = rest.split_once(':').ok_or_else(bad)?;
                    TopologyKind::SparseRandom {
                        density: d.parse().map_err(|_| bad())?,
                        state_multiplier: m.parse().map_err(|_| bad())?,
                    }
                } else {
                    return Err(bad());
                }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Allowed transitions for `kind` on `n` states. Sparse graphs draw each
/// off-diagonal edge independently; a state left with no edge gets a
/// self-loop.
pub fn topology_graph(kind: TopologyKind, n: usize, rng: &mut impl Rng) -> Result<TransitionGraph> {
    kind.validate()?;
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut g = TransitionGraph::empty(n);
    match kind {
        TopologyKind::Full => g = TransitionGraph::complete(n),
        TopologyKind::LeftToRight => {
            for i in 0..n {
                for j in i..n {
                    g.add_edge(i, j);
                }
            }
        }
        TopologyKind::LeftToRightSkip1 => {
            for i in 0..n {
                g.add_edge(i, i);
                if i + 1 < n {
                    g.add_edge(i, i + 1);
                }
            }
        }
        TopologyKind::Periodic { period } => {
            if n % period != 0 {
                return Err(Error::IncompatibleDimensions {
                    kind: kind.to_string(),
                    n,
                });
            }
            let width = n / period;
            for i in 0..n {
                let next = (i / width + 1) % period;
                for j in next * width..(next + 1) * width {
                    g.add_edge(i, j);
                }
            }
        }
        TopologyKind::SparseRandom { density, .. } => {
            for i in 0..n {
                let mut any = false;
                for j in 0..n {
                    if i != j && rng.random::<f64>() < density {
                        g.add_edge(i, j);
                        any = true;
                    }
                }
                if !any {
                    g.add_edge(i, i);
                }
            }
        }
    }
    Ok(g)
}

/// Random stochastic matrix with the incidence of `kind`: independent
/// uniform(0, 1] entries on allowed positions, rows normalized.
pub fn generate_topology(kind: TopologyKind, n: usize, rng: &mut impl Rng) -> Result<StochasticMatrix> {
    let g = topology_graph(kind, n, rng)?;
    random_on_graph(&g, rng, |r| 1.0 - r.random::<f64>())
}

fn random_on_graph<R: Rng>(g: &TransitionGraph, rng: &mut R, draw: impl Fn(&mut R) -> f64) -> Result<StochasticMatrix> {
    let n = g.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if g.has_edge(i, j) { draw(rng) } else { 0.0 }).collect())
        .collect();
    StochasticMatrix::new(&rows, true)
}

fn flat_dirichlet(rng: &mut impl Rng) -> f64 {
    rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE)
}

/// Initial learner: flat-Dirichlet rows of `A` on the topology's edges,
/// flat-Dirichlet emission columns, uniform `pi`. The fully connected
/// learner keeps its last state as an absorbing self-loop.
pub fn random_learner(kind: TopologyKind, n: usize, k: usize, rng: &mut impl Rng) -> Result<Hmm> {
    let mut g = topology_graph(kind, n, rng)?;
    if kind == TopologyKind::Full {
        g = TransitionGraph::complete(n);
        for j in 0..n - 1 {
            g.remove_edge(n - 1, j);
        }
    }
    let a = random_on_graph(&g, rng, flat_dirichlet)?;
    let mut b = vec![vec![0.0; n]; k];
    for i in 0..n {
        let col: Vec<f64> = (0..k).map(|_| flat_dirichlet(rng)).collect();
        let total: f64 = col.iter().sum();
        for l in 0..k {
            b[l][i] = col[l] / total;
        }
    }
    Hmm::new(a, &b, ProbabilityVector::uniform(n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionConfig {
    pub n: usize,
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub topology: TopologyKind,
    /// Reuse one random matrix at every step instead of drawing a fresh one.
    pub homogeneous: bool,
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionSeries {
    pub seed: u64,
    /// Entry `t - 1`: coefficient of the product of the first `t` matrices,
    /// clipped below at [`TAU1_FLOOR`].
    pub tau1: Vec<f64>,
    pub floored: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionResult {
    pub series: Vec<DiffusionSeries>,
    pub summary: Vec<StepSummary>,
}

pub fn diffusion_experiment(cfg: &DiffusionConfig) -> Result<DiffusionResult> {
    cfg.validate()?;
    let mut series = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = generate_topology(cfg.topology, cfg.n, &mut rng)?;
        let fixed = cfg.homogeneous.then(|| first.clone());
        let mut trace = ProductTrace::start(first);
        for _ in 1..cfg.steps {
            let next = match &fixed {
                Some(a) => a.clone(),
                None => generate_topology(cfg.topology, cfg.n, &mut rng)?,
            };
            trace.push(&next)?;
        }
        let floored: Vec<bool> = trace.tau1_series.iter().map(|&t| t < TAU1_FLOOR).collect();
        let tau1 = trace.tau1_series.iter().map(|&t| t.max(TAU1_FLOOR)).collect();
        series.push(DiffusionSeries { seed, tau1, floored });
    }
    let summary = (0..cfg.steps)
        .map(|s| {
            let values: Vec<f64> = series.iter().map(|r| r.tau1[s]).collect();
            StepSummary {
                step: s + 1,
                mean: values.iter().sum::<f64>() / values.len() as f64,
                min: values.iter().cloned().fold(f64::INFINITY, f64::min),
                max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(DiffusionResult { series, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSnapshot {
    pub step: usize,
    pub product: StochasticMatrix,
    /// Largest column spread (max minus min entry) of the product.
    pub spread: f64,
    pub tau1: f64,
}

/// Running products of `steps` random positive `n x n` matrices.
pub fn row_equality_snapshot(n: usize, steps: usize, rng: &mut impl Rng) -> Result<Vec<RowSnapshot>> {
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be at least 1".into()));
    }
    let matrices = (0..steps)
        .map(|_| generate_topology(TopologyKind::Full, n, rng))
        .collect::<Result<Vec<_>>>()?;
    row_equality_snapshot_from(&matrices)
}

pub fn row_equality_snapshot_from(matrices: &[StochasticMatrix]) -> Result<Vec<RowSnapshot>> {
    let first = matrices.first().ok_or(Error::EmptyList)?;
    let mut product = first.clone();
    let mut out = Vec::with_capacity(matrices.len());
    for (s, m) in matrices.iter().enumerate() {
        if s > 0 {
            product = product.mul(m)?;
        }
        out.push(RowSnapshot {
            step: s + 1,
            spread: product.max_column_spread(),
            tau1: product.dobrushin().value,
            product: product.clone(),
        });
    }
    Ok(out)
}

// Two-branch generator. State 0 is the silent start; branch A runs
// 1 -> 2 (self-loop) -> 3 and branch B runs 4 -> 5 (self-loop) -> 6; both end
// in the absorbing state 7, which emits the end symbol once.
pub const GENERATOR_STATES: usize = 8;
pub const GENERATOR_SYMBOLS: usize = 6;
pub const GENERATOR_END_STATE: usize = 7;
pub const GENERATOR_LOOP_STATES: [usize; 2] = [2, 5];
/// Symbol emitted by each state. Branches differ only in their first
/// (0 vs 1) and last (3 vs 4) symbols; the start state never emits.
pub const GENERATOR_EMISSIONS: [usize; GENERATOR_STATES] = [2, 0, 2, 3, 1, 2, 4, 5];

/// Self-transition probability with half-life `span`: `lambda^span = 0.5`.
pub fn span_to_lambda(span: f64) -> f64 {
    0.5f64.powf(1.0 / span)
}

/// Hard cap on sampled sequence length for a given span.
pub fn sequence_cap(span: f64) -> usize {
    (50.0 * span).ceil() as usize + 20
}

pub fn generating_hmm(span: f64) -> Result<Hmm> {
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::InvalidConfig(format!("span must be positive, got {span}")));
    }
    let lambda = span_to_lambda(span);
    let n = GENERATOR_STATES;
    let mut a = vec![vec![0.0; n]; n];
    a[0][1] = 0.5;
    a[0][4] = 0.5;
    a[1][2] = 1.0;
    a[2][2] = lambda;
    a[2][3] = 1.0 - lambda;
    a[3][7] = 1.0;
    a[4][5] = 1.0;
    a[5][5] = lambda;
    a[5][6] = 1.0 - lambda;
    a[6][7] = 1.0;
    a[7][7] = 1.0;
    let mut b = vec![vec![0.0; n]; GENERATOR_SYMBOLS];
    for (state, &symbol) in GENERATOR_EMISSIONS.iter().enumerate() {
        b[symbol][state] = 1.0;
    }
    Hmm::new(StochasticMatrix::new(&a, false)?, &b, ProbabilityVector::point_mass(n, 0))
}

/// Samples `count` sequences from the generator, each ending when the
/// absorbing state emits or at [`sequence_cap`].
pub fn sample_generator(span: f64, count: usize, rng: &mut impl Rng) -> Result<Vec<ObservationSequence>> {
    let model = generating_hmm(span)?;
    let cap = sequence_cap(span);
    Ok((0..count)
        .map(|_| model.sample_until(cap, |s| s == GENERATOR_END_STATE, rng).observations)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanConfig {
    pub spans: Vec<f64>,
    pub trials_per_span: usize,
    pub sequences: usize,
    pub learner: TopologyKind,
    pub max_epochs: usize,
    pub rel_tol: f64,
    pub success_slack: f64,
}

impl Default for SpanConfig {
    fn default() -> Self {
        Self {
            spans: vec![0.1, 1.0, 3.3, 10.0, 33.0, 100.0, 333.0, 1000.0],
            trials_per_span: 20,
            sequences: 100,
            learner: TopologyKind::SPARSE_DEFAULT,
            max_epochs: 200,
            rel_tol: 1e-5,
            success_slack: 0.005,
        }
    }
}

impl SpanConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        if self.spans.is_empty() {
            return Err(Error::InvalidConfig("at least one span is required".into()));
        }
        if let Some(s) = self.spans.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!("span must be positive, got {s}")));
        }
        if self.trials_per_span == 0 || self.sequences == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig(
                "trials, sequences and max_epochs must be at least 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.success_slack >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "success_slack must be nonnegative, got {}",
                self.success_slack
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub span: f64,
    pub topology: String,
    pub epochs_used: usize,
    /// Negative infinity when training failed.
    pub final_log_likelihood: f64,
    pub generator_log_likelihood: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanSummary {
    pub span: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingResult {
    pub reports: Vec<TrialReport>,
    pub summary: Vec<SpanSummary>,
}

/// `final >= generator - slack * |generator|`.
pub fn is_converged(final_ll: f64, generator_ll: f64, slack: f64) -> bool {
    final_ll >= generator_ll - slack * generator_ll.abs()
}

fn run_trial(cfg: &SpanConfig, span: f64, seed: u64, data: &[ObservationSequence], generator_ll: f64) -> TrialReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let n = cfg.learner.learner_states(GENERATOR_STATES);
    let outcome = random_learner(cfg.learner, n, GENERATOR_SYMBOLS, &mut rng)
        .and_then(|learner| train(&learner, data, cfg.max_epochs, cfg.rel_tol));
    let (epochs_used, final_ll, history) = match outcome {
        Ok(t) => (t.epochs, *t.history.last().expect("at least one epoch"), t.history),
        Err(_) => (0, f64::NEG_INFINITY, Vec::new()),
    };
    TrialReport {
        seed,
        span,
        topology: cfg.learner.to_string(),
        epochs_used,
        final_log_likelihood: final_ll,
        generator_log_likelihood: generator_ll,
        converged: is_converged(final_ll, generator_ll, cfg.success_slack),
        history,
    }
}

/// Runs every (span, trial) pair. Span `s` (0-based) shares one dataset
/// drawn from seed `mix_seed(base_seed, s)`; trial `t` of that span uses
/// learner seed `mix_seed(base_seed, s * trials_per_span + t)` on a
/// separate random stream. Results do not depend on `jobs`.
pub fn training_experiment(cfg: &SpanConfig, base_seed: u64, jobs: usize) -> Result<TrainingResult> {
    cfg.validate()?;
    let mut datasets = Vec::with_capacity(cfg.spans.len());
    for (s, &span) in cfg.spans.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(base_seed, s as u64));
        rng.set_stream(1);
        let data = sample_generator(span, cfg.sequences, &mut rng)?;
        let generator_ll = log_likelihood(&generating_hmm(span)?, &data)?;
        datasets.push((data, generator_ll));
    }
    let tasks: Vec<(usize, u64)> = (0..cfg.spans.len())
        .flat_map(|s| {
            (0..cfg.trials_per_span).map(move |t| (s, mix_seed(base_seed, (s * cfg.trials_per_span + t) as u64)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let reports: Vec<TrialReport> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(s, seed)| {
                let (data, generator_ll) = &datasets[s];
                run_trial(cfg, cfg.spans[s], seed, data, *generator_ll)
            })
            .collect()
    });
    let summary = cfg
        .spans
        .iter()
        .enumerate()
        .map(|(s, &span)| {
            let chunk = &reports[s * cfg.trials_per_span..(s + 1) * cfg.trials_per_span];
            let successes = chunk.iter().filter(|r| r.converged).count();
            SpanSummary {
                span,
                trials: chunk.len(),
                successes,
                success_fraction: successes as f64 / chunk.len() as f64,
            }
        })
        .collect();
    Ok(TrainingResult { reports, summary })
}

/// Maximal runs of at least `window` epochs (1-based, inclusive) over which
/// the per-epoch relative improvement stays below `slope_tol`. A run that
/// lasts until the final epoch loses that epoch, which is where training
/// stopped.
pub fn plateau_detector(history: &[f64], window: usize, slope_tol: f64) -> Vec<(usize, usize)> {
    let window = window.max(2);
    let last = history.len();
    let flat = |e: usize| {
        let (prev, cur) = (history[e - 2], history[e - 1]);
        (cur - prev) / cur.abs() < slope_tol
    };
    let mut out = Vec::new();
    let mut e = 2;
    while e <= last {
        if !flat(e) {
            e += 1;
            continue;
        }
        let start = e - 1;
        while e <= last && flat(e) {
            e += 1;
        }
        let mut end = e - 1;
        if end == last {
            end -= 1;
        }
        if end + 1 >= start + window {
            out.push((start, end));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn topology_parsing_round_trips() {
        for s in ["full", "left_to_right", "left_to_right_skip1", "periodic4", "sparse:0.2:3"] {
            assert_eq!(s.parse::<TopologyKind>().unwrap().to_string(), s);
        }
        assert_eq!("sparse".parse::<TopologyKind>().unwrap(), TopologyKind::SPARSE_DEFAULT);
        assert_eq!("periodic:3".parse::<TopologyKind>().unwrap(), TopologyKind::Periodic { period: 3 });
        assert!("periodic1".parse::<TopologyKind>().is_err());
        assert!("sparse:0:3".parse::<TopologyKind>().is_err());
        assert!("sparse:0.5:0".parse::<TopologyKind>().is_err());
        assert!("ring".parse::<TopologyKind>().is_err());
    }

    #[test]
    fn topologies_have_expected_incidence() {
        let mut r = rng(1);
        let full = generate_topology(TopologyKind::Full, 8, &mut r).unwrap();
        assert!(full.is_positive());
        let ltr = generate_topology(TopologyKind::LeftToRight, 8, &mut r).unwrap();
        let bi = generate_topology(TopologyKind::LeftToRightSkip1, 8, &mut r).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(ltr.get(i, j) > 0.0, j >= i);
                assert_eq!(bi.get(i, j) > 0.0, j == i || j == i + 1);
            }
        }
        assert_eq!(bi.get(7, 7), 1.0);
    }

    #[test]
    fn periodic_topology_is_one_periodic_block() {
        let mut r = rng(2);
        for _ in 0..20 {
            let a = generate_topology(TopologyKind::Periodic { period: 4 }, 8, &mut r).unwrap();
            let d = TransitionGraph::incidence(&a, 0.0).canonical_decomposition();
            assert!(d.primitive_blocks.is_empty());
            assert!(d.transient.is_empty());
            assert_eq!(d.periodic_blocks.len(), 1);
            assert_eq!(d.periodic_blocks[0].period, 4);
        }
        assert!(matches!(
            generate_topology(TopologyKind::Periodic { period: 3 }, 8, &mut r),
            Err(Error::IncompatibleDimensions { .. })
        ));
    }

    #[test]
    fn sparse_rows_are_never_empty() {
        let mut r = rng(3);
        let kind = TopologyKind::SparseRandom {
            density: 0.01,
            state_multiplier: 1,
        };
        let a = generate_topology(kind, 24, &mut r).unwrap();
        for i in 0..24 {
            assert!((a.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn learner_respects_topology() {
        let mut r = rng(4);
        let full = random_learner(TopologyKind::Full, 8, 6, &mut r).unwrap();
        assert!(full.transitions().row(0).iter().all(|&p| p > 0.0));
        assert_eq!(full.transitions().get(7, 7), 1.0);
        assert!(full.emissions().as_slice().iter().all(|&p| p > 0.0));
        let sparse = random_learner(TopologyKind::SPARSE_DEFAULT, 24, 6, &mut r).unwrap();
        let edges = sparse.transitions().as_matrix().as_slice().iter().filter(|&&p| p > 0.0).count();
        // about 0.2 * 24 * 23 off-diagonal edges
        assert!(edges > 60 && edges < 180, "{edges}");
    }

    #[test]
    fn periodic_diffusion_stays_at_one() {
        let cfg = DiffusionConfig {
            n: 8,
            steps: 50,
            seeds: vec![1, 2, 3],
            topology: TopologyKind::Periodic { period: 4 },
            homogeneous: false,
        };
        let res = diffusion_experiment(&cfg).unwrap();
        for s in &res.series {
            assert!(s.tau1.iter().all(|t| (t - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn single_step_diffusion_is_the_first_coefficient() {
        let cfg = DiffusionConfig {
            n: 8,
            steps: 1,
            seeds: vec![9],
            topology: TopologyKind::Full,
            homogeneous: false,
        };
        let res = diffusion_experiment(&cfg).unwrap();
        let a = generate_topology(TopologyKind::Full, 8, &mut rng(9)).unwrap();
        assert_eq!(res.series[0].tau1, vec![a.dobrushin().value]);
        assert_eq!(res.summary.len(), 1);
    }

    #[test]
    fn diffusion_series_are_non_increasing() {
        for topology in [TopologyKind::Full, TopologyKind::LeftToRight, TopologyKind::LeftToRightSkip1] {
            for homogeneous in [false, true] {
                let cfg = DiffusionConfig {
                    n: 8,
                    steps: 60,
                    seeds: vec![5, 6],
                    topology,
                    homogeneous,
                };
                for s in diffusion_experiment(&cfg).unwrap().series {
                    assert!(s.tau1.windows(2).all(|w| w[1] <= w[0] + 1e-12));
                }
            }
        }
    }

    #[test]
    fn row_snapshots() {
        let one = row_equality_snapshot(8, 1, &mut rng(10)).unwrap();
        assert!(one[0].spread > 0.0);
        for seed in 0..10 {
            let snaps = row_equality_snapshot(8, 4, &mut rng(seed)).unwrap();
            assert!(snaps[3].spread < snaps[0].spread);
        }
        let equal = StochasticMatrix::new(&vec![vec![0.25; 4]; 4], false).unwrap();
        let snaps = row_equality_snapshot_from(&[equal.clone(), equal.clone(), equal]).unwrap();
        assert!(snaps.iter().all(|s| s.spread == 0.0));
    }

    #[test]
    fn span_and_lambda() {
        assert_eq!(span_to_lambda(1.0), 0.5);
        assert!((span_to_lambda(10.0) - 0.933033).abs() < 1e-6);
        let mut prev = 0.0;
        for span in [0.01, 0.1, 1.0, 10.0, 1e3, 1e6] {
            let l = span_to_lambda(span);
            assert!(l > prev && l < 1.0);
            prev = l;
            generating_hmm(span).unwrap();
        }
        assert!(generating_hmm(0.0).is_err());
    }

    #[test]
    fn generator_dwell_time_and_branches() {
        let m = generating_hmm(1.0).unwrap();
        let mut r = rng(11);
        let mut dwell = 0usize;
        let mut first_a = 0usize;
        let count = 4000;
        for _ in 0..count {
            let s = m.sample_until(1000, |x| x == GENERATOR_END_STATE, &mut r);
            dwell += s.states.iter().filter(|&&x| x == 2 || x == 5).count();
            let y = s.observations.symbols();
            if y[0] == 0 {
                first_a += 1;
                assert_eq!(y[y.len() - 2], 3);
            } else {
                assert_eq!(y[0], 1);
                assert_eq!(y[y.len() - 2], 4);
            }
            assert_eq!(*y.last().unwrap(), 5);
        }
        assert!((dwell as f64 / count as f64 - 2.0).abs() < 0.1);
        assert!((first_a as f64 / count as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn harness_plumbing() {
        let cfg = SpanConfig {
            spans: vec![0.1, 3.3],
            trials_per_span: 1,
            sequences: 10,
            learner: TopologyKind::Full,
            max_epochs: 1,
            ..SpanConfig::default()
        };
        let res = training_experiment(&cfg, 7, 1).unwrap();
        assert_eq!(res.reports.len(), 2);
        assert!(res.reports.iter().all(|r| r.epochs_used == 1));
        for r in &res.reports {
            assert_eq!(
                r.converged,
                is_converged(r.final_log_likelihood, r.generator_log_likelihood, cfg.success_slack)
            );
        }
        for s in &res.summary {
            assert_eq!(s.trials, 1);
            assert!((0.0..=1.0).contains(&s.success_fraction));
        }
        assert_eq!(res, training_experiment(&cfg, 7, 3).unwrap());
    }

    #[test]
    fn plateaus() {
        let rising: Vec<f64> = (0..30).map(|e| -100.0 + 2.0 * e as f64).collect();
        assert!(plateau_detector(&rising, 5, 1e-4).is_empty());
        assert_eq!(plateau_detector(&[-5.0; 10], 5, 1e-4), vec![(1, 9)]);
        let mut h = Vec::new();
        let mut ll = -1000.0;
        for e in 1..=80 {
            if e <= 20 || e > 60 {
                ll += 10.0;
            }
            h.push(ll);
        }
        assert_eq!(plateau_detector(&h, 5, 1e-5), vec![(20, 60)]);
        assert!(plateau_detector(&h, 50, 1e-5).is_empty());
    }
}
