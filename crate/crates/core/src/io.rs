//! File formats shared with the command-line tool.
//!
//! - matrix: `{"n": 2, "rows": [[0.9, 0.1], [0.2, 0.8]]}`
//! - graph: `{"n": 3, "edges": [[0, 1], [1, 2], [2, 0]]}`
//! - HMM: `{"n": .., "k": .., "A": rows, "B": k rows of n, "pi": [..]}`
//! - sequences: text, one sequence per line, space-separated symbols.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TransitionGraph;
use crate::hmm::{Hmm, ObservationSequence};
use crate::stochastic::{ProbabilityVector, StochasticMatrix};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Parse(format!("{what}: declared size {expected} but found {found}")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    rows: Vec<Vec<f64>>,
}

pub fn parse_matrix(text: &str, normalize: bool) -> Result<StochasticMatrix> {
    let file: MatrixFile = parse_json(text, "matrix")?;
    check_len("matrix rows", file.n, file.rows.len())?;
    StochasticMatrix::new(&file.rows, normalize)
}

pub fn matrix_to_json(a: &StochasticMatrix) -> String {
    let file = MatrixFile {
        n: a.n(),
        rows: a.to_rows(),
    };
    serde_json::to_string_pretty(&file).expect("matrix serializes")
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize)>,
}

pub fn parse_graph(text: &str) -> Result<TransitionGraph> {
    let file: GraphFile = parse_json(text, "graph")?;
    TransitionGraph::from_edges(file.n, &file.edges)
}

pub fn graph_to_json(g: &TransitionGraph) -> String {
    let file = GraphFile {
        n: g.n(),
        edges: g.edges(),
    };
    serde_json::to_string_pretty(&file).expect("graph serializes")
}

#[derive(Debug, Serialize, Deserialize)]
struct HmmFile {
    n: usize,
    k: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

pub fn parse_hmm(text: &str) -> Result<Hmm> {
    let file: HmmFile = parse_json(text, "hmm")?;
    check_len("hmm A rows", file.n, file.a.len())?;
    check_len("hmm B rows", file.k, file.b.len())?;
    check_len("hmm pi", file.n, file.pi.len())?;
    let a = StochasticMatrix::new(&file.a, false)?;
    Hmm::new(a, &file.b, ProbabilityVector::new(file.pi)?)
}

pub fn hmm_to_json(model: &Hmm) -> String {
    let file = HmmFile {
        n: model.n(),
        k: model.k(),
        a: model.transitions().to_rows(),
        b: model.emissions().to_rows(),
        pi: model.initial().as_slice().to_vec(),
    };
    serde_json::to_string_pretty(&file).expect("hmm serializes")
}

/// Blank lines are skipped. Symbols must lie in `0..k`.
pub fn parse_sequences(text: &str, k: usize) -> Result<Vec<ObservationSequence>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let symbols = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: bad symbol '{tok}'", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = ObservationSequence::new(symbols, k)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        out.push(seq);
    }
    Ok(out)
}

pub fn sequences_to_text(seqs: &[ObservationSequence]) -> String {
    let mut out = String::new();
    for s in seqs {
        let mut first = true;
        for sym in s.symbols() {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{sym}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}
