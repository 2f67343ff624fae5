use std::fmt::Write as _;
use std::path::Path;

use markov_diffusion::experiments::{
    diffusion_experiment, generating_hmm, mix_seed, plateau_detector, row_equality_snapshot, sequence_cap,
    training_experiment, DiffusionConfig, SpanConfig, TopologyKind, GENERATOR_END_STATE,
};
use markov_diffusion::graph::CanonicalDecomposition;
use markov_diffusion::hmm::credit_trace;
use markov_diffusion::io::{format_f64, parse_graph, parse_hmm, parse_matrix, parse_sequences, sequences_to_text};
use markov_diffusion::stochastic::{geometric_rate_estimate, stationary_distribution};
use markov_diffusion::{Error, TransitionGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::output::{csv_bytes, emit, read_file, to_json_pretty, write_file, CliError, CliResult, Metadata};
use crate::{Cli, Command, ReportFormat, TableFormat};

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Analyze {
            matrix,
            normalize,
            threshold,
            max_t,
            format,
            out,
        } => {
            let a = parse_matrix(&read_file(matrix)?, *normalize)?;
            let report = analyze(&a, *threshold, *max_t as usize)?;
            let body = match format {
                ReportFormat::Json => to_json_pretty(&report),
                ReportFormat::Text => report.to_text(),
            };
            let meta = Metadata::new(
                "analyze",
                cli.seed,
                json!({
                    "matrix": matrix,
                    "normalize": normalize,
                    "threshold": threshold,
                    "max_t": max_t,
                    "format": format!("{format:?}").to_lowercase(),
                }),
            );
            emit(out.out.as_deref(), body.as_bytes(), &meta.to_value())
        }
        Command::Decompose {
            input,
            graph,
            normalize,
            threshold,
            format,
            out,
        } => {
            let text = read_file(input)?;
            let g = if *graph {
                parse_graph(&text)?
            } else {
                TransitionGraph::incidence(&parse_matrix(&text, *normalize)?, *threshold)
            };
            let report = DecomposeReport::new(&g);
            let body = match format {
                ReportFormat::Json => to_json_pretty(&report),
                ReportFormat::Text => report.to_text(),
            };
            let meta = Metadata::new(
                "decompose",
                cli.seed,
                json!({
                    "input": input,
                    "graph": graph,
                    "normalize": normalize,
                    "threshold": threshold,
                    "format": format!("{format:?}").to_lowercase(),
                }),
            );
            emit(out.out.as_deref(), body.as_bytes(), &meta.to_value())
        }
        Command::Diffuse {
            topology,
            states,
            steps,
            seeds,
            homogeneous,
            format,
            out,
        } => {
            let cfg = DiffusionConfig {
                n: *states as usize,
                steps: *steps as usize,
                seeds: (0..*seeds).map(|i| mix_seed(cli.seed, i)).collect(),
                topology: parse_topology(topology)?,
                homogeneous: *homogeneous,
            };
            let result = diffusion_experiment(&cfg)?;
            let body = match format {
                TableFormat::Json => to_json_pretty(&result).into_bytes(),
                TableFormat::Csv => {
                    let topo = cfg.topology.to_string();
                    csv_bytes(
                        &["topology", "seed", "step", "tau1", "floored"],
                        result.series.iter().flat_map(|s| {
                            let topo = topo.clone();
                            s.tau1.iter().zip(&s.floored).enumerate().map(move |(t, (tau, fl))| {
                                vec![
                                    topo.clone(),
                                    s.seed.to_string(),
                                    (t + 1).to_string(),
                                    format_f64(*tau),
                                    fl.to_string(),
                                ]
                            })
                        }),
                    )?
                }
            };
            let meta = Metadata::new("diffuse", cli.seed, json!({ "experiment": cfg, "format": table_name(*format) }));
            emit(out.out.as_deref(), &body, &meta.to_value())
        }
        Command::Rowsnap {
            states,
            steps,
            seeds,
            format,
            out,
        } => {
            let mut runs = Vec::new();
            for i in 0..*seeds {
                let seed = mix_seed(cli.seed, i);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                runs.push((seed, row_equality_snapshot(*states as usize, *steps as usize, &mut rng)?));
            }
            let body = match format {
                TableFormat::Json => {
                    let value: Vec<_> = runs.iter().map(|(seed, snaps)| json!({ "seed": seed, "steps": snaps })).collect();
                    to_json_pretty(&value).into_bytes()
                }
                TableFormat::Csv => csv_bytes(
                    &["seed", "step", "spread", "tau1"],
                    runs.iter().flat_map(|(seed, snaps)| {
                        snaps.iter().map(move |s| {
                            vec![seed.to_string(), s.step.to_string(), format_f64(s.spread), format_f64(s.tau1)]
                        })
                    }),
                )?,
            };
            let meta = Metadata::new(
                "rowsnap",
                cli.seed,
                json!({ "states": states, "steps": steps, "seeds": seeds, "format": table_name(*format) }),
            );
            emit(out.out.as_deref(), &body, &meta.to_value())
        }
        Command::Train {
            spans,
            trials,
            sequences,
            topology,
            max_epochs,
            rel_tol,
            slack,
            out_dir,
        } => {
            let cfg = SpanConfig {
                spans: spans.clone(),
                trials_per_span: *trials as usize,
                sequences: *sequences as usize,
                learner: parse_topology(topology)?,
                max_epochs: *max_epochs as usize,
                rel_tol: *rel_tol,
                success_slack: *slack,
            };
            cfg.validate()?;
            train(&cfg, cli.seed, cli.jobs as usize, out_dir)
        }
        Command::Sample {
            span,
            model,
            count,
            cap,
            out,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let count = *count as usize;
            let (seqs, effective_cap) = match (span, model) {
                (Some(span), _) => {
                    if !(*span > 0.0 && span.is_finite()) {
                        return Err(CliError::Usage(format!("span must be positive, got {span}")));
                    }
                    let limit = cap.map_or_else(|| sequence_cap(*span), |c| c as usize);
                    let model = generating_hmm(*span)?;
                    let seqs: Vec<_> = (0..count)
                        .map(|_| model.sample_until(limit, |s| s == GENERATOR_END_STATE, &mut rng).observations)
                        .collect();
                    (seqs, limit)
                }
                (None, Some(path)) => {
                    let model = parse_hmm(&read_file(path)?)?;
                    let limit = cap.map_or(100, |c| c as usize);
                    let seqs: Vec<_> = (0..count).map(|_| model.sample(limit, &mut rng).observations).collect();
                    (seqs, limit)
                }
                (None, None) => return Err(CliError::Usage("either --span or --model is required".into())),
            };
            let meta = Metadata::new(
                "sample",
                cli.seed,
                json!({ "span": span, "model": model, "count": count, "cap": effective_cap }),
            );
            emit(out.out.as_deref(), sequences_to_text(&seqs).as_bytes(), &meta.to_value())
        }
        Command::Credit {
            model,
            sequences,
            format,
            out,
        } => {
            let m = parse_hmm(&read_file(model)?)?;
            let seqs = parse_sequences(&read_file(sequences)?, m.k())?;
            let traces = seqs.iter().map(|y| credit_trace(&m, y)).collect::<Result<Vec<_>, Error>>()?;
            let body = match format {
                TableFormat::Json => to_json_pretty(&traces).into_bytes(),
                TableFormat::Csv => csv_bytes(
                    &["sequence", "t", "tau1", "bound", "birkhoff_bound"],
                    traces.iter().enumerate().flat_map(|(s, tr)| {
                        (0..tr.tau1_series.len()).map(move |t| {
                            vec![
                                s.to_string(),
                                (t + 1).to_string(),
                                tr.tau1_series[t].map_or_else(|| "undefined".to_string(), format_f64),
                                format_f64(tr.bound_series[t]),
                                format_f64(tr.birkhoff_bound_series[t]),
                            ]
                        })
                    }),
                )?,
            };
            let meta = Metadata::new(
                "credit",
                cli.seed,
                json!({ "model": model, "sequences": sequences, "format": table_name(*format) }),
            );
            emit(out.out.as_deref(), &body, &meta.to_value())
        }
    }
}

fn table_name(f: TableFormat) -> &'static str {
    match f {
        TableFormat::Csv => "csv",
        TableFormat::Json => "json",
    }
}

fn parse_topology(s: &str) -> CliResult<TopologyKind> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    n: usize,
    tau1: f64,
    tau_b: Option<f64>,
    tau_b_note: Option<String>,
    irreducible: bool,
    period: Option<usize>,
    primitive: bool,
    decomposition: CanonicalDecomposition,
    stationary: Option<Vec<f64>>,
    geometric_rate: Option<f64>,
    fit_quality: Option<f64>,
    stationary_note: Option<String>,
}

fn analyze(a: &markov_diffusion::StochasticMatrix, threshold: f64, max_t: usize) -> CliResult<AnalyzeReport> {
    let g = TransitionGraph::incidence(a, threshold);
    let (tau_b, tau_b_note) = match a.birkhoff() {
        Ok(c) => (Some(c.value), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (stationary, geometric_rate, fit_quality, stationary_note) = match stationary_distribution(a) {
        Ok(v) => {
            let fit = geometric_rate_estimate(a, max_t)?;
            (Some(v.into_vec()), Some(fit.rate), Some(fit.fit_quality), None)
        }
        Err(e) => (None, None, None, Some(e.to_string())),
    };
    Ok(AnalyzeReport {
        n: a.n(),
        tau1: a.dobrushin().value,
        tau_b,
        tau_b_note,
        irreducible: g.is_irreducible(),
        period: g.period().ok(),
        primitive: g.is_primitive(),
        decomposition: g.canonical_decomposition(),
        stationary,
        geometric_rate,
        fit_quality,
        stationary_note,
    })
}

fn list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn decomposition_text(d: &CanonicalDecomposition, out: &mut String) {
    for b in &d.primitive_blocks {
        writeln!(out, "  primitive block: [{}]", list(b)).unwrap();
    }
    for b in &d.periodic_blocks {
        writeln!(out, "  periodic block: [{}] period {}", list(&b.states), b.period).unwrap();
    }
    writeln!(out, "  transient: [{}]", list(&d.transient)).unwrap();
    writeln!(out, "  permutation: [{}]", list(&d.permutation)).unwrap();
}

impl AnalyzeReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "states: {}", self.n).unwrap();
        writeln!(s, "tau1: {}", self.tau1).unwrap();
        match (self.tau_b, &self.tau_b_note) {
            (Some(v), _) => writeln!(s, "tau_b: {v}").unwrap(),
            (None, note) => writeln!(s, "tau_b: undefined ({})", note.as_deref().unwrap_or("")).unwrap(),
        }
        writeln!(s, "irreducible: {}", self.irreducible).unwrap();
        match self.period {
            Some(p) => writeln!(s, "period: {p}").unwrap(),
            None => writeln!(s, "period: undefined").unwrap(),
        }
        writeln!(s, "primitive: {}", self.primitive).unwrap();
        writeln!(s, "decomposition:").unwrap();
        decomposition_text(&self.decomposition, &mut s);
        match &self.stationary {
            Some(v) => {
                let entries: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                writeln!(s, "stationary: [{}]", entries.join(" ")).unwrap();
                writeln!(
                    s,
                    "geometric rate: {} (fit r^2 {})",
                    self.geometric_rate.unwrap_or(f64::NAN),
                    self.fit_quality.unwrap_or(f64::NAN)
                )
                .unwrap();
            }
            None => writeln!(
                s,
                "stationary: none ({})",
                self.stationary_note.as_deref().unwrap_or("not available")
            )
            .unwrap(),
        }
        s
    }
}

#[derive(Debug, Serialize)]
struct DecomposeReport {
    n: usize,
    decomposition: CanonicalDecomposition,
    /// Incidence after relabeling states by the permutation.
    permuted_incidence: Vec<Vec<u8>>,
}

impl DecomposeReport {
    fn new(g: &TransitionGraph) -> Self {
        let decomposition = g.canonical_decomposition();
        let permuted_incidence = g.permuted(&decomposition.permutation).to_rows();
        Self {
            n: g.n(),
            decomposition,
            permuted_incidence,
        }
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "states: {}", self.n).unwrap();
        writeln!(s, "decomposition:").unwrap();
        decomposition_text(&self.decomposition, &mut s);
        writeln!(s, "permuted incidence:").unwrap();
        for row in &self.permuted_incidence {
            writeln!(s, "  {}", row.iter().map(u8::to_string).collect::<String>()).unwrap();
        }
        s
    }
}

/// Plateau detection settings echoed in the training summary.
const PLATEAU_WINDOW: usize = 10;

fn train(cfg: &SpanConfig, seed: u64, jobs: usize, out_dir: &Path) -> CliResult<()> {
    if !out_dir.is_dir() {
        return Err(CliError::Data(format!("output directory {} does not exist", out_dir.display())));
    }
    let result = training_experiment(cfg, seed, jobs)?;
    let training = csv_bytes(
        &["span", "seed", "topology", "epochs", "final_ll", "generator_ll", "converged"],
        result.reports.iter().map(|r| {
            vec![
                format_f64(r.span),
                r.seed.to_string(),
                r.topology.clone(),
                r.epochs_used.to_string(),
                format_f64(r.final_log_likelihood),
                format_f64(r.generator_log_likelihood),
                r.converged.to_string(),
            ]
        }),
    )?;
    let history = csv_bytes(
        &["span", "seed", "epoch", "log_likelihood"],
        result.reports.iter().flat_map(|r| {
            r.history
                .iter()
                .enumerate()
                .map(move |(e, ll)| vec![format_f64(r.span), r.seed.to_string(), (e + 1).to_string(), format_f64(*ll)])
        }),
    )?;
    let plateaus: Vec<_> = result
        .reports
        .iter()
        .map(|r| {
            json!({
                "span": r.span,
                "seed": r.seed,
                "plateaus": plateau_detector(&r.history, PLATEAU_WINDOW, cfg.rel_tol),
            })
        })
        .collect();
    let meta = Metadata::new("train", seed, json!({ "experiment": cfg, "jobs": jobs }));
    let summary = json!({
        "metadata": meta.to_value(),
        "success": result.summary,
        "plateau_window": PLATEAU_WINDOW,
        "plateaus": plateaus,
    });
    write_file(&out_dir.join("training.csv"), &training)?;
    write_file(&out_dir.join("history.csv"), &history)?;
    write_file(&out_dir.join("summary.json"), to_json_pretty(&summary).as_bytes())
}
