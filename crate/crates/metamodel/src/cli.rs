//! Command-line front end: framework lifecycle, queries, the two domain
//! demos, stochastic fits, and network exports.
//!
//! Every run prints a metadata header to stderr (version, verb, effective
//! configuration) and writes its primary output to stdout or to `--out`.
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.

use crate::analytics::{
    connection_stats, export_bipartite, malleability, perturbation_malleability, ChangeOp,
    PerturbationSpec, SimpleGraph,
};
use crate::error::{Error, Result};
use crate::expr::{eval_set, parse_set};
use crate::fixtures;
use crate::framework::{FeatureKind, FeatureValue, FeatureVector, Framework};
use crate::lattice::{build_lattice_framework, diagonal_case, omega10_puzzle};
use crate::numbers::{build_divisibility_framework, run_case_queries};
use crate::search::{solve_equation, SearchConfig, SearchOutcome};
use crate::sets::ElementId;
use crate::stochastic::{
    bayes_decision_map, build_stochastic_framework, StochasticConfig, StochasticFramework,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "metamodel",
    version,
    about = "Symbolic meta-modeling over finite environments"
)]
struct Cli {
    /// Framework file to read, and for mutating verbs to write back.
    #[arg(long, global = true, value_name = "PATH")]
    framework: Option<PathBuf>,

    /// Write the primary output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output rendering.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Echoed into the metadata header; no core path draws randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create an empty framework file for a named universe.
    Init {
        /// Universe label the framework will carry.
        universe: String,
    },
    /// Load a framework file, revalidate every pairing, and summarize it.
    Load,
    /// Load a framework file and rewrite it in canonical form.
    Save,
    /// Observe one element with `key=value` features and revalidate.
    Ingest {
        /// Element id; integers become integer ids, anything else a name.
        element: String,
        /// Feature assignments, each `key=value`.
        #[arg(value_name = "KEY=VALUE")]
        features: Vec<String>,
    },
    /// Evaluate a closed expression, or solve a `lhs == rhs` equation.
    Query {
        /// Set-domain expression; `?x` unknowns need an equation.
        expression: String,
    },
    /// Build the binary lattice catalog and run its showcase searches.
    LatticeDemo {
        /// Lattice side length.
        #[arg(long = "L", default_value_t = 3)]
        side: usize,
    },
    /// Divisibility framework over 2..=20 with its six case queries.
    NumbersDemo,
    /// Fit the bundled iris table and compare the species regions.
    IrisDemo,
    /// Fit labeled 2-D points with kernel densities and percentile regions.
    StochasticFit {
        /// One-based pair of data columns, e.g. `2,3`; the label is the
        /// last CSV column.
        #[arg(long, default_value = "2,3")]
        features: String,
        /// Mass fraction each support region must cover.
        #[arg(long, default_value_t = 0.97)]
        chi: f64,
        /// `auto` for the data-driven width, or an explicit positive value.
        #[arg(long, default_value = "auto")]
        bandwidth: String,
        /// Headered CSV of points; defaults to the bundled iris table.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Cells per grid axis.
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Write the element-to-pairing network of a framework.
    ExportBipartite,
    /// Outcome-diversity index from probabilities or a perturbed graph.
    Malleability {
        /// Comma-separated edge list, e.g. `a-b,b-c,c-a`.
        #[arg(long, conflicts_with = "probs", required_unless_present = "probs")]
        edges: Option<String>,
        /// Comma-separated outcome probabilities summing to 1.
        #[arg(long)]
        probs: Option<String>,
        /// Change operator applied to the graph.
        #[arg(long, value_enum, default_value_t = ChangeArg::EdgeRemoval)]
        change: ChangeArg,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ChangeArg {
    EdgeRemoval,
    EdgeAddition,
    NodeRemoval,
}

impl From<ChangeArg> for ChangeOp {
    fn from(a: ChangeArg) -> ChangeOp {
        match a {
            ChangeArg::EdgeRemoval => ChangeOp::EdgeRemoval,
            ChangeArg::EdgeAddition => ChangeOp::EdgeAddition,
            ChangeArg::NodeRemoval => ChangeOp::NodeRemoval,
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Init { .. } => "init",
            Command::Load => "load",
            Command::Save => "save",
            Command::Ingest { .. } => "ingest",
            Command::Query { .. } => "query",
            Command::LatticeDemo { .. } => "lattice-demo",
            Command::NumbersDemo => "numbers-demo",
            Command::IrisDemo => "iris-demo",
            Command::StochasticFit { .. } => "stochastic-fit",
            Command::ExportBipartite => "export-bipartite",
            Command::Malleability { .. } => "malleability",
        }
    }

    fn config_echo(&self) -> String {
        match self {
            Command::Init { universe } => format!("universe={universe}"),
            Command::Load | Command::Save | Command::NumbersDemo | Command::IrisDemo => {
                match self {
                    Command::NumbersDemo => "range=2..=20 (default)".to_string(),
                    Command::IrisDemo => {
                        "features=2,3 (default), chi=0.97 (default), bandwidth=auto (default), \
                         resolution=256 (default)"
                            .to_string()
                    }
                    _ => String::new(),
                }
            }
            Command::Ingest { element, features } => {
                format!("element={element}, features={}", features.join(" "))
            }
            Command::Query { expression } => format!("expression={expression}"),
            Command::LatticeDemo { side } => {
                format!("L={side}{}", if *side == 3 { " (default)" } else { "" })
            }
            Command::StochasticFit {
                features,
                chi,
                bandwidth,
                input,
                resolution,
            } => format!(
                "features={features}{}, chi={chi}{}, bandwidth={bandwidth}{}, input={}, \
                 resolution={resolution}{}",
                mark_default(features == "2,3"),
                mark_default(*chi == 0.97),
                mark_default(bandwidth == "auto"),
                input
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "bundled iris (default)".to_string()),
                mark_default(*resolution == 256),
            ),
            Command::ExportBipartite => String::new(),
            Command::Malleability {
                edges,
                probs,
                change,
            } => format!(
                "source={}, change={:?}",
                match (edges, probs) {
                    (Some(e), _) => format!("edges `{e}`"),
                    (_, Some(p)) => format!("probs `{p}`"),
                    _ => "none".to_string(),
                },
                change
            ),
        }
    }
}

fn mark_default(is_default: bool) -> &'static str {
    if is_default {
        " (default)"
    } else {
        ""
    }
}

/// Parse and execute one invocation; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_thread_pool();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    print_metadata(&cli);
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Honor the METAMODEL_THREADS cap before any parallel work starts.
fn init_thread_pool() {
    if let Some(n) = std::env::var("METAMODEL_THREADS")
        .ok()
        .and_then(|raw| raw.parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn print_metadata(cli: &Cli) {
    eprintln!(
        "metamodel {} :: {}",
        env!("CARGO_PKG_VERSION"),
        cli.command.name()
    );
    let path = |p: &Option<PathBuf>| {
        p.as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "-".to_string())
    };
    eprintln!(
        "config: format={}, framework={}, out={}, seed={}",
        match cli.format {
            Format::Text => "text (default)",
            Format::Json => "json",
        },
        path(&cli.framework),
        path(&cli.out),
        cli.seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "none".to_string()),
    );
    let echo = cli.command.config_echo();
    if !echo.is_empty() {
        eprintln!("verb config: {echo}");
    }
}

/// Write the primary output to `--out` or stdout.
fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn framework_path(cli: &Cli) -> Result<&Path> {
    cli.framework
        .as_deref()
        .ok_or_else(|| Error::domain("this verb needs --framework PATH"))
}

/// Load a framework and rebind the built-in plugin families (divisibility,
/// lattice) so plugin-backed pairings survive the round trip.
fn load_framework(cli: &Cli) -> Result<Framework> {
    let mut fw = Framework::load(framework_path(cli)?)?;
    crate::numbers::rebind_divisibility_plugins(&mut fw);
    crate::lattice::rebind_lattice_plugins(&mut fw)?;
    fw.validate_all()?;
    Ok(fw)
}

/// For demo verbs: persist the built framework when a path was given.
fn maybe_save(cli: &Cli, fw: &Framework) -> Result<()> {
    if let Some(path) = &cli.framework {
        fw.save(path)?;
        eprintln!("framework written to {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Init { universe } => {
            let fw = Framework::new(universe.clone());
            fw.save(framework_path(cli)?)?;
            emit(cli, &format!("{}\n", fw.summary()))
        }
        Command::Load => {
            let fw = load_framework(cli)?;
            match cli.format {
                Format::Text => emit(cli, &format!("{}\n", fw.summary())),
                Format::Json => emit(cli, &fw.to_json()?),
            }
        }
        Command::Save => {
            let fw = load_framework(cli)?;
            let target = cli
                .out
                .as_deref()
                .map(Ok)
                .unwrap_or_else(|| framework_path(cli))?;
            fw.save(target)?;
            println!("{}", fw.summary());
            Ok(())
        }
        Command::Ingest { element, features } => run_ingest(cli, element, features),
        Command::Query { expression } => run_query(cli, expression),
        Command::LatticeDemo { side } => run_lattice_demo(cli, *side),
        Command::NumbersDemo => {
            let fw = build_divisibility_framework(2, 20)?;
            let report = run_case_queries(&fw)?;
            maybe_save(cli, &fw)?;
            match cli.format {
                Format::Text => emit(cli, &report.to_text()),
                Format::Json => emit(cli, &report.to_json()?),
            }
        }
        Command::IrisDemo => {
            let datasets = fixtures::iris_datasets()?;
            let axes = ["sepal_width".to_string(), "petal_length".to_string()];
            let sfw = build_stochastic_framework(axes, datasets, &StochasticConfig::default())?;
            emit_fit_report(cli, &sfw)
        }
        Command::StochasticFit {
            features,
            chi,
            bandwidth,
            input,
            resolution,
        } => run_stochastic_fit(cli, features, *chi, bandwidth, input.as_deref(), *resolution),
        Command::ExportBipartite => {
            let fw = load_framework(cli)?;
            let g = export_bipartite(&fw)?;
            let stats = connection_stats(&g);
            eprintln!(
                "network: {} elements, {} pairings, {} edges, mean associations {}",
                g.elements().len(),
                g.pairings().len(),
                g.edges().len(),
                stats.mean
            );
            match cli.format {
                Format::Text => emit(cli, &g.to_edge_csv()),
                Format::Json => emit(cli, &g.to_json()?),
            }
        }
        Command::Malleability {
            edges,
            probs,
            change,
        } => run_malleability(cli, edges.as_deref(), probs.as_deref(), *change),
    }
}

fn parse_element_id(raw: &str) -> ElementId {
    match raw.parse::<i64>() {
        Ok(v) => ElementId::Int(v),
        Err(_) => ElementId::Name(raw.to_string()),
    }
}

/// Parse `value` for `key`, honoring the registered feature kind when the
/// framework knows the key and falling back to shape-based inference.
fn parse_feature_value(fw: &Framework, key: &str, raw: &str) -> Result<FeatureValue> {
    let kind = fw.features().find(|d| d.id == key).map(|d| d.kind);
    let fail = |kind: FeatureKind| {
        Error::domain(format!("feature `{key}` expects a {kind:?}, got `{raw}`"))
    };
    match kind {
        Some(FeatureKind::Int) => raw
            .parse()
            .map(FeatureValue::Int)
            .map_err(|_| fail(FeatureKind::Int)),
        Some(FeatureKind::Float) => raw
            .parse()
            .map(FeatureValue::Float)
            .map_err(|_| fail(FeatureKind::Float)),
        Some(FeatureKind::Bool) => raw
            .parse()
            .map(FeatureValue::Bool)
            .map_err(|_| fail(FeatureKind::Bool)),
        Some(FeatureKind::Text) => Ok(FeatureValue::Text(raw.to_string())),
        None => Ok(if let Ok(v) = raw.parse::<i64>() {
            FeatureValue::Int(v)
        } else if let Ok(v) = raw.parse::<f64>() {
            FeatureValue::Float(v)
        } else if let Ok(v) = raw.parse::<bool>() {
            FeatureValue::Bool(v)
        } else {
            FeatureValue::Text(raw.to_string())
        }),
    }
}

fn run_ingest(cli: &Cli, element: &str, features: &[String]) -> Result<()> {
    let mut fw = load_framework(cli)?;
    let mut fv = FeatureVector::new();
    for assignment in features {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            Error::domain(format!("feature `{assignment}` is not of the form key=value"))
        })?;
        fv.insert(key.to_string(), parse_feature_value(&fw, key, raw)?);
    }
    fw.ingest_element(parse_element_id(element), fv)?;
    fw.save(framework_path(cli)?)?;
    emit(
        cli,
        &format!("observed `{element}`; {}\n", fw.summary()),
    )
}

fn outcome_text(outcome: &SearchOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "candidates evaluated: {}, exact: {}, co-optimal: {}",
        outcome.candidates_evaluated, outcome.exact_count, outcome.co_optimal_count
    );
    for (rank, r) in outcome.results.iter().enumerate() {
        let _ = write!(
            out,
            "{:>3}. lambda {:<8} {}  ::  {}",
            rank + 1,
            r.lambda.to_string(),
            r.expr_text,
            r.dual_model_text
        );
        if !r.bindings.is_empty() {
            let binds: Vec<String> = r
                .bindings
                .iter()
                .map(|(k, v)| format!("?{k} = {v}"))
                .collect();
            let _ = write!(out, "  [{}]", binds.join(", "));
        }
        let _ = writeln!(out);
    }
    out
}

fn run_query(cli: &Cli, expression: &str) -> Result<()> {
    let fw = load_framework(cli)?;
    if expression.contains("==") {
        let outcome = solve_equation(&fw, expression, &SearchConfig::default())?;
        return match cli.format {
            Format::Text => emit(cli, &outcome_text(&outcome)),
            Format::Json => emit(cli, &outcome.results_json()?),
        };
    }
    let e = parse_set(expression)?;
    let extension = eval_set(&e, &fw)?;
    let dual = fw.render_dual(&e);
    match cli.format {
        Format::Text => {
            let members: Vec<String> = extension.members().map(|m| m.to_string()).collect();
            emit(
                cli,
                &format!(
                    "expression: {e}\ndual model: {dual}\nextension ({} elements): {{{}}}\n",
                    members.len(),
                    members.join(", ")
                ),
            )
        }
        Format::Json => {
            let members: Vec<&ElementId> = extension.members().collect();
            let value = json!({
                "expr": e.to_string(),
                "dual_model": dual,
                "size": members.len(),
                "extension": members,
            });
            emit(cli, &format!("{}\n", serde_json::to_string_pretty(&value)?))
        }
    }
}

fn run_lattice_demo(cli: &Cli, side: usize) -> Result<()> {
    let (fw, cal) = build_lattice_framework(side)?;
    let ids: Vec<&str> = fw.pairing_ids().collect();
    let sizes: Vec<(String, usize)> = ids
        .iter()
        .map(|id| Ok((id.to_string(), fw.pairing(id)?.dataset().len())))
        .collect::<Result<_>>()?;
    let (target, outcome) = omega10_puzzle(&fw)?;
    let (narrow_join, wide_join) = diagonal_case(&fw)?;
    maybe_save(cli, &fw)?;
    match cli.format {
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "lattice {side}x{side}: {} patterns, calibration {:?} / {:?}",
                fw.n_elements(),
                cal.width_rule,
                cal.corner_connectivity
            );
            let _ = writeln!(out, "extension sizes:");
            for (id, n) in &sizes {
                let _ = writeln!(out, "  {id}: {n}");
            }
            let _ = writeln!(
                out,
                "puzzle target (w7 & w8 extension) has {} patterns; top matches:",
                target.len()
            );
            out.push_str(&outcome_text(&SearchOutcome {
                results: outcome.results.iter().take(5).cloned().collect(),
                ..outcome.clone()
            }));
            let _ = writeln!(
                out,
                "diagonal case: w2 & w7 -> {} patterns, w3 & w7 -> {} patterns",
                narrow_join.len(),
                wide_join.len()
            );
            emit(cli, &out)
        }
        Format::Json => {
            let top: Vec<_> = outcome
                .results
                .iter()
                .take(5)
                .map(|r| {
                    json!({
                        "expr": r.expr_text,
                        "dual_model": r.dual_model_text,
                        "lambda": [r.lambda.num(), r.lambda.den()],
                        "exact": r.exact,
                    })
                })
                .collect();
            let value = json!({
                "side": side,
                "patterns": fw.n_elements(),
                "calibration": {
                    "width_rule": format!("{:?}", cal.width_rule),
                    "corner_connectivity": format!("{:?}", cal.corner_connectivity),
                },
                "sizes": sizes.iter().map(|(id, n)| json!({"id": id, "size": n})).collect::<Vec<_>>(),
                "puzzle": {
                    "target_size": target.len(),
                    "candidates_evaluated": outcome.candidates_evaluated,
                    "exact_count": outcome.exact_count,
                    "co_optimal_count": outcome.co_optimal_count,
                    "top": top,
                },
                "diagonal": {
                    "narrow_join_size": narrow_join.len(),
                    "wide_join_size": wide_join.len(),
                },
            });
            emit(cli, &format!("{}\n", serde_json::to_string_pretty(&value)?))
        }
    }
}

fn parse_feature_pair(features: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = features.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::domain(format!(
            "--features wants two comma-separated column numbers, got `{features}`"
        )));
    }
    let col = |raw: &str| {
        raw.parse::<usize>()
            .map_err(|_| Error::domain(format!("feature column `{raw}` is not a number")))
    };
    Ok((col(parts[0])?, col(parts[1])?))
}

fn run_stochastic_fit(
    cli: &Cli,
    features: &str,
    chi: f64,
    bandwidth: &str,
    input: Option<&Path>,
    resolution: usize,
) -> Result<()> {
    let (fa, fb) = parse_feature_pair(features)?;
    let text = match input {
        Some(path) => std::fs::read_to_string(path)?,
        None => fixtures::iris_csv().to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::domain(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 3 {
        return Err(Error::domain(
            "csv needs at least two data columns and a trailing label column",
        ));
    }
    let label_col = headers.len() - 1;
    for f in [fa, fb] {
        if !(1..=label_col).contains(&f) {
            return Err(Error::domain(format!(
                "feature columns run from 1 to {label_col}, got {f}"
            )));
        }
    }
    let datasets = fixtures::labeled_points_from_csv(&text, fa - 1, fb - 1, label_col)?;
    let config = StochasticConfig {
        chi,
        resolution,
        bandwidth: match bandwidth {
            "auto" => None,
            raw => Some(raw.parse::<f64>().map_err(|_| {
                Error::domain(format!("--bandwidth wants `auto` or a number, got `{raw}`"))
            })?),
        },
    };
    let axes = [headers[fa - 1].clone(), headers[fb - 1].clone()];
    let sfw = build_stochastic_framework(axes, datasets, &config)?;
    emit_fit_report(cli, &sfw)
}

/// Shared report body for `iris-demo` and `stochastic-fit`.
fn emit_fit_report(cli: &Cli, sfw: &StochasticFramework) -> Result<()> {
    let grid = sfw.grid();
    let labels = sfw.labels();
    let mut rows = Vec::new();
    for label in labels {
        rows.push((
            label.clone(),
            sfw.points(label)?.len(),
            sfw.region(label)?.cell_count(),
            sfw.density(label)?.mass(),
        ));
    }
    let mut pairs = Vec::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            pairs.push((
                labels[i].clone(),
                labels[j].clone(),
                sfw.lambda_between(&labels[i], &labels[j])?,
            ));
        }
    }
    let union_mass = sfw.union_density().mass();
    let decision = if labels.len() >= 2 {
        let map = bayes_decision_map(sfw)?;
        let (per_label, undecided) = map.tally();
        Some((per_label, undecided))
    } else {
        None
    };
    match cli.format {
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "bandwidth {}, chi {}, resolution {}",
                sfw.bandwidth(),
                sfw.chi(),
                grid.resolution()
            );
            let _ = writeln!(
                out,
                "grid: {} in [{}, {}], {} in [{}, {}]",
                grid.axes()[0],
                grid.extent()[0][0],
                grid.extent()[0][1],
                grid.axes()[1],
                grid.extent()[1][0],
                grid.extent()[1][1]
            );
            for (label, points, cells, mass) in &rows {
                let _ = writeln!(
                    out,
                    "dataset {label}: {points} points, region {cells} cells, mass {mass}"
                );
            }
            for (a, b, v) in &pairs {
                let _ = writeln!(out, "lambda({a}, {b}) = {v}");
            }
            let _ = writeln!(out, "union mass: {union_mass}");
            if let Some((per_label, undecided)) = &decision {
                let tally: Vec<String> = labels
                    .iter()
                    .zip(per_label)
                    .map(|(l, n)| format!("{l} {n}"))
                    .collect();
                let _ = writeln!(
                    out,
                    "decision cells: {}, below floor {undecided}",
                    tally.join(", ")
                );
            }
            emit(cli, &out)
        }
        Format::Json => {
            let value = json!({
                "bandwidth": sfw.bandwidth(),
                "chi": sfw.chi(),
                "resolution": grid.resolution(),
                "axes": grid.axes(),
                "extent": grid.extent(),
                "datasets": rows
                    .iter()
                    .map(|(label, points, cells, mass)| json!({
                        "label": label,
                        "points": points,
                        "region_cells": cells,
                        "mass": mass,
                    }))
                    .collect::<Vec<_>>(),
                "lambda": pairs
                    .iter()
                    .map(|(a, b, v)| json!({"a": a, "b": b, "value": v}))
                    .collect::<Vec<_>>(),
                "union_mass": union_mass,
                "decision": decision.as_ref().map(|(per_label, undecided)| json!({
                    "cells_per_label": labels
                        .iter()
                        .zip(per_label)
                        .map(|(l, n)| json!({"label": l, "cells": n}))
                        .collect::<Vec<_>>(),
                    "below_floor": undecided,
                })),
            });
            emit(cli, &format!("{}\n", serde_json::to_string_pretty(&value)?))
        }
    }
}

fn parse_edge_list(raw: &str) -> Result<SimpleGraph> {
    let mut names: Vec<String> = Vec::new();
    let mut index = |name: &str| -> usize {
        match names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                names.push(name.to_string());
                names.len() - 1
            }
        }
    };
    let mut edges = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        let (a, b) = part.split_once('-').ok_or_else(|| {
            Error::domain(format!("edge `{part}` is not of the form a-b"))
        })?;
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() {
            return Err(Error::domain(format!("edge `{part}` has an empty endpoint")));
        }
        let e = (index(a), index(b));
        edges.push(e);
    }
    SimpleGraph::new(names.len(), edges)
}

fn run_malleability(
    cli: &Cli,
    edges: Option<&str>,
    probs: Option<&str>,
    change: ChangeArg,
) -> Result<()> {
    if let Some(raw) = probs {
        let probs: Vec<f64> = raw
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::domain(format!("probability `{p}` is not a number")))
            })
            .collect::<Result<_>>()?;
        let m = malleability(&probs)?;
        return match cli.format {
            Format::Text => emit(
                cli,
                &format!("malleability {m} over {} outcome groups\n", probs.len()),
            ),
            Format::Json => emit(
                cli,
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&json!({
                        "probs": probs,
                        "malleability": m,
                    }))?
                ),
            ),
        };
    }
    let graph = parse_edge_list(edges.expect("clap enforces edges or probs"))?;
    let report = perturbation_malleability(&PerturbationSpec::new(graph, change.into()))?;
    match cli.format {
        Format::Text => emit(cli, &report.to_text()),
        Format::Json => emit(cli, &report.to_json()?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn verbs_parse_with_global_flags() {
        let cli = parse_ok(&[
            "metamodel",
            "query",
            "--framework",
            "f.json",
            "--format",
            "json",
            "w2 | w3",
        ]);
        assert_eq!(cli.command.name(), "query");
        assert_eq!(cli.format, Format::Json);
        assert!(cli.framework.is_some());

        let cli = parse_ok(&["metamodel", "lattice-demo", "--L", "3"]);
        assert_eq!(cli.command.name(), "lattice-demo");
        assert!(matches!(cli.command, Command::LatticeDemo { side: 3 }));
    }

    #[test]
    fn malleability_requires_a_source() {
        let err = Cli::try_parse_from(["metamodel", "malleability"]).unwrap_err();
        assert!(err.use_stderr());
        assert!(Cli::try_parse_from([
            "metamodel",
            "malleability",
            "--edges",
            "a-b",
            "--probs",
            "0.5,0.5"
        ])
        .is_err());
    }

    #[test]
    fn bad_usage_exits_2_and_help_exits_0() {
        assert_eq!(run(["metamodel", "no-such-verb"]), 2);
        assert_eq!(run(["metamodel", "--help"]), 0);
        assert_eq!(run(["metamodel", "--version"]), 0);
    }

    #[test]
    fn missing_framework_is_a_domain_error() {
        assert_eq!(run(["metamodel", "load"]), 1);
    }

    #[test]
    fn edge_lists_parse_by_first_appearance() {
        let g = parse_edge_list("a-b, b-c, c-a").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!(parse_edge_list("a-a").is_err());
        assert!(parse_edge_list("a").is_err());
        assert!(parse_edge_list("a-").is_err());
    }

    #[test]
    fn feature_values_follow_registered_kinds() {
        let mut fw = Framework::new("t");
        fw.register_feature(crate::framework::FeatureDef::new("v", FeatureKind::Int))
            .unwrap();
        assert_eq!(
            parse_feature_value(&fw, "v", "7").unwrap(),
            FeatureValue::Int(7)
        );
        assert!(parse_feature_value(&fw, "v", "x").is_err());
        // Unregistered keys fall back to shape-based inference.
        assert_eq!(
            parse_feature_value(&fw, "w", "1.5").unwrap(),
            FeatureValue::Float(1.5)
        );
        assert_eq!(
            parse_feature_value(&fw, "w", "true").unwrap(),
            FeatureValue::Bool(true)
        );
        assert_eq!(
            parse_feature_value(&fw, "w", "red").unwrap(),
            FeatureValue::Text("red".to_string())
        );
    }

    #[test]
    fn plugin_frameworks_survive_the_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nums.json");
        let fw = build_divisibility_framework(2, 20).unwrap();
        fw.save(&path).unwrap();
        let cli = parse_ok(&[
            "metamodel",
            "load",
            "--framework",
            path.to_str().unwrap(),
        ]);
        let loaded = load_framework(&cli).unwrap();
        loaded.validate_all().unwrap();
        assert_eq!(loaded.to_json().unwrap(), fw.to_json().unwrap());

        let (fw, _) = build_lattice_framework(3).unwrap();
        let path = dir.path().join("lattice.json");
        fw.save(&path).unwrap();
        let cli = parse_ok(&[
            "metamodel",
            "load",
            "--framework",
            path.to_str().unwrap(),
        ]);
        let loaded = load_framework(&cli).unwrap();
        assert_eq!(loaded.to_json().unwrap(), fw.to_json().unwrap());
    }

    #[test]
    fn feature_pairs_validate() {
        assert_eq!(parse_feature_pair("2,3").unwrap(), (2, 3));
        assert_eq!(parse_feature_pair(" 1 , 4 ").unwrap(), (1, 4));
        assert!(parse_feature_pair("2").is_err());
        assert!(parse_feature_pair("2,x").is_err());
    }
}
