//! `phasefield` command-line tool: simulate, extract phases, fit, sample,
//! classify, evaluate and reproduce the reference experiments.

mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasefield::chow_liu::fit_chow_liu;
use phasefield::hypothesis::{confusion, llr_score, mary_log_likelihoods, roc, tree_llr_score};
use phasefield::iso::{lambda_default, recover_structure, refit_unregularized, LambdaMode, SolverConfig};
use phasefield::repro::{derive_seed, run_binary, run_mary, run_recovery, BinaryConfig, MaryConfig, RecoveryConfig};
use phasefield::sampler::{gibbs_sample, GibbsConfig, DEFAULT_BURN_IN};
use phasefield::signal::{instantaneous_phase, Band, PhaseOptions, TimeSeriesPanel};
use phasefield::wave::{gen_corpus, CorpusSpec, EllipticalWaveSpec, PlaneWaveSpec, SensorGrid};
use phasefield::{GraphModel, GraphStructure, PhaseDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::io::{collect_items, labels_csv, load_dataset, load_model, read_json, read_labels, LoadedModel, Run};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Convergence(String),
}

impl CliError {
    pub fn usage(msg: String) -> Self {
        CliError::Usage(msg)
    }

    pub fn data(msg: String) -> Self {
        CliError::Data(msg)
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Convergence(_) => "convergence",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Convergence(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Convergence(m) => f.write_str(m),
        }
    }
}

impl From<phasefield::Error> for CliError {
    fn from(e: phasefield::Error) -> Self {
        match e {
            phasefield::Error::InvalidParameter(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "phasefield", version, about = "Pairwise von Mises phase-coupling models")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for every random choice.
    #[arg(long, global = true, env = "PHASEFIELD_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate model data or wave panels.
    Simulate(SimulateArgs),
    /// Band-pass filter and take the analytic-signal phase of panels.
    ExtractPhase(ExtractArgs),
    /// Fit a Chow-Liu tree or a screening-based graph model.
    Fit(FitArgs),
    /// Gibbs-sample a model.
    Sample(SampleArgs),
    /// Score datasets against two or more models.
    Classify(ClassifyArgs),
    /// Confusion matrix and ROC curve from classification scores.
    Evaluate(EvaluateArgs),
    /// Run a reference experiment.
    Repro(ReproArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SimKind {
    Tree,
    Grid4,
    Plane,
    Elliptical,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: SimKind,
    #[arg(long)]
    out: PathBuf,
    /// Nodes of the random tree.
    #[arg(long, default_value_t = 8)]
    p: usize,
    /// Grid side (default 3 for grid4 and elliptical, 4 for plane).
    #[arg(long)]
    side: Option<usize>,
    /// Samples for tree and grid4.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Panels per class for plane and elliptical.
    #[arg(long, default_value_t = 10)]
    per_class: usize,
    /// Time points per panel.
    #[arg(long)]
    n_t: Option<usize>,
    /// Sampling interval in seconds.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Sensor spacing of the plane-wave grid.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
}

#[derive(Args, Serialize)]
struct ExtractArgs {
    /// A panel CSV, or a directory written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Sampling interval; read from the simulate manifest for directories.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, requires = "high")]
    low: Option<f64>,
    #[arg(long, requires = "low")]
    high: Option<f64>,
    #[arg(long, default_value_t = 8)]
    order: usize,
    #[arg(long)]
    keep_edges: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FitMethod {
    Chowliu,
    Iso,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Structure,
    Parameter,
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[arg(long, value_enum)]
    method: FitMethod,
    /// Phase CSV files or directories; all rows are pooled.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Use only datasets with this label.
    #[arg(long)]
    class: Option<usize>,
    /// Keep every k-th row of each dataset.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Root of the Chow-Liu tree.
    #[arg(long, default_value_t = 0)]
    root: usize,
    /// Penalty; overrides the default schedule.
    #[arg(long, conflicts_with = "eps")]
    lambda: Option<f64>,
    /// Failure probability of the default penalty schedule.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Structure)]
    lambda_mode: ModeArg,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Re-estimate the declared edges without penalty.
    #[arg(long)]
    refit: bool,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    /// Model JSON files; index order defines the class labels.
    #[arg(long = "model", required = true, num_args = 1..)]
    models: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write scores.csv.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// scores.json from `classify`.
    #[arg(long)]
    scores: PathBuf,
    /// Label file or directory holding labels.csv; defaults to the labels
    /// recorded in the scores.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write roc.csv and confusion.csv.
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Figure {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
}

#[derive(Args, Serialize)]
struct ReproArgs {
    #[arg(value_enum)]
    figure: Figure,
    #[arg(long)]
    out: PathBuf,
    /// Full-scale grids instead of desk-scale defaults.
    #[arg(long)]
    full: bool,
    /// Override trials per cell (fig2a, fig2b).
    #[arg(long)]
    trials: Option<usize>,
    /// Override datasets per class (fig3a, fig3b).
    #[arg(long)]
    per_class: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::Usage(e.render().to_string().trim_end().to_string()));
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return fail(&CliError::usage("--jobs must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return fail(&CliError::data(e.to_string()));
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
    ExitCode::from(e.code())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::ExtractPhase(a) => extract_phase(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Sample(a) => sample(cli, a),
        Command::Classify(a) => classify(cli, a),
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Repro(a) => repro(cli, a),
    }
}

fn dataset_csv(d: &PhaseDataset) -> Result<String, CliError> {
    let mut buf = Vec::new();
    d.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

fn structure_json(g: &GraphStructure) -> Value {
    json!({ "p": g.p(), "edges": g.edges() })
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), CliError> {
    let mut run = Run::start("simulate", cli.seed, cli.jobs, &a.out)?;
    let details = match a.kind {
        SimKind::Tree | SimKind::Grid4 => {
            let g = match a.kind {
                SimKind::Tree => {
                    if a.p < 2 {
                        return Err(CliError::usage("--p must be at least 2".into()));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cli.seed, &[10]));
                    GraphStructure::random_tree(a.p, &mut rng)
                }
                _ => {
                    let side = a.side.unwrap_or(3);
                    if side < 2 {
                        return Err(CliError::usage("--side must be at least 2".into()));
                    }
                    GraphStructure::torus(side, side)
                }
            };
            let m = GraphModel::uniform(g.clone(), a.kappa, a.mu)?;
            let cfg = GibbsConfig { burn_in: a.burn_in, thin: a.thin, seed: derive_seed(cli.seed, &[11]) };
            let d = gibbs_sample(&m, a.n, &cfg)?;
            run.write_text("model.json", &format!("{}\n", m.to_json()?))?;
            run.write_text("data.csv", &dataset_csv(&d)?)?;
            json!({ "kind": a.kind, "structure": structure_json(&g), "n": a.n })
        }
        SimKind::Plane | SimKind::Elliptical => {
            let (spec, grid) = match a.kind {
                SimKind::Plane => {
                    let mut w = PlaneWaveSpec::default();
                    w.n_t = a.n_t.unwrap_or(w.n_t);
                    w.dt = a.dt.unwrap_or(w.dt);
                    w.noise_sd = a.noise_sd.unwrap_or(w.noise_sd);
                    let side = a.side.unwrap_or(4);
                    (CorpusSpec::Plane { spec: w }, SensorGrid::with_spacing(side, side, a.spacing)?)
                }
                _ => {
                    let mut w = EllipticalWaveSpec::default();
                    w.n_t = a.n_t.unwrap_or(w.n_t);
                    w.dt = a.dt.unwrap_or(w.dt);
                    w.noise_sd = a.noise_sd.unwrap_or(w.noise_sd);
                    let side = a.side.unwrap_or(3);
                    (CorpusSpec::Elliptical { spec: w }, SensorGrid::unit_square(side, side)?)
                }
            };
            let dt = match spec {
                CorpusSpec::Plane { spec } => spec.dt,
                CorpusSpec::Elliptical { spec } => spec.dt,
            };
            let corpus = gen_corpus(a.per_class, &spec, &grid, cli.seed)?;
            let mut panels = Vec::new();
            for (k, lp) in corpus.panels.iter().enumerate() {
                let rel = format!("panels/panel_{k:05}.csv");
                let mut buf = Vec::new();
                lp.wave.panel.write_csv(&mut buf)?;
                run.write_text(&rel, &String::from_utf8(buf).expect("csv output is UTF-8"))?;
                panels.push(json!({ "file": rel, "label": lp.label, "params": lp.wave.params }));
            }
            run.write_text(io::LABELS, &labels_csv(&corpus.labels()))?;
            json!({
                "kind": a.kind,
                "spec": spec,
                "grid": grid,
                "dt": dt,
                "n_classes": corpus.n_classes,
                "panels": panels,
            })
        }
    };
    run.finish(a, details)
}

fn extract_phase(cli: &Cli, a: &ExtractArgs) -> Result<(), CliError> {
    let band = match (a.low, a.high) {
        (Some(low), Some(high)) => Some(Band { low, high, order: a.order }),
        _ => None,
    };
    let opts = PhaseOptions { band, keep_edges: a.keep_edges };
    let mut run = Run::start("extract-phase", cli.seed, cli.jobs, &a.out)?;

    // (source, destination) pairs
    let (jobs, dt, labels) = if a.input.is_dir() {
        let manifest = read_json(&a.input.join(io::MANIFEST))?;
        let details = &manifest["details"];
        let dt = match a.dt.or_else(|| details["dt"].as_f64()) {
            Some(dt) => dt,
            None => return Err(CliError::usage("--dt is required: the input manifest records none".into())),
        };
        let files: Vec<String> = details["panels"]
            .as_array()
            .ok_or_else(|| CliError::data(format!("{}: manifest lists no panels", a.input.display())))?
            .iter()
            .filter_map(|p| p["file"].as_str().map(str::to_string))
            .collect();
        let jobs: Vec<(PathBuf, String)> = files
            .iter()
            .map(|f| {
                let name = PathBuf::from(f).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                (a.input.join(f), format!("phases/{name}"))
            })
            .collect();
        let labels = a.input.join(io::LABELS);
        (jobs, dt, labels.is_file().then(|| read_labels(&labels)).transpose()?)
    } else {
        let dt = a.dt.ok_or_else(|| CliError::usage("--dt is required for a single panel".into()))?;
        (vec![(a.input.clone(), "phase.csv".to_string())], dt, None)
    };

    let results: Vec<(String, String)> = jobs
        .par_iter()
        .map(|(src, dst)| {
            let panel = TimeSeriesPanel::load(src, dt).map_err(|e| CliError::data(format!("{}: {e}", src.display())))?;
            let d = instantaneous_phase(&panel, &opts)?;
            Ok((dst.clone(), dataset_csv(&d)?))
        })
        .collect::<Result<_, CliError>>()?;
    for (dst, text) in &results {
        run.write_text(dst, text)?;
    }
    if let Some(labels) = &labels {
        run.write_text(io::LABELS, &labels_csv(labels))?;
    }
    let details = json!({ "dt": dt, "band": band, "keep_edges": a.keep_edges, "datasets": results.len() });
    run.finish(a, details)
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<(), CliError> {
    if a.stride == 0 {
        return Err(CliError::usage("--stride must be at least 1".into()));
    }
    let mut items = collect_items(&a.data)?;
    if let Some(c) = a.class {
        if items.iter().any(|i| i.label.is_none()) {
            return Err(CliError::usage("--class needs data directories with labels.csv".into()));
        }
        items.retain(|i| i.label == Some(c));
        if items.is_empty() {
            return Err(CliError::data(format!("no datasets with label {c}")));
        }
    }
    let parts: Vec<PhaseDataset> =
        items.par_iter().map(|i| load_dataset(i).map(|d| d.decimate(a.stride))).collect::<Result<_, _>>()?;
    let d = PhaseDataset::concat(&parts)?;

    let mut run = Run::start("fit", cli.seed, cli.jobs, &a.out)?;
    let mut details = json!({ "datasets": items.len(), "n": d.n(), "p": d.p() });
    let mut unconverged = None;
    match a.method {
        FitMethod::Chowliu => {
            let t = fit_chow_liu(&d, a.root)?;
            run.write_text("model.json", &format!("{}\n", t.to_json()?))?;
            details["structure"] = structure_json(&t.structure());
        }
        FitMethod::Iso => {
            let cfg = SolverConfig { tol: a.tol, max_iter: a.max_iter };
            let mode = match a.lambda_mode {
                ModeArg::Structure => LambdaMode::Structure,
                ModeArg::Parameter => LambdaMode::Parameter,
            };
            let lambda = match a.lambda {
                Some(l) => l,
                None => lambda_default(d.p(), d.n(), a.eps.unwrap_or(0.05), mode)?,
            };
            let est = recover_structure(&d, lambda, a.threshold, &cfg)?;
            let (model, refit_ok) = if a.refit {
                let r = refit_unregularized(&d, &est.structure, &cfg)?;
                (r.model, Some(r.converged))
            } else {
                (est.model()?, None)
            };
            run.write_text("model.json", &format!("{}\n", model.to_json()?))?;
            let nodes: Vec<Value> = est
                .solutions
                .iter()
                .map(|s| json!({ "node": s.node, "iterations": s.iterations, "converged": s.converged, "objective": s.objective() }))
                .collect();
            run.write_json(
                "estimate.json",
                &json!({
                    "lambda": lambda,
                    "threshold": a.threshold,
                    "reliable": est.reliable,
                    "refit_converged": refit_ok,
                    "structure": structure_json(&est.structure),
                    "pairs": est.pairs,
                    "nodes": nodes,
                }),
            )?;
            details["structure"] = structure_json(&est.structure);
            details["lambda"] = json!(lambda);
            if !est.reliable || refit_ok == Some(false) {
                unconverged = Some(format!("solver reached --max-iter {} before converging", a.max_iter));
            }
        }
    }
    run.finish(a, details)?;
    match unconverged {
        Some(msg) => Err(CliError::Convergence(msg)),
        None => Ok(()),
    }
}

fn sample(cli: &Cli, a: &SampleArgs) -> Result<(), CliError> {
    let m = load_model(&a.model)?.graph()?;
    let d = gibbs_sample(&m, a.n, &GibbsConfig { burn_in: a.burn_in, thin: a.thin, seed: cli.seed })?;
    let mut run = Run::start("sample", cli.seed, cli.jobs, &a.out)?;
    run.write_text("data.csv", &dataset_csv(&d)?)?;
    run.finish(a, json!({ "n": d.n(), "p": d.p() }))
}

#[derive(Serialize, serde::Deserialize)]
struct Scored {
    name: String,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_likelihoods: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    llr: Option<f64>,
}

fn classify(cli: &Cli, a: &ClassifyArgs) -> Result<(), CliError> {
    if a.models.len() < 2 {
        return Err(CliError::usage("classification needs at least two --model files".into()));
    }
    let models: Vec<LoadedModel> = a.models.iter().map(|p| load_model(p)).collect::<Result<_, _>>()?;
    let trees: Option<Vec<_>> =
        models.iter().map(|m| if let LoadedModel::Tree(t) = m { Some(t.clone()) } else { None }).collect();
    if trees.is_none() && models.len() > 2 {
        return Err(CliError::data("more than two classes need tree models (normalised likelihoods)".into()));
    }
    let graphs: Option<[GraphModel; 2]> = match (&trees, models.len()) {
        (None, 2) => Some([models[0].graph()?, models[1].graph()?]),
        _ => None,
    };
    let items = collect_items(&a.data)?;
    let scored: Vec<Scored> = items
        .par_iter()
        .map(|item| {
            let d = load_dataset(item)?;
            let mut s = Scored { name: item.name.clone(), n: d.n(), label: item.label, log_likelihoods: None, prediction: None, llr: None };
            if let Some(trees) = &trees {
                let ll = mary_log_likelihoods(&d, trees)?;
                s.prediction = Some(phasefield::hypothesis::mary_classify(&d, trees)?);
                if trees.len() == 2 {
                    s.llr = Some(tree_llr_score(&d, &trees[1], &trees[0])?);
                }
                s.log_likelihoods = Some(ll);
            } else if let Some([m0, m1]) = &graphs {
                s.llr = Some(llr_score(&d, m1, m0)?);
            }
            Ok(s)
        })
        .collect::<Result<_, CliError>>()?;

    let mut run = Run::start("classify", cli.seed, cli.jobs, &a.out)?;
    let models_json: Vec<String> = a.models.iter().map(|p| p.display().to_string()).collect();
    run.write_json("scores.json", &json!({ "n_models": models.len(), "models": models_json, "datasets": scored }))?;
    if a.csv {
        let mut text = String::from("name,n,label,prediction,llr\n");
        for s in &scored {
            let opt = |v: Option<String>| v.unwrap_or_default();
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                s.name,
                s.n,
                opt(s.label.map(|v| v.to_string())),
                opt(s.prediction.map(|v| v.to_string())),
                opt(s.llr.map(|v| v.to_string()))
            ));
        }
        run.write_text("scores.csv", &text)?;
    }
    run.finish(a, json!({ "datasets": scored.len(), "trees": trees.is_some() }))
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<(), CliError> {
    let scores = read_json(&a.scores)?;
    let n_models = scores["n_models"].as_u64().ok_or_else(|| CliError::data("scores file lacks n_models".into()))? as usize;
    let scored: Vec<Scored> = serde_json::from_value(scores["datasets"].clone())?;
    let labels: Vec<usize> = match &a.labels {
        Some(p) => read_labels(p)?,
        None => scored
            .iter()
            .map(|s| s.label)
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::usage("no labels recorded in the scores; pass --labels".into()))?,
    };
    if labels.len() != scored.len() {
        return Err(CliError::data(format!("{} labels for {} scored datasets", labels.len(), scored.len())));
    }

    let mut run = Run::start("evaluate", cli.seed, cli.jobs, &a.out)?;
    let mut metrics = json!({ "n": scored.len() });
    let preds: Option<Vec<usize>> = scored.iter().map(|s| s.prediction).collect();
    if let Some(preds) = preds {
        let cm = confusion(&preds, &labels, n_models).map_err(|e| CliError::data(e.to_string()))?;
        if a.csv {
            let text: String = cm.counts.iter().map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",") + "\n").collect();
            run.write_text("confusion.csv", &text)?;
        }
        metrics["accuracy"] = json!(cm.accuracy());
        metrics["adjacency"] = json!(cm.adjacency());
        metrics["confusion"] = json!(cm);
    }
    let llr: Option<Vec<f64>> = scored.iter().map(|s| s.llr).collect();
    if let Some(llr) = llr {
        if labels.iter().any(|&l| l > 1) {
            return Err(CliError::data("ROC analysis needs labels 0 and 1".into()));
        }
        let s1: Vec<f64> = llr.iter().zip(&labels).filter(|(_, &l)| l == 1).map(|(s, _)| *s).collect();
        let s0: Vec<f64> = llr.iter().zip(&labels).filter(|(_, &l)| l == 0).map(|(s, _)| *s).collect();
        let curve = roc(&s1, &s0).map_err(|e| CliError::data(e.to_string()))?;
        if a.csv {
            let mut text = String::from("fpr,tpr,threshold\n");
            for (k, (fpr, tpr)) in curve.points.iter().enumerate() {
                let th = if k == 0 { String::new() } else { curve.thresholds[k - 1].to_string() };
                text.push_str(&format!("{fpr},{tpr},{th}\n"));
            }
            run.write_text("roc.csv", &text)?;
        }
        metrics["auc"] = json!(curve.auc);
        metrics["roc"] = json!(curve);
    }
    run.write_json("metrics.json", &metrics)?;
    run.finish(a, json!({ "n": scored.len() }))
}

fn repro(cli: &Cli, a: &ReproArgs) -> Result<(), CliError> {
    let mut run = Run::start("repro", cli.seed, cli.jobs, &a.out)?;
    let mut table = String::new();
    match a.figure {
        Figure::Fig2a | Figure::Fig2b => {
            let mut cfg = match (a.figure, a.full) {
                (Figure::Fig2a, false) => RecoveryConfig::fig2a_desk(),
                (Figure::Fig2a, true) => RecoveryConfig::fig2a_full(),
                (_, false) => RecoveryConfig::fig2b_desk(),
                (_, true) => RecoveryConfig::fig2b_full(),
            };
            cfg.seed = cli.seed;
            cfg.trials = a.trials.unwrap_or(cfg.trials);
            let r = run_recovery(&cfg)?;
            table.push_str("p,n,method,recovered,trials,fraction,unconverged,seconds\n");
            for c in &r.cells {
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{:.3}\n",
                    c.p,
                    c.n,
                    c.method.name(),
                    c.recovered,
                    c.trials,
                    c.fraction,
                    c.unconverged,
                    c.seconds
                ));
            }
            run.write_json("report.json", &r)?;
        }
        Figure::Fig3a => {
            let mut cfg = if a.full { MaryConfig::fig3a_full() } else { MaryConfig::fig3a_desk() };
            cfg.seed = cli.seed;
            cfg.per_class = a.per_class.unwrap_or(cfg.per_class);
            let r = run_mary(&cfg)?;
            table.push_str("true,predicted\n");
            for (t, p) in r.labels.iter().zip(&r.predictions) {
                table.push_str(&format!("{t},{p}\n"));
            }
            run.write_json("report.json", &r)?;
        }
        Figure::Fig3b => {
            let mut cfg = if a.full { BinaryConfig::fig3b_full() } else { BinaryConfig::fig3b_desk() };
            cfg.seed = cli.seed;
            cfg.per_class = a.per_class.unwrap_or(cfg.per_class);
            let r = run_binary(&cfg)?;
            table.push_str("grid_side,method,auc,edges_class0,edges_class1,converged,seconds\n");
            for row in &r.rows {
                table.push_str(&format!(
                    "{},{},{},{},{},{},{:.3}\n",
                    row.grid_side,
                    row.method.name(),
                    row.auc,
                    row.edges[0],
                    row.edges[1],
                    row.converged,
                    row.seconds
                ));
            }
            run.write_json("report.json", &r)?;
        }
    }
    run.write_text("table.csv", &table)?;
    run.finish(a, json!({ "figure": a.figure, "full": a.full }))
}
