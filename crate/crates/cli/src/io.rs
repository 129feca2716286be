//! File plumbing shared by the subcommands: manifests, dataset discovery,
//! label files and model loading.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use phasefield::{GraphModel, PhaseDataset, TreeModel};
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const LABELS: &str = "labels.csv";

#[derive(Serialize)]
struct Timing {
    started_unix: f64,
    seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    jobs: Option<usize>,
    config: &'a C,
    outputs: &'a [String],
    details: &'a Value,
    timing: Timing,
}

/// Collects the facts every manifest carries and writes it last.
pub struct Run<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
    started: SystemTime,
    clock: Instant,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    pub fn start(command: &'a str, seed: u64, jobs: Option<usize>, out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self {
            command,
            seed,
            jobs,
            out: out.to_path_buf(),
            started: SystemTime::now(),
            clock: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    pub fn record(&mut self, rel: impl Into<String>) {
        self.outputs.push(rel.into());
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, text)?;
        self.record(rel);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    pub fn finish<C: Serialize>(self, config: &C, details: Value) -> Result<(), CliError> {
        let started_unix = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let manifest = Manifest {
            tool: "phasefield",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            seed: self.seed,
            jobs: self.jobs,
            config,
            outputs: &self.outputs,
            details: &details,
            timing: Timing { started_unix, seconds: self.clock.elapsed().as_secs_f64() },
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.out.join(MANIFEST), text)?;
        Ok(())
    }
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// A dataset file with its display name and, when known, its class label.
pub struct Item {
    pub name: String,
    pub path: PathBuf,
    pub label: Option<usize>,
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().is_some_and(|n| n != LABELS))
        .collect();
    files.sort();
    Ok(files)
}

/// Expand data arguments: a file stands for itself; a directory stands for
/// the CSV files under `phases/` (or `panels/`, or the directory itself),
/// paired with `labels.csv` when present.
pub fn collect_items(paths: &[PathBuf]) -> Result<Vec<Item>, CliError> {
    let mut items = Vec::new();
    for path in paths {
        if path.is_dir() {
            let sub = ["phases", "panels"].iter().map(|s| path.join(s)).find(|p| p.is_dir());
            let files = csv_files(sub.as_deref().unwrap_or(path))?;
            let labels = match path.join(LABELS) {
                l if l.is_file() => Some(read_labels(&l)?),
                _ => None,
            };
            if let Some(labels) = &labels {
                if labels.len() != files.len() {
                    return Err(CliError::data(format!(
                        "{}: {} labels for {} data files",
                        path.display(),
                        labels.len(),
                        files.len()
                    )));
                }
            }
            for (k, f) in files.into_iter().enumerate() {
                let name = f.strip_prefix(path).unwrap_or(&f).display().to_string();
                items.push(Item { name, path: f, label: labels.as_ref().map(|l| l[k]) });
            }
        } else if path.is_file() {
            items.push(Item { name: path.display().to_string(), path: path.clone(), label: None });
        } else {
            return Err(CliError::data(format!("{} does not exist", path.display())));
        }
    }
    if items.is_empty() {
        return Err(CliError::data("no data files found".into()));
    }
    Ok(items)
}

pub fn load_dataset(item: &Item) -> Result<PhaseDataset, CliError> {
    PhaseDataset::load(&item.path).map_err(|e| CliError::data(format!("{}: {e}", item.path.display())))
}

/// Labels as non-negative integers separated by newlines, commas or
/// whitespace; a non-numeric first token is treated as a header.
pub fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let path = if path.is_dir() { path.join(LABELS) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (k, tok) in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).enumerate() {
        match tok.parse::<usize>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => {}
            Err(_) => return Err(CliError::data(format!("{}: bad label {tok:?}", path.display()))),
        }
    }
    Ok(out)
}

pub fn labels_csv(labels: &[usize]) -> String {
    let mut s = String::from("label\n");
    for l in labels {
        s.push_str(&format!("{l}\n"));
    }
    s
}

pub enum LoadedModel {
    Tree(TreeModel),
    Graph(GraphModel),
}

impl LoadedModel {
    pub fn graph(&self) -> Result<GraphModel, CliError> {
        match self {
            LoadedModel::Tree(t) => Ok(t.to_graph_model()?),
            LoadedModel::Graph(g) => Ok(g.clone()),
        }
    }
}

/// Tree models are recognised by their `root` field.
pub fn load_model(path: &Path) -> Result<LoadedModel, CliError> {
    let value = read_json(path)?;
    let wrap = |e: serde_json::Error| CliError::data(format!("{}: {e}", path.display()));
    if value.get("root").is_some() {
        Ok(LoadedModel::Tree(serde_json::from_value(value).map_err(wrap)?))
    } else {
        Ok(LoadedModel::Graph(serde_json::from_value(value).map_err(wrap)?))
    }
}
