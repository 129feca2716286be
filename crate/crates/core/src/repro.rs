//! Experiment drivers: structure recovery on trees and toroidal grids,
//! M-ary plane-wave direction classification, and binary
//! unidirectional-vs-diverging wave detection.
//!
//! Every driver is deterministic in its seed; only the `seconds` fields
//! vary between runs.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chow_liu::{fit_chow_liu, TreeModel};
use crate::dataset::PhaseDataset;
use crate::error::{Error, Result};
use crate::hypothesis::{confusion, llr_score, mary_classify_all, roc, tree_llr_score, AdjacencyReport, ConfusionMatrix, RocCurve};
use crate::iso::{lambda_default, recover_structure, refit_unregularized, LambdaMode, SolverConfig};
use crate::model::{GraphModel, GraphStructure};
use crate::sampler::{gibbs_sample, GibbsConfig, DEFAULT_BURN_IN};
use crate::signal::{instantaneous_phase, Band, PhaseOptions};
use crate::wave::{gen_corpus, stratified_split, CorpusSpec, EllipticalWaveSpec, PlaneWaveSpec, SensorGrid};

/// SplitMix64 finaliser, used to derive independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived from a base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &k| mix(acc ^ mix(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    ChowLiu,
    Iso,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ChowLiu => "chowliu",
            Method::Iso => "iso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    /// uniformly random labelled trees on `size` nodes
    Tree,
    /// four-connected `size × size` torus
    Torus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub family: GraphFamily,
    /// node counts for trees, side lengths for tori
    pub sizes: Vec<usize>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub kappa: f64,
    pub mu: f64,
    pub burn_in: usize,
    pub eps: f64,
    pub threshold: f64,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl RecoveryConfig {
    fn base(family: GraphFamily, sizes: Vec<usize>, ns: Vec<usize>, trials: usize, methods: Vec<Method>) -> Self {
        Self {
            family,
            sizes,
            ns,
            trials,
            kappa: 1.0,
            mu: 0.0,
            burn_in: DEFAULT_BURN_IN,
            eps: 0.05,
            threshold: 0.5,
            methods,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }

    pub fn fig2a_desk() -> Self {
        Self::base(GraphFamily::Tree, vec![4, 8], vec![250, 1000, 4000], 20, vec![Method::ChowLiu, Method::Iso])
    }

    pub fn fig2a_full() -> Self {
        Self::base(GraphFamily::Tree, vec![4, 8, 16], vec![250, 1000, 4000, 16000], 100, vec![Method::ChowLiu, Method::Iso])
    }

    pub fn fig2b_desk() -> Self {
        Self::base(GraphFamily::Torus, vec![3], vec![500, 2000, 8000], 15, vec![Method::Iso])
    }

    pub fn fig2b_full() -> Self {
        Self::base(GraphFamily::Torus, vec![2, 3, 4], vec![500, 2000, 8000, 32000], 45, vec![Method::Iso])
    }

    fn graph(&self, size: usize, trial: usize) -> Result<GraphStructure> {
        match self.family {
            GraphFamily::Tree => {
                if size < 2 {
                    return Err(Error::InvalidParameter(format!("trees need at least 2 nodes, got {size}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[1, size as u64, trial as u64]));
                Ok(GraphStructure::random_tree(size, &mut rng))
            }
            GraphFamily::Torus => {
                if size < 2 {
                    return Err(Error::InvalidParameter(format!("torus side must be at least 2, got {size}")));
                }
                Ok(GraphStructure::torus(size, size))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCell {
    pub p: usize,
    pub n: usize,
    pub method: Method,
    pub trials: usize,
    pub recovered: usize,
    pub fraction: f64,
    /// trials where some node problem did not converge
    pub unconverged: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub config: RecoveryConfig,
    pub cells: Vec<RecoveryCell>,
}

impl RecoveryReport {
    pub fn cell(&self, p: usize, n: usize, method: Method) -> Option<&RecoveryCell> {
        self.cells.iter().find(|c| c.p == p && c.n == n && c.method == method)
    }

    pub fn strip_timing(&mut self) {
        self.cells.iter_mut().for_each(|c| c.seconds = 0.0);
    }
}

struct TrialOutcome {
    hits: Vec<bool>,
    unconverged: Vec<bool>,
    seconds: Vec<f64>,
}

/// Fraction of trials in which each method recovers the generating graph
/// exactly. Graphs depend on `(size, trial)` only, so the same trees are
/// reused across sample sizes.
pub fn run_recovery(cfg: &RecoveryConfig) -> Result<RecoveryReport> {
    if cfg.trials == 0 || cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("need at least one trial and one method".into()));
    }
    let mut cells = Vec::new();
    for &size in &cfg.sizes {
        for &n in &cfg.ns {
            let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let g = cfg.graph(size, trial)?;
                    let m = GraphModel::uniform(g.clone(), cfg.kappa, cfg.mu)?;
                    let gibbs = GibbsConfig {
                        burn_in: cfg.burn_in,
                        thin: 1,
                        seed: derive_seed(cfg.seed, &[2, size as u64, n as u64, trial as u64]),
                    };
                    let d = gibbs_sample(&m, n, &gibbs)?;
                    let mut out = TrialOutcome { hits: vec![], unconverged: vec![], seconds: vec![] };
                    for &method in &cfg.methods {
                        let start = Instant::now();
                        let (found, ok) = match method {
                            Method::ChowLiu => (fit_chow_liu(&d, 0)?.structure(), true),
                            Method::Iso => {
                                let lambda = lambda_default(g.p(), n, cfg.eps, LambdaMode::Structure)?;
                                let est = recover_structure(&d, lambda, cfg.threshold, &cfg.solver)?;
                                (est.structure, est.reliable)
                            }
                        };
                        out.seconds.push(start.elapsed().as_secs_f64());
                        out.hits.push(found == g);
                        out.unconverged.push(!ok);
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let p = cfg.graph(size, 0)?.p();
            for (k, &method) in cfg.methods.iter().enumerate() {
                let recovered = outcomes.iter().filter(|o| o.hits[k]).count();
                cells.push(RecoveryCell {
                    p,
                    n,
                    method,
                    trials: cfg.trials,
                    recovered,
                    fraction: recovered as f64 / cfg.trials as f64,
                    unconverged: outcomes.iter().filter(|o| o.unconverged[k]).count(),
                    seconds: outcomes.iter().map(|o| o.seconds[k]).sum(),
                });
            }
        }
    }
    Ok(RecoveryReport { config: cfg.clone(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaryConfig {
    pub grid_side: usize,
    /// distance between adjacent sensors
    pub spacing: f64,
    pub per_class: usize,
    pub train_fraction: f64,
    pub wave: PlaneWaveSpec,
    /// optional bandpass before the analytic signal
    pub band: Option<Band>,
    pub keep_edges: bool,
    pub seed: u64,
}

impl MaryConfig {
    pub fn fig3a_desk() -> Self {
        Self {
            grid_side: 4,
            spacing: 1.0,
            per_class: 30,
            train_fraction: 0.8,
            wave: PlaneWaveSpec::default(),
            // narrow band around the 2.5 Hz carrier
            band: Some(Band { low: 2.0, high: 3.0, order: 4 }),
            keep_edges: false,
            seed: 0,
        }
    }

    pub fn fig3a_full() -> Self {
        Self { grid_side: 8, per_class: 100, ..Self::fig3a_desk() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaryReport {
    pub config: MaryConfig,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub adjacency: AdjacencyReport,
    pub n_train: usize,
    pub n_test: usize,
    /// corpus indices of the test panels
    pub test_indices: Vec<usize>,
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
    pub seconds: f64,
}

impl MaryReport {
    pub fn strip_timing(&mut self) {
        self.seconds = 0.0;
    }
}

fn phases_of(set: &crate::wave::LabeledPanelSet, opts: &PhaseOptions) -> Result<Vec<PhaseDataset>> {
    set.panels.par_iter().map(|p| instantaneous_phase(&p.wave.panel, opts)).collect()
}

fn pooled(ds: &[PhaseDataset], idx: &[usize], stride: usize) -> Result<PhaseDataset> {
    let parts: Vec<PhaseDataset> = idx.iter().map(|&k| ds[k].decimate(stride)).collect();
    PhaseDataset::concat(&parts)
}

/// Direction classification of plane waves with one Chow-Liu tree per
/// direction and a maximum-likelihood decision.
pub fn run_mary(cfg: &MaryConfig) -> Result<MaryReport> {
    let start = Instant::now();
    let grid = SensorGrid::with_spacing(cfg.grid_side, cfg.grid_side, cfg.spacing)?;
    let corpus = gen_corpus(cfg.per_class, &CorpusSpec::Plane { spec: cfg.wave }, &grid, cfg.seed)?;
    let labels = corpus.labels();
    let (train, test) = stratified_split(&labels, cfg.train_fraction, derive_seed(cfg.seed, &[3]))?;
    let phases = phases_of(&corpus, &PhaseOptions { band: cfg.band, keep_edges: cfg.keep_edges })?;
    let m = corpus.n_classes;
    let models: Vec<TreeModel> = (0..m)
        .into_par_iter()
        .map(|c| {
            let idx: Vec<usize> = train.iter().copied().filter(|&k| labels[k] == c).collect();
            fit_chow_liu(&pooled(&phases, &idx, 1)?, 0)
        })
        .collect::<Result<_>>()?;
    let test_sets: Vec<PhaseDataset> = test.iter().map(|&k| phases[k].clone()).collect();
    let predictions = mary_classify_all(&test_sets, &models)?;
    let test_labels: Vec<usize> = test.iter().map(|&k| labels[k]).collect();
    let cm = confusion(&predictions, &test_labels, m)?;
    Ok(MaryReport {
        config: cfg.clone(),
        accuracy: cm.accuracy(),
        adjacency: cm.adjacency(),
        confusion: cm,
        n_train: train.len(),
        n_test: test.len(),
        test_indices: test.clone(),
        predictions,
        labels: test_labels,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryConfig {
    /// sensors per side on the unit square
    pub grid_sides: Vec<usize>,
    /// the screening fitter is skipped above this side length
    pub iso_max_side: usize,
    pub per_class: usize,
    pub train_fraction: f64,
    pub wave: EllipticalWaveSpec,
    pub band: Band,
    /// keep every `train_stride`-th time point of each training panel
    pub train_stride: usize,
    pub eps: f64,
    pub threshold: f64,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    /// Budget for the unpenalised refit. On clean wave data the refit can
    /// be unbounded below (every phase difference inside a half circle),
    /// so it is capped and reported through `converged`.
    pub refit_solver: SolverConfig,
    pub seed: u64,
}

impl BinaryConfig {
    pub fn fig3b_desk() -> Self {
        Self {
            grid_sides: vec![3, 5],
            iso_max_side: 7,
            per_class: 100,
            train_fraction: 0.8,
            wave: EllipticalWaveSpec::default(),
            band: Band { low: 0.03, high: 0.07, order: 8 },
            train_stride: 16,
            eps: 0.05,
            threshold: 0.5,
            methods: vec![Method::ChowLiu, Method::Iso],
            solver: SolverConfig::default(),
            refit_solver: SolverConfig { max_iter: 1000, ..SolverConfig::default() },
            seed: 0,
        }
    }

    pub fn fig3b_full() -> Self {
        Self { grid_sides: (3..=10).collect(), per_class: 500, ..Self::fig3b_desk() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryRow {
    pub grid_side: usize,
    pub method: Method,
    pub auc: f64,
    pub roc: RocCurve,
    pub train_rows_per_class: usize,
    /// edges in the class-0 and class-1 models
    pub edges: [usize; 2],
    pub converged: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub config: BinaryConfig,
    pub rows: Vec<BinaryRow>,
}

impl BinaryReport {
    pub fn row(&self, side: usize, method: Method) -> Option<&BinaryRow> {
        self.rows.iter().find(|r| r.grid_side == side && r.method == method)
    }

    pub fn strip_timing(&mut self) {
        self.rows.iter_mut().for_each(|r| r.seconds = 0.0);
    }
}

/// Class 1 (diverging, centre on the grid) against class 0 (centre off
/// the grid), scored per test panel by a mean log-likelihood ratio.
pub fn run_binary(cfg: &BinaryConfig) -> Result<BinaryReport> {
    let mut rows = Vec::new();
    for &side in &cfg.grid_sides {
        let grid = SensorGrid::unit_square(side, side)?;
        let corpus = gen_corpus(cfg.per_class, &CorpusSpec::Elliptical { spec: cfg.wave }, &grid, cfg.seed)?;
        let labels = corpus.labels();
        let (train, test) = stratified_split(&labels, cfg.train_fraction, derive_seed(cfg.seed, &[4]))?;
        let phases = phases_of(&corpus, &PhaseOptions { band: Some(cfg.band), keep_edges: false })?;
        let class_train: Vec<PhaseDataset> = (0..2)
            .map(|c| {
                let idx: Vec<usize> = train.iter().copied().filter(|&k| labels[k] == c).collect();
                pooled(&phases, &idx, cfg.train_stride)
            })
            .collect::<Result<_>>()?;
        let test_of = |c: usize| -> Vec<&PhaseDataset> {
            test.iter().filter(|&&k| labels[k] == c).map(|&k| &phases[k]).collect()
        };

        for &method in &cfg.methods {
            if method == Method::Iso && side > cfg.iso_max_side {
                continue;
            }
            let start = Instant::now();
            let (scores1, scores0, edges, converged) = match method {
                Method::ChowLiu => {
                    let t0 = fit_chow_liu(&class_train[0], 0)?;
                    let t1 = fit_chow_liu(&class_train[1], 0)?;
                    let score = |d: &PhaseDataset| tree_llr_score(d, &t1, &t0);
                    let s1 = test_of(1).into_par_iter().map(score).collect::<Result<Vec<_>>>()?;
                    let s0 = test_of(0).into_par_iter().map(score).collect::<Result<Vec<_>>>()?;
                    (s1, s0, [t0.edges().len(), t1.edges().len()], true)
                }
                Method::Iso => {
                    let fit = |d: &PhaseDataset| -> Result<(GraphModel, bool)> {
                        let lambda = lambda_default(d.p(), d.n(), cfg.eps, LambdaMode::Structure)?;
                        let est = recover_structure(d, lambda, cfg.threshold, &cfg.solver)?;
                        let refit = refit_unregularized(d, &est.structure, &cfg.refit_solver)?;
                        Ok((refit.model, est.reliable && refit.converged))
                    };
                    let (m0, ok0) = fit(&class_train[0])?;
                    let (m1, ok1) = fit(&class_train[1])?;
                    let score = |d: &PhaseDataset| llr_score(d, &m1, &m0);
                    let s1 = test_of(1).into_par_iter().map(score).collect::<Result<Vec<_>>>()?;
                    let s0 = test_of(0).into_par_iter().map(score).collect::<Result<Vec<_>>>()?;
                    (s1, s0, [m0.structure().edges().len(), m1.structure().edges().len()], ok0 && ok1)
                }
            };
            let curve = roc(&scores1, &scores0)?;
            rows.push(BinaryRow {
                grid_side: side,
                method,
                auc: curve.auc,
                roc: curve,
                train_rows_per_class: class_train[0].n().min(class_train[1].n()),
                edges,
                converged,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(BinaryReport { config: cfg.clone(), rows })
}
