//! Graph recovery from per-node solutions and the unpenalised refit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{minimize, NodeSolution, SolverConfig};
use super::{Features, NodeProblem};
use crate::dataset::PhaseDataset;
use crate::error::{Error, Result};
use crate::model::{GraphModel, GraphStructure, NaturalEdgeParams};

/// Coupling strength of one pair as seen from each endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub i: usize,
    pub j: usize,
    pub kappa_from_i: f64,
    pub kappa_from_j: f64,
}

impl EdgeEstimate {
    pub fn kappa_max(&self) -> f64 {
        self.kappa_from_i.max(self.kappa_from_j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureEstimate {
    pub structure: GraphStructure,
    /// every pair `i < j`, lexicographic
    pub pairs: Vec<EdgeEstimate>,
    pub lambda: f64,
    pub threshold: f64,
    /// false when some node problem hit `max_iter`
    pub reliable: bool,
    pub solutions: Vec<NodeSolution>,
}

fn check_dataset(d: &PhaseDataset) -> Result<()> {
    if d.n() == 0 {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    Ok(())
}

/// Solve all `p` penalised node problems and declare edge `(i, j)` when the
/// larger of its two endpoint estimates `κ̂` reaches `threshold`.
pub fn recover_structure(d: &PhaseDataset, lambda: f64, threshold: f64, cfg: &SolverConfig) -> Result<StructureEstimate> {
    check_dataset(d)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    let p = d.p();
    let solutions: Vec<NodeSolution> = (0..p)
        .into_par_iter()
        .map(|u| {
            let np = NodeProblem::new(u, p)?;
            Ok(minimize(&Features::new(&np, d), &np, lambda, cfg))
        })
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let e = EdgeEstimate { i, j, kappa_from_i: solutions[i].kappa(j), kappa_from_j: solutions[j].kappa(i) };
            if e.kappa_max() >= threshold {
                edges.push((i, j));
            }
            pairs.push(e);
        }
    }
    Ok(StructureEstimate {
        structure: GraphStructure::new(p, edges)?,
        pairs,
        lambda,
        threshold,
        reliable: solutions.iter().all(|s| s.converged),
        solutions,
    })
}

fn endpoint_average(solutions: &[NodeSolution], g: &GraphStructure) -> Result<GraphModel> {
    let by_node = |u: usize| solutions.iter().find(|s| s.node == u).expect("every endpoint was solved");
    let natural: Vec<NaturalEdgeParams> = g
        .edges()
        .iter()
        .map(|&(i, j)| {
            let a = by_node(i).edge(j).expect("neighbour present");
            let b = by_node(j).edge(i).expect("neighbour present");
            NaturalEdgeParams { theta_c: 0.5 * (a.theta_c + b.theta_c), theta_s: 0.5 * (a.theta_s + b.theta_s) }
        })
        .collect();
    GraphModel::from_natural(g.clone(), &natural)
}

impl StructureEstimate {
    /// Model on the declared edges with the penalised endpoint estimates
    /// averaged; shrunk toward zero, so usually followed by a refit.
    pub fn model(&self) -> Result<GraphModel> {
        endpoint_average(&self.solutions, &self.structure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refit {
    pub model: GraphModel,
    pub converged: bool,
    pub solutions: Vec<NodeSolution>,
}

/// Unpenalised screening restricted to the edges of `g`.
///
/// Each edge's final parameters are the mean of the two endpoint
/// estimates in natural coordinates.
pub fn refit_unregularized(d: &PhaseDataset, g: &GraphStructure, cfg: &SolverConfig) -> Result<Refit> {
    check_dataset(d)?;
    if d.p() != g.p() {
        return Err(Error::Dimension { expected: g.p(), got: d.p() });
    }
    let p = g.p();
    let solutions: Vec<NodeSolution> = (0..p)
        .into_par_iter()
        .filter(|&u| !g.neighbors(u).is_empty())
        .map(|u| {
            let np = NodeProblem::with_neighbors(u, p, g.neighbors(u))?;
            Ok(minimize(&Features::new(&np, d), &np, 0.0, cfg))
        })
        .collect::<Result<_>>()?;
    Ok(Refit { model: endpoint_average(&solutions, g)?, converged: solutions.iter().all(|s| s.converged), solutions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iso::{lambda_default, LambdaMode};
    use crate::model::EdgeCoupling;
    use crate::sampler::{gibbs_sample, GibbsConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn recovers_tree_with_enough_samples() {
        let mut hits = 0;
        let trials = 4;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let g = GraphStructure::random_tree(8, &mut rng);
            let m = GraphModel::uniform(g.clone(), 1.0, 0.0).unwrap();
            let d = gibbs_sample(&m, 16_000, &GibbsConfig::with_seed(seed)).unwrap();
            let lambda = lambda_default(8, 16_000, 0.05, LambdaMode::Structure).unwrap();
            let est = recover_structure(&d, lambda, 0.5, &SolverConfig::default()).unwrap();
            assert!(est.reliable);
            assert_eq!(est.pairs.len(), 28);
            hits += usize::from(est.structure == g);
            let shrunk = est.model().unwrap();
            assert_eq!(shrunk.structure(), &est.structure);
            assert!(shrunk.couplings().iter().all(|c| c.kappa < 1.0));
        }
        assert!(hits >= 3, "{hits}/{trials}");
    }

    #[test]
    fn independent_data_gives_empty_graph() {
        let mut empty = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = PhaseDataset::from_rows_wrapped(6, (0..4000 * 6).map(|_| rng.random::<f64>() * TAU - PI).collect())
                .unwrap();
            let lambda = lambda_default(6, 4000, 0.05, LambdaMode::Structure).unwrap();
            let est = recover_structure(&d, lambda, 0.5, &SolverConfig::default()).unwrap();
            empty += usize::from(est.structure.edges().is_empty());
        }
        assert!(empty >= 10);
    }

    #[test]
    fn refit_on_true_cycle() {
        let g = GraphStructure::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let truth = vec![
            EdgeCoupling::new(1.0, 0.5).unwrap(),
            EdgeCoupling::new(0.8, -0.4).unwrap(),
            EdgeCoupling::new(1.2, 1.0).unwrap(),
            EdgeCoupling::new(1.0, 0.0).unwrap(),
        ];
        let m = GraphModel::new(g.clone(), truth.clone()).unwrap();
        let d = gibbs_sample(&m, 10_000, &GibbsConfig::with_seed(7)).unwrap();
        let r = refit_unregularized(&d, &g, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.model.structure(), &g);
        for (got, want) in r.model.couplings().iter().zip(&truth) {
            assert!((got.kappa - want.kappa).abs() < 0.15, "{got:?} vs {want:?}");
            assert!((got.mu.value() - want.mu.value()).abs() < 0.1, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn refit_empty_structure() {
        let d = PhaseDataset::from_rows_wrapped(3, vec![0.0, 1.0, 2.0]).unwrap();
        let r = refit_unregularized(&d, &GraphStructure::empty(3), &SolverConfig::default()).unwrap();
        assert!(r.model.structure().edges().is_empty());
        assert!(r.solutions.is_empty());
        assert!(r.converged);
    }

    #[test]
    fn symmetric_data_gives_equal_endpoint_estimates() {
        // swapping columns 0 and 1 maps the data set to itself
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut values = Vec::new();
        for _ in 0..500 {
            let a = rng.random::<f64>() * TAU - PI;
            let b = a + 0.8 * (rng.random::<f64>() - 0.5);
            values.extend([a, b, b, a]);
        }
        let d = PhaseDataset::from_rows_wrapped(2, values).unwrap();
        let g = GraphStructure::new(2, [(0, 1)]).unwrap();
        let r = refit_unregularized(&d, &g, &SolverConfig::default()).unwrap();
        let from0 = r.solutions[0].edge(1).unwrap();
        let from1 = r.solutions[1].edge(0).unwrap();
        let avg = r.model.natural()[0];
        assert!((from0.theta_c - from1.theta_c).abs() < 1e-7);
        assert!((avg.theta_c - from0.theta_c).abs() < 1e-7);
        assert!(avg.theta_s.abs() < 1e-7);
    }
}
