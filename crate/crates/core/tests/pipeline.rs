use phasefield::hypothesis::{mann_whitney_auc, tree_llr_score};
use phasefield::iso::{refit_unregularized, SolverConfig};
use phasefield::model::GraphModel;
use phasefield::sampler::{gibbs_sample, GibbsConfig};
use phasefield::{fit_chow_liu, GraphStructure, PhaseDataset, TreeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn chain(p: usize) -> GraphStructure {
    GraphStructure::new(p, (0..p - 1).map(|i| (i, i + 1))).unwrap()
}

fn gibbs(m: &GraphModel, n: usize, seed: u64) -> PhaseDataset {
    gibbs_sample(m, n, &GibbsConfig { burn_in: 2_000, thin: 2, seed }).unwrap()
}

#[test]
fn models_and_data_survive_disk() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = GraphStructure::random_tree(6, &mut rng);
    let m = GraphModel::uniform(g, 1.2, 0.4).unwrap();
    let d = gibbs(&m, 400, 1);

    let path = dir.path().join("d.csv");
    d.save(&path).unwrap();
    let back = PhaseDataset::load(&path).unwrap();
    assert_eq!(back.values(), d.values());

    let t = fit_chow_liu(&d, 0).unwrap();
    let mp = dir.path().join("t.json");
    std::fs::write(&mp, t.to_json().unwrap()).unwrap();
    let t2 = TreeModel::from_json(&std::fs::read_to_string(&mp).unwrap()).unwrap();
    assert_eq!(t2, t);

    let gm = GraphModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(gm, m);
}

#[test]
fn fitted_trees_separate_two_generating_models() {
    let g = chain(6);
    let m0 = GraphModel::uniform(g.clone(), 1.0, 0.0).unwrap();
    let m1 = GraphModel::uniform(g, 1.0, 0.6).unwrap();
    let (t0, t1) = (fit_chow_liu(&gibbs(&m0, 4000, 1), 0).unwrap(), fit_chow_liu(&gibbs(&m1, 4000, 2), 0).unwrap());

    let score = |m: &GraphModel, seed| tree_llr_score(&gibbs(m, 20, seed), &t1, &t0).unwrap();
    let s1: Vec<f64> = (0..30).map(|k| score(&m1, 100 + k)).collect();
    let s0: Vec<f64> = (0..30).map(|k| score(&m0, 200 + k)).collect();
    assert!(mann_whitney_auc(&s1, &s0) > 0.95);
}

fn refit_error(m: &GraphModel, n: usize, seed: u64) -> f64 {
    let d = gibbs(m, n, seed);
    let fit = refit_unregularized(&d, m.structure(), &SolverConfig::default()).unwrap();
    assert!(fit.converged);
    fit.model.natural_vector().iter().zip(m.natural_vector()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn refit_error_shrinks_as_samples_quadruple() {
    let m = GraphModel::uniform(GraphStructure::torus(3, 3), 0.8, 0.3).unwrap();
    let median = |n: usize| {
        let mut e: Vec<f64> = (0..9).map(|s| refit_error(&m, n, 10 * n as u64 + s)).collect();
        e.sort_by(f64::total_cmp);
        e[4]
    };
    let (small, large) = (median(1000), median(4000));
    assert!(large < small, "{small} -> {large}");
    assert!(large < 0.75 * small, "roughly 1/sqrt(n): {small} -> {large}");
}
