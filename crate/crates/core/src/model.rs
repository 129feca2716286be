//! The pairwise phase-coupling model
//!
//! ```text
//! f(y) ∝ exp( Σ_{(i,j)∈E} κ_ij cos(y_j - y_i - μ_ij) )
//! ```
//!
//! Edges are stored with the canonical orientation `i < j`. Reversing an
//! edge negates its offset: `κ cos(y_j - y_i - μ) = κ cos(y_i - y_j + μ)`.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{wrap_angle, Angle, VonMisesParams, LN_TAU};
use crate::error::{Error, Result};

/// Undirected simple graph on `p` nodes with canonical `(i, j)`, `i < j` edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StructureFile", into = "StructureFile")]
pub struct GraphStructure {
    p: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct StructureFile {
    p: usize,
    edges: Vec<(usize, usize)>,
}

impl From<GraphStructure> for StructureFile {
    fn from(g: GraphStructure) -> Self {
        Self { p: g.p, edges: g.edges }
    }
}

impl TryFrom<StructureFile> for GraphStructure {
    type Error = Error;
    fn try_from(f: StructureFile) -> Result<Self> {
        GraphStructure::new(f.p, f.edges)
    }
}

impl GraphStructure {
    /// Validate and canonicalise an edge list. Each pair may be given in
    /// either orientation but only once.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= p || b >= p {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range for p = {p}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self { p, edges: set.into_iter().collect() })
    }

    pub fn empty(p: usize) -> Self {
        Self { p, edges: Vec::new() }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(i, j)| match (i == u, j == u) {
                (true, _) => Some(j),
                (_, true) => Some(i),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.p];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Spanning tree drawn uniformly at random by decoding a random Prüfer
    /// sequence.
    pub fn random_tree<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Self {
        match p {
            0 | 1 => return Self::empty(p),
            2 => return Self { p, edges: vec![(0, 1)] },
            _ => {}
        }
        let seq: Vec<usize> = (0..p - 2).map(|_| rng.random_range(0..p)).collect();
        Self::from_prufer(p, &seq)
    }

    /// Decode a Prüfer sequence of length `p - 2`.
    pub fn from_prufer(p: usize, seq: &[usize]) -> Self {
        let mut degree = vec![1usize; p];
        for &s in seq {
            degree[s] += 1;
        }
        let mut leaves: BTreeSet<usize> = (0..p).filter(|&i| degree[i] == 1).collect();
        let mut edges = Vec::with_capacity(p - 1);
        for &s in seq {
            let leaf = *leaves.iter().next().expect("prufer decode always has a leaf");
            leaves.remove(&leaf);
            edges.push((leaf.min(s), leaf.max(s)));
            degree[s] -= 1;
            if degree[s] == 1 {
                leaves.insert(s);
            }
        }
        let last: Vec<usize> = leaves.into_iter().collect();
        edges.push((last[0], last[1]));
        Self::new(p, edges).expect("decoded Prüfer sequence is a tree")
    }

    /// Four-connected `rows × cols` lattice with wraparound. Duplicate
    /// links collapse, so a 2-wide dimension contributes one neighbour.
    pub fn torus(rows: usize, cols: usize) -> Self {
        let p = rows * cols;
        let id = |r: usize, c: usize| r * cols + c;
        let mut set = BTreeSet::new();
        for r in 0..rows {
            for c in 0..cols {
                let u = id(r, c);
                for v in [id((r + 1) % rows, c), id(r, (c + 1) % cols)] {
                    if u != v {
                        set.insert((u.min(v), u.max(v)));
                    }
                }
            }
        }
        Self { p, edges: set.into_iter().collect() }
    }

    /// True when the graph is connected and has exactly `p - 1` edges.
    pub fn is_spanning_tree(&self) -> bool {
        if self.p == 0 || self.edges.len() + 1 != self.p {
            return false;
        }
        let mut uf = crate::chow_liu::DisjointSet::new(self.p);
        self.edges.iter().all(|&(i, j)| uf.union(i, j))
    }
}

/// Coupling strength and preferred lag of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCoupling {
    pub kappa: f64,
    pub mu: Angle,
}

impl EdgeCoupling {
    pub fn new(kappa: f64, mu: f64) -> Result<Self> {
        let v = VonMisesParams::new(mu, kappa)?;
        Ok(Self { kappa: v.kappa, mu: v.mu })
    }

    pub fn to_natural(self) -> NaturalEdgeParams {
        NaturalEdgeParams {
            theta_c: self.kappa * self.mu.value().cos(),
            theta_s: self.kappa * self.mu.value().sin(),
        }
    }

    pub fn from_natural(n: NaturalEdgeParams) -> Self {
        n.to_coupling()
    }

    /// The same coupling seen from the reversed orientation.
    pub fn reversed(self) -> Self {
        Self { kappa: self.kappa, mu: Angle::new(-self.mu.value()).unwrap_or(Angle::ZERO) }
    }
}

/// Cartesian form `(κ cos μ, κ sin μ)` of an edge coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalEdgeParams {
    pub theta_c: f64,
    pub theta_s: f64,
}

impl NaturalEdgeParams {
    /// `(0, 0)` maps to `κ = 0, μ = 0`.
    pub fn to_coupling(self) -> EdgeCoupling {
        let kappa = self.theta_c.hypot(self.theta_s);
        let mu = if kappa == 0.0 { 0.0 } else { wrap_angle(self.theta_s.atan2(self.theta_c)) };
        EdgeCoupling { kappa, mu: Angle::new(mu).unwrap_or(Angle::ZERO) }
    }

    pub fn norm(self) -> f64 {
        self.theta_c.hypot(self.theta_s)
    }
}

/// A neighbour of some node `u` together with the coupling oriented as
/// `κ cos(y_k - y_u - μ)`.
#[derive(Debug, Clone, Copy)]
struct Link {
    node: usize,
    kappa: f64,
    mu: f64,
}

/// A graph with per-edge couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphModelFile", into = "GraphModelFile")]
pub struct GraphModel {
    structure: GraphStructure,
    couplings: Vec<EdgeCoupling>,
    #[serde(skip)]
    links: Vec<Vec<Link>>,
}

impl PartialEq for Link {
    fn eq(&self, o: &Self) -> bool {
        self.node == o.node && self.kappa == o.kappa && self.mu == o.mu
    }
}

impl GraphModel {
    /// `couplings[e]` belongs to `structure.edges()[e]`.
    pub fn new(structure: GraphStructure, couplings: Vec<EdgeCoupling>) -> Result<Self> {
        if couplings.len() != structure.edges().len() {
            return Err(Error::Dimension { expected: structure.edges().len(), got: couplings.len() });
        }
        for c in &couplings {
            if !(c.kappa.is_finite() && c.kappa >= 0.0) {
                return Err(Error::InvalidParameter(format!("invalid coupling {}", c.kappa)));
            }
        }
        let mut links = vec![Vec::new(); structure.p()];
        for (&(i, j), c) in structure.edges().iter().zip(&couplings) {
            links[i].push(Link { node: j, kappa: c.kappa, mu: c.mu.value() });
            links[j].push(Link { node: i, kappa: c.kappa, mu: -c.mu.value() });
        }
        Ok(Self { structure, couplings, links })
    }

    /// Every edge gets the same coupling.
    pub fn uniform(structure: GraphStructure, kappa: f64, mu: f64) -> Result<Self> {
        let c = EdgeCoupling::new(kappa, mu)?;
        let n = structure.edges().len();
        Self::new(structure, vec![c; n])
    }

    pub fn from_natural(structure: GraphStructure, natural: &[NaturalEdgeParams]) -> Result<Self> {
        Self::new(structure, natural.iter().map(|n| n.to_coupling()).collect())
    }

    pub fn p(&self) -> usize {
        self.structure.p()
    }

    pub fn structure(&self) -> &GraphStructure {
        &self.structure
    }

    pub fn couplings(&self) -> &[EdgeCoupling] {
        &self.couplings
    }

    pub fn natural(&self) -> Vec<NaturalEdgeParams> {
        self.couplings.iter().map(|c| c.to_natural()).collect()
    }

    /// Natural parameters stacked as `[θ_c; θ_s]`, matching
    /// [`SufficientStats::vector`].
    pub fn natural_vector(&self) -> Vec<f64> {
        let nat = self.natural();
        nat.iter().map(|n| n.theta_c).chain(nat.iter().map(|n| n.theta_s)).collect()
    }

    /// Coupling of edge `(a, b)` oriented as `cos(y_b - y_a - μ)`, or `None`.
    pub fn coupling(&self, a: usize, b: usize) -> Option<EdgeCoupling> {
        let e = self.structure.edge_index(a, b)?;
        let c = self.couplings[e];
        Some(if a < b { c } else { c.reversed() })
    }

    /// Multiply every coupling strength by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let cs = self
            .couplings
            .iter()
            .map(|c| EdgeCoupling { kappa: c.kappa * factor, mu: c.mu })
            .collect();
        Self::new(self.structure.clone(), cs)
    }
}

/// Per-edge `(cos(y_j - y_i), sin(y_j - y_i))` for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub pairs: Vec<(f64, f64)>,
}

impl SufficientStats {
    /// Stacked `[φ_c; φ_s]`.
    pub fn vector(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.0).chain(self.pairs.iter().map(|p| p.1)).collect()
    }
}

pub fn suff_stats(y: &[f64], g: &GraphStructure) -> Result<SufficientStats> {
    check_len(y, g.p())?;
    Ok(SufficientStats {
        pairs: g
            .edges()
            .iter()
            .map(|&(i, j)| {
                let d = y[j] - y[i];
                (d.cos(), d.sin())
            })
            .collect(),
    })
}

fn check_len(y: &[f64], p: usize) -> Result<()> {
    if y.len() != p {
        return Err(Error::Dimension { expected: p, got: y.len() });
    }
    Ok(())
}

/// `Σ κ_ij cos(y_j - y_i - μ_ij)`; the exponent of the joint density.
pub fn unnorm_log_density(y: &[f64], m: &GraphModel) -> Result<f64> {
    check_len(y, m.p())?;
    Ok(energy(y, m))
}

#[inline]
pub(crate) fn energy(y: &[f64], m: &GraphModel) -> f64 {
    m.structure
        .edges()
        .iter()
        .zip(&m.couplings)
        .map(|(&(i, j), c)| c.kappa * (y[j] - y[i] - c.mu.value()).cos())
        .sum()
}

/// Von Mises parameters of `Y_u` given every other coordinate of `y`.
///
/// `y[u]` is ignored. An isolated node, or neighbours whose pulls cancel,
/// gives the uniform law.
pub fn conditional_params(u: usize, y: &[f64], m: &GraphModel) -> Result<VonMisesParams> {
    check_len(y, m.p())?;
    if u >= m.p() {
        return Err(Error::Dimension { expected: m.p(), got: u });
    }
    let (mu, kappa) = conditional_raw(u, y, m);
    Ok(VonMisesParams { mu: Angle::new(mu)?, kappa })
}

#[inline]
pub(crate) fn conditional_raw(u: usize, y: &[f64], m: &GraphModel) -> (f64, f64) {
    let z: Complex64 = m.links[u]
        .iter()
        .map(|l| Complex64::from_polar(l.kappa, y[l.node] - l.mu))
        .sum();
    let a = z.norm();
    // guard against round-off leaving a tiny spurious resultant
    let scale: f64 = m.links[u].iter().map(|l| l.kappa).sum();
    if a <= 1e-14 * scale.max(1.0) {
        (0.0, 0.0)
    } else {
        (wrap_angle(z.arg()), a)
    }
}

/// Monte Carlo estimate of `ln Z` and its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub log_z: f64,
    pub std_err: f64,
}

const MC_BLOCK: usize = 8192;

/// Estimate the log partition function by uniform sampling on the torus.
///
/// One seed is drawn from `rng`; draws are split into fixed-size blocks,
/// each on its own ChaCha stream, so the result does not depend on how
/// blocks are scheduled across threads.
pub fn mc_log_partition<R: Rng + ?Sized>(m: &GraphModel, n_mc: usize, rng: &mut R) -> Result<McEstimate> {
    if n_mc < 1000 {
        return Err(Error::InvalidParameter(format!("n_mc must be at least 1000, got {n_mc}")));
    }
    let seed: u64 = rng.random();
    let p = m.p();
    let blocks = n_mc.div_ceil(MC_BLOCK);
    let log_w: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(b as u64);
            let len = MC_BLOCK.min(n_mc - b * MC_BLOCK);
            let mut y = vec![0.0; p];
            (0..len)
                .map(|_| {
                    for v in y.iter_mut() {
                        *v = r.random::<f64>() * TAU - std::f64::consts::PI;
                    }
                    energy(&y, m)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    let n = n_mc as f64;
    let log_z = p as f64 * LN_TAU + max + (sum / n).ln();

    // leave-one-out jackknife of ln(mean w)
    let loo: Vec<f64> = w.iter().map(|wi| ((sum - wi).max(f64::MIN_POSITIVE) / (n - 1.0)).ln()).collect();
    let mean = loo.iter().sum::<f64>() / n;
    let var = (n - 1.0) / n * loo.iter().map(|l| (l - mean).powi(2)).sum::<f64>();
    Ok(McEstimate { log_z, std_err: var.sqrt() })
}

/// On-disk JSON form: `{p, edges: [{i, j, kappa, mu}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphModelFile {
    pub p: usize,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub kappa: f64,
    pub mu: f64,
}

impl From<GraphModel> for GraphModelFile {
    fn from(m: GraphModel) -> Self {
        Self {
            p: m.p(),
            edges: m
                .structure
                .edges()
                .iter()
                .zip(&m.couplings)
                .map(|(&(i, j), c)| EdgeRecord { i, j, kappa: c.kappa, mu: c.mu.value() })
                .collect(),
        }
    }
}

impl TryFrom<GraphModelFile> for GraphModel {
    type Error = Error;

    fn try_from(f: GraphModelFile) -> Result<Self> {
        let mut records: Vec<(usize, usize, EdgeCoupling)> = Vec::with_capacity(f.edges.len());
        for e in &f.edges {
            let c = EdgeCoupling::new(e.kappa, e.mu)?;
            records.push(if e.i < e.j { (e.i, e.j, c) } else { (e.j, e.i, c.reversed()) });
        }
        let structure = GraphStructure::new(f.p, records.iter().map(|r| (r.0, r.1)))?;
        let mut couplings = vec![EdgeCoupling { kappa: 0.0, mu: Angle::ZERO }; records.len()];
        for (i, j, c) in records {
            let idx = structure.edge_index(i, j).expect("edge just inserted");
            couplings[idx] = c;
        }
        GraphModel::new(structure, couplings)
    }
}

impl GraphModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::{bessel_i0, vm_log_density};
    use rand::Rng;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn random_model(p: usize, rng: &mut ChaCha8Rng) -> GraphModel {
        let mut edges = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                if rng.random::<f64>() < 0.6 {
                    edges.push((i, j));
                }
            }
        }
        let g = GraphStructure::new(p, edges).unwrap();
        let cs = g
            .edges()
            .iter()
            .map(|_| EdgeCoupling::new(rng.random::<f64>() * 2.0, rng.random::<f64>() * TAU).unwrap())
            .collect();
        GraphModel::new(g, cs).unwrap()
    }

    #[test]
    fn structure_validation() {
        assert!(GraphStructure::new(3, [(0, 0)]).is_err());
        assert!(GraphStructure::new(3, [(0, 3)]).is_err());
        assert!(GraphStructure::new(3, [(0, 1), (1, 0)]).is_err());
        let g = GraphStructure::new(3, [(2, 0), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(g.neighbors(0), vec![1, 2]);
    }

    #[test]
    fn torus_degrees() {
        let g = GraphStructure::torus(3, 3);
        assert_eq!(g.edges().len(), 18);
        for u in 0..9 {
            assert_eq!(g.neighbors(u).len(), 4);
        }
        let g2 = GraphStructure::torus(2, 2);
        assert_eq!(g2.edges().len(), 4);
        assert_eq!(g2.max_degree(), 2);
    }

    #[test]
    fn random_trees_are_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in 2..12 {
            for _ in 0..20 {
                assert!(GraphStructure::random_tree(p, &mut rng).is_spanning_tree());
            }
        }
        let star = GraphStructure::from_prufer(5, &[0, 0, 0]);
        assert_eq!(star.edges(), &[(0, 1), (0, 2), (0, 3), (0, 4)]);
    }

    #[test]
    fn natural_parameter_examples() {
        let n = EdgeCoupling::new(1.0, 0.0).unwrap().to_natural();
        assert_eq!((n.theta_c, n.theta_s), (1.0, 0.0));
        let z = EdgeCoupling::new(0.0, 2.0).unwrap().to_natural();
        assert_eq!(z.norm(), 0.0);
        let back = NaturalEdgeParams { theta_c: 0.0, theta_s: 0.0 }.to_coupling();
        assert_eq!((back.kappa, back.mu.value()), (0.0, 0.0));
        let q = EdgeCoupling::new(2.0, FRAC_PI_4).unwrap().to_natural();
        assert!((q.theta_c - 2f64.sqrt()).abs() < 1e-15);
        assert!((q.theta_s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn natural_round_trip_many() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let c = EdgeCoupling::new(rng.random::<f64>() * 10.0 + 1e-3, rng.random::<f64>() * TAU - PI).unwrap();
            let back = c.to_natural().to_coupling();
            assert!((back.kappa - c.kappa).abs() < 1e-12);
            let d = wrap_angle(back.mu.value() - c.mu.value()).abs();
            assert!(d < 1e-12 || TAU - d < 1e-12);
        }
    }

    #[test]
    fn suff_stats_examples() {
        let g = GraphStructure::new(3, [(0, 1), (1, 2)]).unwrap();
        let s = suff_stats(&[0.3, 0.3, 0.3 + FRAC_PI_2], &g).unwrap();
        assert_eq!(s.pairs[0], (1.0, 0.0));
        assert!(s.pairs[1].0.abs() < 1e-15 && (s.pairs[1].1 - 1.0).abs() < 1e-15);
        assert!(suff_stats(&[0.0, 0.0], &g).is_err());
    }

    proptest! {
        #[test]
        fn suff_stats_on_unit_circle(y in proptest::collection::vec(-PI..PI, 5)) {
            let g = GraphStructure::new(5, [(0, 1), (0, 4), (2, 3), (1, 3)]).unwrap();
            for (c, s) in suff_stats(&y, &g).unwrap().pairs {
                prop_assert!((c * c + s * s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn density_rotation_invariant(y in proptest::collection::vec(-PI..PI, 5), shift in -10.0f64..10.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(5, &mut rng);
            let a = unnorm_log_density(&y, &m).unwrap();
            let z: Vec<f64> = y.iter().map(|v| wrap_angle(v + shift)).collect();
            let b = unnorm_log_density(&z, &m).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn density_examples() {
        let g = GraphStructure::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let m = GraphModel::new(
            g,
            vec![EdgeCoupling::new(0.5, 0.0).unwrap(), EdgeCoupling::new(1.5, 0.0).unwrap(), EdgeCoupling::new(2.0, 0.0).unwrap()],
        )
        .unwrap();
        assert!((unnorm_log_density(&[0.7; 3], &m).unwrap() - 4.0).abs() < 1e-14);

        let single = GraphModel::uniform(GraphStructure::new(2, [(0, 1)]).unwrap(), 1.7, 0.4).unwrap();
        assert!((unnorm_log_density(&[0.1, 0.5], &single).unwrap() - 1.7).abs() < 1e-14);
    }

    #[test]
    fn density_dual_path_and_orientation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = random_model(6, &mut rng);
            let y: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * TAU - PI).collect();
            let direct = unnorm_log_density(&y, &m).unwrap();
            let phi = suff_stats(&y, m.structure()).unwrap().vector();
            let dual: f64 = m.natural_vector().iter().zip(&phi).map(|(a, b)| a * b).sum();
            assert!((direct - dual).abs() < 1e-12);
            // reversed orientation with negated offsets
            let reversed: f64 = m
                .structure()
                .edges()
                .iter()
                .zip(m.couplings())
                .map(|(&(i, j), c)| c.kappa * (y[i] - y[j] + c.mu.value()).cos())
                .sum();
            assert!((direct - reversed).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_examples() {
        let m = GraphModel::uniform(GraphStructure::new(2, [(0, 1)]).unwrap(), 1.3, 0.4).unwrap();
        // node 0 is the smaller endpoint: term cos(y1 - y0 - μ) → location y1 - μ
        let c0 = conditional_params(0, &[0.0, 1.0], &m).unwrap();
        assert!((c0.mu.value() - 0.6).abs() < 1e-14 && (c0.kappa - 1.3).abs() < 1e-14);
        let c1 = conditional_params(1, &[1.0, 0.0], &m).unwrap();
        assert!((c1.mu.value() - 1.4).abs() < 1e-14);

        // two opposite pulls cancel
        let g = GraphStructure::new(3, [(0, 1), (0, 2)]).unwrap();
        let m = GraphModel::uniform(g, 1.0, 0.0).unwrap();
        let c = conditional_params(0, &[0.0, 0.5, 0.5 + PI], &m).unwrap();
        assert_eq!(c.kappa, 0.0);

        let iso = GraphModel::uniform(GraphStructure::new(3, [(0, 1)]).unwrap(), 1.0, 0.0).unwrap();
        assert_eq!(conditional_params(2, &[0.0, 0.0, 0.0], &iso).unwrap().kappa, 0.0);
        assert!(conditional_params(3, &[0.0; 3], &iso).is_err());
    }

    #[test]
    fn conditional_matches_normalized_joint_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let grid = 1000;
        for trial in 0..20 {
            let p = 2 + trial % 5;
            let m = random_model(p, &mut rng);
            let mut y: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * TAU - PI).collect();
            let u = rng.random_range(0..p);
            let cond = conditional_params(u, &y, &m).unwrap();
            let h = TAU / grid as f64;
            let mut joint = Vec::with_capacity(grid);
            let mut vm = Vec::with_capacity(grid);
            for g in 0..grid {
                y[u] = -PI + g as f64 * h;
                joint.push(unnorm_log_density(&y, &m).unwrap());
                vm.push(vm_log_density(Angle::new(y[u]).unwrap(), &cond));
            }
            let jmax = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let jsum: f64 = joint.iter().map(|l| (l - jmax).exp() * h).sum();
            for (jl, vl) in joint.iter().zip(&vm) {
                let a = (jl - jmax).exp() / jsum;
                let b = vl.exp();
                assert!((a - b).abs() < 1e-8, "trial {trial}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mc_partition_two_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for kappa in [0.5, 1.0, 2.0] {
            let m = GraphModel::uniform(GraphStructure::new(2, [(0, 1)]).unwrap(), kappa, 0.3).unwrap();
            let est = mc_log_partition(&m, 100_000, &mut rng).unwrap();
            let exact = 2.0 * LN_TAU + bessel_i0(kappa).unwrap().ln();
            assert!((est.log_z - exact).abs() < 3.0 * est.std_err, "{kappa}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn mc_partition_empty_graph_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = GraphModel::new(GraphStructure::empty(4), vec![]).unwrap();
        let est = mc_log_partition(&m, 5000, &mut rng).unwrap();
        assert_eq!(est.log_z, 4.0 * LN_TAU);
        assert_eq!(est.std_err, 0.0);
        assert!(mc_log_partition(&m, 999, &mut rng).is_err());
    }

    #[test]
    fn mc_partition_zero_coupling_edge_factorizes() {
        let chain = GraphStructure::new(3, [(0, 1), (1, 2)]).unwrap();
        let tri = GraphStructure::new(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let a = GraphModel::new(chain, vec![EdgeCoupling::new(1.0, 0.2).unwrap(), EdgeCoupling::new(0.8, -0.5).unwrap()]).unwrap();
        let b = GraphModel::new(
            tri,
            vec![EdgeCoupling::new(1.0, 0.2).unwrap(), EdgeCoupling::new(0.0, 0.0).unwrap(), EdgeCoupling::new(0.8, -0.5).unwrap()],
        )
        .unwrap();
        let ea = mc_log_partition(&a, 100_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let eb = mc_log_partition(&b, 100_000, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let se = ea.std_err.hypot(eb.std_err);
        assert!((ea.log_z - eb.log_z).abs() < 3.0 * se);
        // the chain factorises exactly: (2π)^3 I0(κ1) I0(κ2)
        let exact = 3.0 * LN_TAU + bessel_i0(1.0).unwrap().ln() + bessel_i0(0.8).unwrap().ln();
        assert!((ea.log_z - exact).abs() < 3.0 * ea.std_err);
    }

    #[test]
    fn mc_partition_deterministic_given_seed() {
        let m = GraphModel::uniform(GraphStructure::torus(2, 2), 1.0, 0.0).unwrap();
        let a = mc_log_partition(&m, 20_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = mc_log_partition(&m, 20_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip_and_reorientation() {
        let text = r#"{"p":3,"edges":[{"i":2,"j":0,"kappa":1.5,"mu":0.25},{"i":0,"j":1,"kappa":0.5,"mu":-1.0}]}"#;
        let m = GraphModel::from_json(text).unwrap();
        assert_eq!(m.structure().edges(), &[(0, 1), (0, 2)]);
        assert_eq!(m.couplings()[1].mu.value(), -0.25);
        assert_eq!(m.coupling(2, 0).unwrap().mu.value(), 0.25);
        let back = GraphModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(GraphModel::from_json(r#"{"p":2,"edges":[{"i":0,"j":1,"kappa":-1,"mu":0}]}"#).is_err());
    }
}
