//! Chow-Liu dependence trees for phase data.
//!
//! Every pair of nodes gets a von Mises fit of its wrapped phase
//! difference. The fitted concentration gives the pair's mutual
//! information in closed form, a maximum spanning tree over those weights
//! picks the structure, and the fitted pairs become the tree's
//! parent→child conditionals. Root marginals are uniform.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{ln_i0, mi_from_kappa, vm_mle_from_sums, wrap_angle, Angle, LN_TAU};
use crate::dataset::PhaseDataset;
use crate::error::{Error, Result};
use crate::model::{EdgeCoupling, GraphModel, GraphStructure};

/// Union–find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merge the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Dense `p × p` tables of pairwise von Mises fits.
///
/// `mu(a, b)` is the mean direction of `y_b - y_a`; `mu(b, a)` is its
/// wrapped negation. Concentrations and weights are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    p: usize,
    kappa: Vec<f64>,
    mu: Vec<f64>,
    mi: Vec<f64>,
    degenerate: Vec<bool>,
}

impl PairwiseTable {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kappa(&self, a: usize, b: usize) -> f64 {
        self.kappa[a * self.p + b]
    }

    pub fn mu(&self, a: usize, b: usize) -> f64 {
        self.mu[a * self.p + b]
    }

    pub fn mi(&self, a: usize, b: usize) -> f64 {
        self.mi[a * self.p + b]
    }

    pub fn is_degenerate(&self, a: usize, b: usize) -> bool {
        self.degenerate[a * self.p + b]
    }

    /// Row-major mutual-information matrix (diagonal zero).
    pub fn mi_matrix(&self) -> &[f64] {
        &self.mi
    }
}

/// Fit every pair `i < j` on the wrapped differences `y_j - y_i`.
pub fn fit_pairwise(d: &PhaseDataset) -> Result<PairwiseTable> {
    if d.n() < 2 {
        return Err(Error::InsufficientData(format!("pairwise fits need n >= 2, got {}", d.n())));
    }
    let (n, p) = (d.n(), d.p());
    let cos: Vec<f64> = d.values().iter().map(|v| v.cos()).collect();
    let sin: Vec<f64> = d.values().iter().map(|v| v.sin()).collect();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let fits: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (mut sc, mut ss) = (0.0, 0.0);
            for k in 0..n {
                let (ci, si) = (cos[k * p + i], sin[k * p + i]);
                let (cj, sj) = (cos[k * p + j], sin[k * p + j]);
                // cos/sin of y_j - y_i
                sc += cj * ci + sj * si;
                ss += sj * ci - cj * si;
            }
            vm_mle_from_sums(n, sc, ss)
        })
        .collect();

    let mut t = PairwiseTable {
        p,
        kappa: vec![0.0; p * p],
        mu: vec![0.0; p * p],
        mi: vec![0.0; p * p],
        degenerate: vec![false; p * p],
    };
    for (&(i, j), fit) in pairs.iter().zip(&fits) {
        let k = fit.params.kappa;
        let m = fit.params.mu.value();
        let w = mi_from_kappa(k);
        for (a, b, mu) in [(i, j, m), (j, i, wrap_angle(-m))] {
            t.kappa[a * p + b] = k;
            t.mu[a * p + b] = mu;
            t.mi[a * p + b] = w;
            t.degenerate[a * p + b] = fit.degenerate;
        }
    }
    Ok(t)
}

/// Kruskal maximum spanning tree over a dense symmetric `p × p` weight
/// matrix. Equal weights are taken in lexicographic edge order, so the
/// output is deterministic. Returned edges are canonical `(i, j)`, `i < j`,
/// in the order they were accepted.
pub fn max_spanning_tree(p: usize, weights: &[f64]) -> Result<Vec<(usize, usize)>> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("spanning tree needs p >= 2, got {p}")));
    }
    if weights.len() != p * p {
        return Err(Error::Dimension { expected: p * p, got: weights.len() });
    }
    let mut candidates: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    for &(i, j) in &candidates {
        if !weights[i * p + j].is_finite() {
            return Err(Error::NonFinite(weights[i * p + j]));
        }
    }
    // stable sort keeps lexicographic order among ties
    candidates.sort_by(|a, b| weights[b.0 * p + b.1].total_cmp(&weights[a.0 * p + a.1]));
    let mut uf = DisjointSet::new(p);
    let mut tree = Vec::with_capacity(p - 1);
    for (i, j) in candidates {
        if uf.union(i, j) {
            tree.push((i, j));
            if tree.len() == p - 1 {
                break;
            }
        }
    }
    Ok(tree)
}

/// One parent→child conditional `Y_child | Y_parent ~ VM(y_parent + μ, κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    pub kappa: f64,
    pub mu: f64,
}

/// Rooted dependence tree with a uniform root marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeModelFile", into = "TreeModelFile")]
pub struct TreeModel {
    root: usize,
    /// edges in breadth-first order from the root
    edges: Vec<TreeEdge>,
    parent: Vec<Option<usize>>,
}

/// On-disk JSON form: `{root, edges: [{parent, child, kappa, mu}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModelFile {
    pub root: usize,
    pub edges: Vec<TreeEdge>,
}

impl From<TreeModel> for TreeModelFile {
    fn from(t: TreeModel) -> Self {
        Self { root: t.root, edges: t.edges }
    }
}

impl TryFrom<TreeModelFile> for TreeModel {
    type Error = Error;
    fn try_from(f: TreeModelFile) -> Result<Self> {
        TreeModel::new(f.root, f.edges)
    }
}

impl TreeModel {
    /// Validate that the edges form a spanning tree directed away from `root`.
    pub fn new(root: usize, edges: Vec<TreeEdge>) -> Result<Self> {
        let p = edges.len() + 1;
        if root >= p {
            return Err(Error::InvalidGraph(format!("root {root} out of range for p = {p}")));
        }
        let mut parent = vec![None; p];
        for e in &edges {
            if e.parent >= p || e.child >= p || e.child == root || parent[e.child].is_some() {
                return Err(Error::InvalidGraph(format!("bad tree edge {} -> {}", e.parent, e.child)));
            }
            if !(e.kappa.is_finite() && e.kappa >= 0.0 && e.mu.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad edge parameters {e:?}")));
            }
            parent[e.child] = Some(e.parent);
        }
        let structure = GraphStructure::new(p, edges.iter().map(|e| (e.parent, e.child)))?;
        if !structure.is_spanning_tree() {
            return Err(Error::InvalidGraph("edges do not form a spanning tree".into()));
        }
        let mut edges = edges;
        for e in edges.iter_mut() {
            e.mu = wrap_angle(e.mu);
        }
        Ok(Self { root, edges, parent })
    }

    pub fn p(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Undirected structure of the tree.
    pub fn structure(&self) -> GraphStructure {
        GraphStructure::new(self.p(), self.edges.iter().map(|e| (e.parent, e.child)))
            .expect("validated at construction")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Fit a Chow-Liu tree rooted at `root`.
pub fn fit_chow_liu(d: &PhaseDataset, root: usize) -> Result<TreeModel> {
    if root >= d.p() {
        return Err(Error::InvalidParameter(format!("root {root} out of range for p = {}", d.p())));
    }
    let table = fit_pairwise(d)?;
    let undirected = max_spanning_tree(d.p(), table.mi_matrix())?;
    tree_from_table(&table, &undirected, root)
}

/// Orient an undirected spanning tree away from `root`, taking edge
/// parameters from the pairwise table.
pub fn tree_from_table(table: &PairwiseTable, undirected: &[(usize, usize)], root: usize) -> Result<TreeModel> {
    let p = table.p();
    let g = GraphStructure::new(p, undirected.iter().copied())?;
    let mut seen = vec![false; p];
    seen[root] = true;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut edges = Vec::with_capacity(p - 1);
    while let Some(u) = queue.pop_front() {
        for v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                edges.push(TreeEdge { parent: u, child: v, kappa: table.kappa(u, v), mu: table.mu(u, v) });
                queue.push_back(v);
            }
        }
    }
    TreeModel::new(root, edges)
}

/// `ln f(y)` under the tree: uniform root times von Mises conditionals.
pub fn tree_log_likelihood(y: &[f64], t: &TreeModel) -> Result<f64> {
    if y.len() != t.p() {
        return Err(Error::Dimension { expected: t.p(), got: y.len() });
    }
    Ok(tree_ll_raw(y, t))
}

#[inline]
pub(crate) fn tree_ll_raw(y: &[f64], t: &TreeModel) -> f64 {
    -LN_TAU
        + t.edges
            .iter()
            .map(|e| e.kappa * (y[e.child] - y[e.parent] - e.mu).cos() - LN_TAU - ln_i0(e.kappa))
            .sum::<f64>()
}

/// Sum of tree log-likelihoods over the rows of a dataset.
pub fn tree_log_likelihood_sum(d: &PhaseDataset, t: &TreeModel) -> Result<f64> {
    if d.p() != t.p() {
        return Err(Error::Dimension { expected: t.p(), got: d.p() });
    }
    Ok(d.rows().map(|r| tree_ll_raw(r, t)).sum())
}

impl TreeModel {
    /// Conditional of `child` given its parent as an angle pair.
    pub fn conditional(&self, child: usize) -> Option<(usize, f64, Angle)> {
        self.edges
            .iter()
            .find(|e| e.child == child)
            .map(|e| (e.parent, e.kappa, Angle::new(e.mu).unwrap_or(Angle::ZERO)))
    }

    /// The same density as an undirected pairwise model. A tree has
    /// `ln Z = p ln 2π + Σ ln I0(κ)`, so only the energy carries over.
    pub fn to_graph_model(&self) -> Result<GraphModel> {
        let g = self.structure();
        let mut couplings = vec![EdgeCoupling::new(0.0, 0.0)?; g.edges().len()];
        for e in &self.edges {
            let c = EdgeCoupling::new(e.kappa, e.mu)?;
            let k = g.edge_index(e.parent, e.child).expect("edge of own structure");
            couplings[k] = if e.parent < e.child { c } else { c.reversed() };
        }
        GraphModel::new(g, couplings)
    }
}
