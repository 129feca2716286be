//! Interaction screening.
//!
//! For node `u` the screening objective is
//! `S(θ) = (1/n) Σ_k exp(-Σ_{v≠u} [θc cos(y_j - y_i) + θs sin(y_j - y_i)])`
//! with `(i, j) = (min(u, v), max(u, v))`. It is convex, needs no partition
//! function, and is minimised at the true local parameters.
//!
//! Parameters for a node are stored interleaved, `[θc, θs]` per candidate
//! neighbour in increasing neighbour order.

mod solver;
mod structure;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::PhaseDataset;
use crate::error::{Error, Result};
use crate::model::{GraphModel, NaturalEdgeParams};

pub use solver::{group_soft_threshold, solve_node, NodeSolution, SolverConfig};
pub use structure::{recover_structure, refit_unregularized, EdgeEstimate, Refit, StructureEstimate};

/// Candidate neighbourhood of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeProblem {
    u: usize,
    p: usize,
    neighbors: Vec<usize>,
}

impl NodeProblem {
    /// All `p - 1` other nodes are candidates.
    pub fn new(u: usize, p: usize) -> Result<Self> {
        Self::with_neighbors(u, p, (0..p).filter(|&k| k != u))
    }

    /// Restrict the candidates to `neighbors` (sorted and deduplicated).
    pub fn with_neighbors(u: usize, p: usize, neighbors: impl IntoIterator<Item = usize>) -> Result<Self> {
        if u >= p {
            return Err(Error::InvalidParameter(format!("node {u} out of range for p = {p}")));
        }
        let mut neighbors: Vec<usize> = neighbors.into_iter().collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        if let Some(&k) = neighbors.iter().find(|&&k| k == u || k >= p) {
            return Err(Error::InvalidParameter(format!("invalid neighbour {k} for node {u}")));
        }
        Ok(Self { u, p, neighbors })
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    /// Length of the parameter vector.
    pub fn dim(&self) -> usize {
        2 * self.neighbors.len()
    }

    /// Canonical edge of the `idx`-th candidate.
    pub fn edge(&self, idx: usize) -> (usize, usize) {
        let v = self.neighbors[idx];
        (self.u.min(v), self.u.max(v))
    }

    /// True local parameters of `m` in this problem's layout; absent
    /// edges are zero.
    pub fn parameters_from(&self, m: &GraphModel) -> Result<Vec<f64>> {
        if m.p() != self.p {
            return Err(Error::Dimension { expected: self.p, got: m.p() });
        }
        let mut theta = vec![0.0; self.dim()];
        for idx in 0..self.neighbors.len() {
            let (i, j) = self.edge(idx);
            if let Some(c) = m.coupling(i, j) {
                let n = c.to_natural();
                theta[2 * idx] = n.theta_c;
                theta[2 * idx + 1] = n.theta_s;
            }
        }
        Ok(theta)
    }

    fn check(&self, theta: &[f64], d: &PhaseDataset) -> Result<()> {
        if d.p() != self.p {
            return Err(Error::Dimension { expected: self.p, got: d.p() });
        }
        if theta.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: theta.len() });
        }
        if d.n() == 0 {
            return Err(Error::InsufficientData("empty dataset".into()));
        }
        Ok(())
    }
}

/// Natural parameters of the `idx`-th candidate edge in a node vector.
pub fn edge_params(theta: &[f64], idx: usize) -> NaturalEdgeParams {
    NaturalEdgeParams { theta_c: theta[2 * idx], theta_s: theta[2 * idx + 1] }
}

/// Per-sample local statistics `t_k` for one node, row-major `n × dim`.
pub(crate) struct Features {
    n: usize,
    dim: usize,
    t: Vec<f64>,
}

/// Exponents `-θ·t_k` at one parameter vector, with their maximum.
pub(crate) struct Exponents {
    e: Vec<f64>,
    max: f64,
}

impl Features {
    pub(crate) fn new(np: &NodeProblem, d: &PhaseDataset) -> Self {
        let u = np.u;
        let dim = np.dim();
        let mut t = Vec::with_capacity(d.n() * dim);
        for row in d.rows() {
            let (cu, su) = (row[u].cos(), row[u].sin());
            for &v in &np.neighbors {
                let (cv, sv) = (row[v].cos(), row[v].sin());
                // y_v - y_u; flip the sine when u is the larger endpoint
                let c = cv * cu + sv * su;
                let s = sv * cu - cv * su;
                t.push(c);
                t.push(if u < v { s } else { -s });
            }
        }
        Self { n: d.n(), dim, t }
    }

    pub(crate) fn row(&self, k: usize) -> &[f64] {
        &self.t[k * self.dim..(k + 1) * self.dim]
    }

    pub(crate) fn exponents(&self, theta: &[f64]) -> Exponents {
        let e: Vec<f64> = (0..self.n).map(|k| -dot(self.row(k), theta)).collect();
        let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Exponents { e, max }
    }

    /// `S(θ)` from precomputed exponents.
    pub(crate) fn value(&self, ex: &Exponents) -> f64 {
        let s: f64 = ex.e.iter().map(|&e| (e - ex.max).exp()).sum();
        ex.max.exp() * s / self.n as f64
    }

    /// `∇S(θ) = -(1/n) Σ t_k exp(-θ·t_k)`.
    pub(crate) fn gradient(&self, ex: &Exponents, out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..self.n {
            let w = (ex.e[k] - ex.max).exp();
            for (g, &t) in out.iter_mut().zip(self.row(k)) {
                *g += w * t;
            }
        }
        let scale = -ex.max.exp() / self.n as f64;
        out.iter_mut().for_each(|g| *g *= scale);
    }

    /// `S(θ + δ) - S(θ)` computed without cancellation.
    pub(crate) fn difference(&self, ex: &Exponents, delta: &[f64]) -> f64 {
        let s: f64 = (0..self.n)
            .map(|k| (ex.e[k] - ex.max).exp() * (-dot(self.row(k), delta)).exp_m1())
            .sum();
        ex.max.exp() * s / self.n as f64
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Screening objective `S(θ)` for one node.
pub fn iso_objective(np: &NodeProblem, theta: &[f64], d: &PhaseDataset) -> Result<f64> {
    np.check(theta, d)?;
    let f = Features::new(np, d);
    Ok(f.value(&f.exponents(theta)))
}

/// Gradient of [`iso_objective`].
pub fn iso_gradient(np: &NodeProblem, theta: &[f64], d: &PhaseDataset) -> Result<Vec<f64>> {
    np.check(theta, d)?;
    let f = Features::new(np, d);
    let mut g = vec![0.0; np.dim()];
    f.gradient(&f.exponents(theta), &mut g);
    Ok(g)
}

/// Per-sample score terms `X_k = t_k exp(-θ·t_k)`, row-major `n × dim`.
///
/// At the true parameters every component has mean zero and, for each
/// candidate edge, `X_c² + X_s²` has mean one.
pub fn score_terms(np: &NodeProblem, theta: &[f64], d: &PhaseDataset) -> Result<Vec<f64>> {
    np.check(theta, d)?;
    let f = Features::new(np, d);
    let mut out = Vec::with_capacity(f.t.len());
    for k in 0..f.n {
        let t = f.row(k);
        let w = (-dot(t, theta)).exp();
        out.extend(t.iter().map(|x| x * w));
    }
    Ok(out)
}

/// Which theoretical guarantee the penalty is calibrated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// `4 √(ln(8p/ε) / n)`: parameter-error bound.
    Parameter,
    /// `4 √(ln(8p²/ε) / n)`: exact structure recovery.
    Structure,
}

pub fn lambda_default(p: usize, n: usize, eps: f64, mode: LambdaMode) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("lambda needs p >= 1 and n >= 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    let p = p as f64;
    let num = match mode {
        LambdaMode::Parameter => 8.0 * p / eps,
        LambdaMode::Structure => 8.0 * p * p / eps,
    };
    Ok(4.0 * (num.ln() / n as f64).sqrt())
}

/// High-probability bound `4 √(ln(4p/ε) / n)` on `‖∇S(θ*)‖_∞`.
pub fn gradient_bound(p: usize, n: usize, eps: f64) -> f64 {
    4.0 * ((4.0 * p as f64 / eps).ln() / n as f64).sqrt()
}

/// Empirical correlation of the local statistics, `H = (1/n) Σ t tᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoDiagnostics {
    pub dim: usize,
    /// row-major `dim × dim`
    pub matrix: Vec<f64>,
    pub min_eigenvalue: f64,
}

impl IsoDiagnostics {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.matrix[a * self.dim + b]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|a| self.get(a, a)).sum()
    }
}

pub fn empirical_correlation(np: &NodeProblem, d: &PhaseDataset) -> Result<IsoDiagnostics> {
    np.check(&vec![0.0; np.dim()], d)?;
    let f = Features::new(np, d);
    let dim = f.dim;
    let mut h = vec![0.0; dim * dim];
    for k in 0..f.n {
        let t = f.row(k);
        for a in 0..dim {
            for b in a..dim {
                h[a * dim + b] += t[a] * t[b];
            }
        }
    }
    let inv_n = 1.0 / f.n as f64;
    for a in 0..dim {
        for b in a..dim {
            let v = h[a * dim + b] * inv_n;
            h[a * dim + b] = v;
            h[b * dim + a] = v;
        }
    }
    let min_eigenvalue = if dim == 0 {
        0.0
    } else {
        SymmetricEigen::new(DMatrix::from_row_slice(dim, dim, &h))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    Ok(IsoDiagnostics { dim, matrix: h, min_eigenvalue })
}
