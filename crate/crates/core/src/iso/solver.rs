//! Accelerated proximal gradient for the group-penalised screening
//! objective `S(θ) + λ Σ_v ‖(θc, θs)_v‖₂`.

use serde::{Deserialize, Serialize};

use super::{dot, edge_params, Features, NodeProblem};
use crate::dataset::PhaseDataset;
use crate::error::{Error, Result};
use crate::model::NaturalEdgeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 10_000 }
    }
}

/// Result of one node problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSolution {
    pub node: usize,
    pub neighbors: Vec<usize>,
    /// interleaved `[θc, θs]` per neighbour
    pub theta: Vec<f64>,
    /// penalised objective after every accepted step; non-increasing
    pub objective_trace: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NodeSolution {
    /// Estimated natural parameters of the edge to `k`, canonical orientation.
    pub fn edge(&self, k: usize) -> Option<NaturalEdgeParams> {
        let idx = self.neighbors.binary_search(&k).ok()?;
        Some(edge_params(&self.theta, idx))
    }

    /// Estimated coupling strength toward `k` (zero if not a candidate).
    pub fn kappa(&self, k: usize) -> f64 {
        self.edge(k).map_or(0.0, |e| e.norm())
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the starting point")
    }
}

/// Shrink a group toward zero: `v · max(0, 1 - τ/‖v‖)`.
pub fn group_soft_threshold(v: &mut [f64], tau: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= scale);
}

fn penalty(theta: &[f64]) -> f64 {
    theta.chunks_exact(2).map(|g| g[0].hypot(g[1])).sum()
}

/// `pen(b) - pen(a)` without cancellation.
fn penalty_difference(a: &[f64], b: &[f64]) -> f64 {
    a.chunks_exact(2)
        .zip(b.chunks_exact(2))
        .map(|(x, y)| {
            let (na, nb) = (x[0].hypot(x[1]), y[0].hypot(y[1]));
            if na + nb == 0.0 {
                0.0
            } else {
                ((y[0] - x[0]) * (y[0] + x[0]) + (y[1] - x[1]) * (y[1] + x[1])) / (na + nb)
            }
        })
        .sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// One backtracking proximal step from `from` with gradient `g`.
/// Returns `(z, S(z) - S(from))`; `step` is shrunk until the quadratic
/// upper bound holds.
fn prox_step(
    f: &Features,
    ex: &super::Exponents,
    from: &[f64],
    g: &[f64],
    lambda: f64,
    step: &mut f64,
) -> (Vec<f64>, f64) {
    let mut z = vec![0.0; from.len()];
    let mut delta = vec![0.0; from.len()];
    for _ in 0..200 {
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = from[k] - *step * g[k];
        }
        for grp in z.chunks_exact_mut(2) {
            group_soft_threshold(grp, *step * lambda);
        }
        for k in 0..z.len() {
            delta[k] = z[k] - from[k];
        }
        let ds = f.difference(ex, &delta);
        let model = dot(g, &delta) + dot(&delta, &delta) / (2.0 * *step);
        if ds.is_finite() && ds <= model {
            return (z, ds);
        }
        *step *= 0.5;
    }
    (from.to_vec(), 0.0)
}

/// Minimise the penalised screening objective for one node.
///
/// FISTA with backtracking and adaptive restart. Momentum is reset when it
/// points against the proximal-gradient direction; when the momentum step
/// would raise the objective, a plain proximal step is taken from the last
/// accepted point instead, so the recorded objective never increases. Objective changes are computed as exact differences
/// (via `expm1`) rather than by subtracting two values, which keeps the
/// line search meaningful near the optimum.
pub fn solve_node(np: &NodeProblem, d: &PhaseDataset, lambda: f64, cfg: &SolverConfig) -> Result<NodeSolution> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidParameter("tol must be positive and max_iter at least 1".into()));
    }
    np.check(&vec![0.0; np.dim()], d)?;
    let f = Features::new(np, d);
    Ok(minimize(&f, np, lambda, cfg))
}

pub(crate) fn minimize(f: &Features, np: &NodeProblem, lambda: f64, cfg: &SolverConfig) -> NodeSolution {
    let dim = np.dim();
    let mut x = vec![0.0; dim];
    let mut ex_x = f.exponents(&x);
    let mut obj = f.value(&ex_x) + lambda * penalty(&x);
    let mut trace = vec![obj];
    let sol = |theta: Vec<f64>, trace: Vec<f64>, iterations: usize, converged: bool| NodeSolution {
        node: np.u(),
        neighbors: np.neighbors().to_vec(),
        theta,
        objective_trace: trace,
        lambda,
        iterations,
        converged,
    };
    if dim == 0 {
        return sol(x, trace, 0, true);
    }

    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut step = 1.0f64;
    let mut g = vec![0.0; dim];
    for iter in 1..=cfg.max_iter {
        let ex_y = f.exponents(&y);
        f.gradient(&ex_y, &mut g);
        let mut from_x = false;
        let (mut z, _) = prox_step(f, &ex_y, &y, &g, lambda, &mut step);
        let mut dz: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
        let mut change = f.difference(&ex_x, &dz) + lambda * penalty_difference(&x, &z);
        if !(change <= 0.0) {
            // momentum overshot: restart from x
            t = 1.0;
            from_x = true;
            f.gradient(&ex_x, &mut g);
            let (zx, ds) = prox_step(f, &ex_x, &x, &g, lambda, &mut step);
            z = zx;
            dz = z.iter().zip(&x).map(|(a, b)| a - b).collect();
            change = ds + lambda * penalty_difference(&x, &z);
            if !(change <= 0.0) {
                z.clone_from(&x);
                dz.iter_mut().for_each(|v| *v = 0.0);
                change = 0.0;
            }
        }
        let base = if from_x { &x } else { &y };
        let gmap = z.iter().zip(base).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / step;

        // gradient-based restart: drop momentum once it points uphill
        if !from_x && z.iter().zip(&y).zip(&dz).map(|((zk, yk), dk)| (yk - zk) * dk).sum::<f64>() > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = z.iter().zip(&dz).map(|(zk, dk)| zk + beta * dk).collect();
        t = t_next;
        x = z;
        ex_x = f.exponents(&x);
        obj += change;
        trace.push(obj);

        let rel = change.abs() / obj.abs().max(f64::MIN_POSITIVE);
        if rel < cfg.tol && gmap < cfg.tol * (1.0 + norm(&x)) {
            return sol(x, trace, iter, true);
        }
        step = (step * 1.25).min(1e6);
    }
    sol(x, trace, cfg.max_iter, false)
}
