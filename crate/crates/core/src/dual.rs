//! Lagrange dual machinery for the flow problem.
//!
//! For node prices `lambda`, each edge flow maximizing the Lagrangian is
//! recovered independently from the price difference across the edge:
//! `x_e = inv_deriv(lambda_tail - lambda_head)`. The dual function
//! `q(lambda) = -sum_e cost_e(x_e) + lambda' (A x - b)` is convex and
//! differentiable with gradient `g = A x(lambda) - b`, and its Hessian is
//! a weighted graph Laplacian with per-edge weights `1 / cost_e''(x_e)`.

use crate::error::{Error, Result};
use crate::linalg::{self, SquareMat};
use crate::problem::{EdgeCost, FlowProblem};
use crate::scalar::{sc, Real};

/// Snapshot of all dual quantities at a given price vector.
#[derive(Debug, Clone)]
pub struct DualState<S> {
    pub lambda: Vec<S>,
    /// Recovered flows `x(lambda)`.
    pub flows: Vec<S>,
    /// Dual gradient `A x(lambda) - b`.
    pub gradient: Vec<S>,
    /// Dual value `q(lambda)`.
    pub value: S,
}

impl<S: Real> DualState<S> {
    pub fn evaluate<C: EdgeCost<S>>(problem: &FlowProblem<S, C>, lambda: &[S]) -> Result<Self> {
        let flows = primal_recovery(problem, lambda)?;
        let gradient = gradient_from_flows(problem, &flows);
        let value = value_from_flows(problem, lambda, &flows)?;
        Ok(Self {
            lambda: lambda.to_vec(),
            flows,
            gradient,
            value,
        })
    }
}

/// Per-edge Lagrangian maximizer `x_e = inv_deriv(lambda_i - lambda_j)`
/// for each edge `(i, j)`; unique by strict convexity.
pub fn primal_recovery<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
) -> Result<Vec<S>> {
    check_lambda_len(problem, lambda)?;
    Ok(problem
        .graph()
        .edges()
        .iter()
        .zip(problem.costs())
        .map(|(&(tail, head), cost)| cost.inv_deriv(lambda[tail] - lambda[head]))
        .collect())
}

/// Dual objective `q(lambda)`.
pub fn dual_value<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
) -> Result<S> {
    let flows = primal_recovery(problem, lambda)?;
    value_from_flows(problem, lambda, &flows)
}

fn value_from_flows<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    flows: &[S],
) -> Result<S> {
    let cost: S = problem.primal_objective(flows)?;
    let residual = problem.feasibility_residual(flows)?;
    Ok(-cost + linalg::dot(lambda, &residual))
}

/// Node `i`'s share of the dual objective:
/// `q_i = -sum over edges entering i of cost_e(x_e) + lambda_i ((A x)_i - b_i)`.
///
/// Each edge's cost term is owned by its head node, so the shares always
/// add up to `dual_value` exactly. Evaluation touches only quantities on
/// edges incident to `i` (one hop of information).
pub fn local_dual_value<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    node: usize,
) -> Result<S> {
    check_lambda_len(problem, lambda)?;
    if node >= problem.node_count() {
        return Err(Error::InvalidArgument(format!(
            "node id {node} out of range (n = {})",
            problem.node_count()
        )));
    }
    Ok(local_value_unchecked(problem, lambda, node))
}

/// Shared kernel for the local objective; also used by the line search so
/// that repeated trial evaluations skip re-validation.
pub(crate) fn local_value_unchecked<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    node: usize,
) -> S {
    let mut cost_in = S::zero();
    let mut divergence = S::zero();
    for inc in problem.graph().incident_edges(node) {
        let (tail, head) = problem.graph().edges()[inc.edge];
        let flow = problem.cost(inc.edge).inv_deriv(lambda[tail] - lambda[head]);
        if inc.leaves {
            divergence += flow;
        } else {
            divergence -= flow;
            cost_in += problem.cost(inc.edge).value(flow);
        }
    }
    -cost_in + lambda[node] * (divergence - problem.rates()[node])
}

/// Dual gradient `g = A x(lambda) - b`; component `i` involves only flows
/// on edges incident to node `i`.
pub fn dual_gradient<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
) -> Result<Vec<S>> {
    let flows = primal_recovery(problem, lambda)?;
    Ok(gradient_from_flows(problem, &flows))
}

fn gradient_from_flows<S: Real, C: EdgeCost<S>>(problem: &FlowProblem<S, C>, flows: &[S]) -> Vec<S> {
    let mut g = vec![S::zero(); problem.node_count()];
    for (&(tail, head), &xe) in problem.graph().edges().iter().zip(flows) {
        g[tail] += xe;
        g[head] -= xe;
    }
    for (gi, &b) in g.iter_mut().zip(problem.rates()) {
        *gi -= b;
    }
    g
}

/// Dual Hessian as a weighted Laplacian split `H = D - B`.
///
/// `H = A diag(1 / cost_e''(x_e)) A'`, so `H` has the sparsity pattern of
/// the undirected support: `D` carries the per-node weight sums and `B`
/// the (nonnegative) off-diagonal edge weights.
#[derive(Debug, Clone)]
pub struct HessianSplit<S> {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// Per-edge weight `1 / cost_e''(x_e)`.
    weights: Vec<S>,
    /// Diagonal of `H`: sum of incident edge weights.
    diag: Vec<S>,
}

impl<S: Real> HessianSplit<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn diag(&self) -> &[S] {
        &self.diag
    }

    /// `D^{-1} v` element-wise.
    pub fn apply_d_inv(&self, v: &[S]) -> Vec<S> {
        v.iter().zip(&self.diag).map(|(&x, &d)| x / d).collect()
    }

    /// `B v` via one pass over the edges.
    pub fn apply_b(&self, v: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.n];
        for (&(tail, head), &w) in self.edges.iter().zip(&self.weights) {
            out[tail] += w * v[head];
            out[head] += w * v[tail];
        }
        out
    }

    /// `H v = D v - B v`.
    pub fn apply_h(&self, v: &[S]) -> Vec<S> {
        let bv = self.apply_b(v);
        (0..self.n).map(|i| self.diag[i] * v[i] - bv[i]).collect()
    }

    pub fn dense_h(&self) -> SquareMat<S> {
        let mut h = SquareMat::zeros(self.n);
        for i in 0..self.n {
            h.set(i, i, self.diag[i]);
        }
        for (&(tail, head), &w) in self.edges.iter().zip(&self.weights) {
            h.add_at(tail, head, -w);
            h.add_at(head, tail, -w);
        }
        h
    }

    /// Symmetrically normalized off-diagonal part `D^{-1/2} B D^{-1/2}`,
    /// similar to `B D^{-1}`.
    pub fn dense_b_normalized(&self) -> Result<SquareMat<S>> {
        self.check_diag()?;
        let mut m = SquareMat::zeros(self.n);
        for (&(tail, head), &w) in self.edges.iter().zip(&self.weights) {
            let v = w / (self.diag[tail].sqrt() * self.diag[head].sqrt());
            m.add_at(tail, head, v);
            m.add_at(head, tail, v);
        }
        Ok(m)
    }

    /// Dense truncated inverse-Hessian approximation
    /// `sum_{r=0}^{hops} D^{-1/2} (D^{-1/2} B D^{-1/2})^r D^{-1/2}`.
    ///
    /// Used for diagnostics and oracles only; the solver applies the same
    /// operator matrix-free.
    pub fn dense_series_inverse(&self, hops: usize) -> Result<SquareMat<S>> {
        let bsym = self.dense_b_normalized()?;
        let mut acc = SquareMat::identity(self.n);
        let mut power = SquareMat::identity(self.n);
        for _ in 0..hops {
            power = bsym.matmul(&power);
            for i in 0..self.n {
                for j in 0..self.n {
                    acc.add_at(i, j, power.at(i, j));
                }
            }
        }
        let mut out = SquareMat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(
                    i,
                    j,
                    acc.at(i, j) / (self.diag[i].sqrt() * self.diag[j].sqrt()),
                );
            }
        }
        Ok(out)
    }

    fn check_diag(&self) -> Result<()> {
        for (i, &d) in self.diag.iter().enumerate() {
            if d <= S::zero() {
                return Err(Error::DegenerateInstance(format!(
                    "Hessian diagonal entry {i} is not positive ({d})"
                )));
            }
        }
        Ok(())
    }
}

/// Assembles the Hessian splitting at the given prices.
pub fn dual_hessian<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
) -> Result<HessianSplit<S>> {
    let flows = primal_recovery(problem, lambda)?;
    Ok(hessian_from_flows(problem, &flows))
}

pub(crate) fn hessian_from_flows<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    flows: &[S],
) -> HessianSplit<S> {
    let graph = problem.graph();
    let weights: Vec<S> = problem
        .costs()
        .iter()
        .zip(flows)
        .map(|(cost, &xe)| S::one() / cost.deriv2(xe))
        .collect();
    // Node-centric sums in ascending edge order, matching how each node in
    // the message-passing engine accumulates its own diagonal entry.
    let diag: Vec<S> = (0..graph.node_count())
        .map(|i| {
            graph
                .incident_edges(i)
                .iter()
                .map(|inc| weights[inc.edge])
                .sum()
        })
        .collect();
    HessianSplit {
        n: graph.node_count(),
        edges: graph.edges().to_vec(),
        weights,
        diag,
    }
}

/// Spectral quantities behind the stepsize theory: the connectivity
/// coefficient `rho_bar`, the conditioning interval `[m_min, m_max]` of
/// the truncated series inverse on the subspace orthogonal to ones, and
/// the derived guaranteed stepsize `alpha_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDiagnostics<S> {
    /// Second-largest eigenvalue modulus of `B D^{-1}`, in `[0, 1]`.
    pub rho_bar: S,
    /// Smallest eigenvalue of the series inverse restricted to `1-perp`.
    pub m_min: S,
    /// Largest eigenvalue of the series inverse restricted to `1-perp`.
    pub m_max: S,
    /// `2 (1 - sigma) m_min^2 / m_max^2`.
    pub alpha_hat: S,
}

impl<S: Real> SpectralDiagnostics<S> {
    /// True when the instance satisfies the connectivity and conditioning
    /// assumptions the stepsize guarantees rely on. Pathological cases sit
    /// exactly at the boundary, so a small tolerance band keeps rounding
    /// from masking them.
    pub fn well_conditioned(&self) -> bool {
        self.rho_bar < S::one() - sc::<S>(1e-9)
            && self.m_min > sc::<S>(1e-12) * self.m_max.max(S::one())
    }

    /// Upper bound on admissible line-search parameters for the
    /// distributed rule with hop parameter `hops`:
    /// `(1 - rho_bar^(hops + 1)) / 2`.
    pub fn sigma_bound(&self, hops: usize) -> S {
        (S::one() - self.rho_bar.powi(hops as i32 + 1)) / sc::<S>(2.0)
    }
}

/// Computes the spectral diagnostics by dense symmetric eigendecomposition
/// (desk scale). `sigma` must lie in `(0, 1/2)`.
pub fn spectral_diagnostics<S: Real>(
    split: &HessianSplit<S>,
    hops: usize,
    sigma: S,
) -> Result<SpectralDiagnostics<S>> {
    if sigma <= S::zero() || sigma >= sc::<S>(0.5) {
        return Err(Error::InvalidArgument(format!(
            "sigma must lie in (0, 1/2), got {sigma}"
        )));
    }
    split.check_diag()?;
    let n = split.n();

    // rho_bar: deflate the known top eigenpair (value 1, vector D^{1/2} 1)
    // of the normalized off-diagonal part, then take the spectral radius.
    let mut bsym = split.dense_b_normalized()?;
    let mut top: Vec<S> = split.diag().iter().map(|&d| d.sqrt()).collect();
    let norm = linalg::norm2(&top);
    for t in &mut top {
        *t /= norm;
    }
    for i in 0..n {
        for j in 0..n {
            bsym.add_at(i, j, -top[i] * top[j]);
        }
    }
    let deflated = linalg::sym_eigen(&bsym)?;
    let rho_bar = deflated
        .values
        .iter()
        .fold(S::zero(), |m, &v| m.max(v.abs()))
        .min(S::one());

    // m_min, m_max: spectrum of the series inverse compressed to 1-perp.
    let hbar = split.dense_series_inverse(hops)?;
    let basis = linalg::ones_complement_basis::<S>(n);
    let k = n - 1;
    let mut reduced = SquareMat::zeros(k);
    for (a, col_a) in basis.iter().enumerate() {
        let hcol = hbar.matvec(col_a);
        for (b, col_b) in basis.iter().enumerate() {
            reduced.set(b, a, linalg::dot(col_b, &hcol));
        }
    }
    // Symmetrize away the rounding skew before eigendecomposition.
    for a in 0..k {
        for b in (a + 1)..k {
            let avg = (reduced.at(a, b) + reduced.at(b, a)) / sc::<S>(2.0);
            reduced.set(a, b, avg);
            reduced.set(b, a, avg);
        }
    }
    let spectrum = linalg::sym_eigen(&reduced)?;
    let m_min = spectrum.values[0];
    let m_max = spectrum.values[k - 1];
    let alpha_hat = sc::<S>(2.0) * (S::one() - sigma) * m_min * m_min / (m_max * m_max);

    Ok(SpectralDiagnostics {
        rho_bar,
        m_min,
        m_max,
        alpha_hat,
    })
}

fn check_lambda_len<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
) -> Result<()> {
    if lambda.len() != problem.node_count() {
        return Err(Error::InvalidArgument(format!(
            "price vector has length {}, expected {}",
            lambda.len(),
            problem.node_count()
        )));
    }
    Ok(())
}
