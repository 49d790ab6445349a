//! Backtracking line searches over the dual objective.
//!
//! The centralized search halves the step until the Armijo inequality
//! `q(lambda + alpha d) <= q(lambda) + sigma alpha d'g` holds for the full
//! direction `d`.
//!
//! The distributed search gives every node its own backtracking loop built
//! from hop-local information only. Node `i` forms the hypothetical update
//! it can compute by itself, `u = add_direction_restricted(...)` (the
//! series recursion compressed onto its hop neighborhood), and accepts a
//! step `alpha_i` once
//!
//! `q(lambda + alpha u) - q(lambda) <= sigma alpha sum_{j in hood} u_j g_j`.
//!
//! Both sides are computable within a bounded radius of `i`: the update
//! moves prices only inside the neighborhood, so dual shares change only
//! up to one hop beyond it, and the right-hand inner product is a negated
//! positive-semidefinite form of the gradient restricted to the
//! neighborhood (hence never positive). The network then agrees on
//! `alpha = min_i alpha_i` and applies it to the true direction.

use crate::direction::add_direction_restricted;
use crate::dual::{self, HessianSplit, SpectralDiagnostics};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Neighborhood};
use crate::linalg;
use crate::problem::{EdgeCost, FlowProblem};
use crate::scalar::{sc, Real};

/// Absolute slack applied to the acceptance inequality so rounding noise
/// at an exact Armijo boundary cannot force a spurious backtrack.
pub const ARMIJO_SLACK: f64 = 1e-12;

/// Parameters shared by both search variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams<S> {
    /// Armijo sufficient-decrease parameter, in (0, 1/2).
    pub sigma: S,
    /// Backtracking factor, in (0, 1).
    pub beta: S,
    /// Safety cap on backtracks per search (the step underflows long
    /// before 60 halvings).
    pub max_backtracks: u32,
    /// Hop parameter of the distributed rule.
    pub hops: usize,
}

impl<S: Real> LineSearchParams<S> {
    pub fn new(sigma: S, beta: S, hops: usize) -> Self {
        Self {
            sigma,
            beta,
            max_backtracks: 60,
            hops,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma <= S::zero() || self.sigma >= sc::<S>(0.5) {
            return Err(Error::InvalidArgument(format!(
                "sigma must lie in (0, 1/2), got {}",
                self.sigma
            )));
        }
        if self.beta <= S::zero() || self.beta >= S::one() {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// The distributed rule additionally wants
    /// `sigma < (1 - rho_bar^(hops+1)) / 2`; measured violations are worth
    /// a warning but the search itself stays well defined.
    pub fn sigma_within_distributed_bound(&self, diagnostics: &SpectralDiagnostics<S>) -> bool {
        self.sigma < diagnostics.sigma_bound(self.hops)
    }
}

impl<S: Real> Default for LineSearchParams<S> {
    fn default() -> Self {
        Self::new(sc(0.1), sc(0.5), 1)
    }
}

/// What a node can see: its hop neighborhood (radius = hop parameter) and
/// the one-hop-larger ball on which its trial evaluations live.
#[derive(Debug, Clone)]
pub struct NodeScope {
    pub hood: Neighborhood,
    pub ball: Neighborhood,
}

/// Precomputes every node's scope for the given hop parameter.
pub fn node_scopes(graph: &DirectedGraph, hops: usize) -> Result<Vec<NodeScope>> {
    (0..graph.node_count())
        .map(|i| {
            Ok(NodeScope {
                hood: graph.neighborhood(i, hops)?,
                ball: graph.neighborhood(i, hops + 1)?,
            })
        })
        .collect()
}

/// Result of a line search, with the final inequality sides kept for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome<S> {
    pub alpha: S,
    /// Rejected trials before acceptance; for the distributed search, the
    /// count at the node whose step bound the consensus minimum.
    pub backtrack_count: u32,
    /// Per-node accepted steps (distributed search only).
    pub per_node_alphas: Option<Vec<S>>,
    pub armijo_lhs: S,
    pub armijo_rhs: S,
}

/// Result of one node's local backtracking loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearch<S> {
    pub alpha: S,
    pub backtracks: u32,
    pub armijo_lhs: S,
    pub armijo_rhs: S,
    /// The hypothetical update the node tested (support inside its hood).
    pub update: Vec<S>,
}

/// Centralized Armijo backtracking: starts at `alpha = 1` and multiplies
/// by `beta` until acceptance. A zero direction accepts `alpha = 1`
/// immediately (the inequality holds with equality).
pub fn centralized_backtracking<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    direction: &[S],
    gradient: &[S],
    params: &LineSearchParams<S>,
) -> Result<LineSearchOutcome<S>> {
    params.validate()?;
    let base = dual::dual_value(problem, lambda)?;
    let slope = linalg::dot(direction, gradient);
    if direction.iter().all(|&d| d == S::zero()) {
        return Ok(LineSearchOutcome {
            alpha: S::one(),
            backtrack_count: 0,
            per_node_alphas: None,
            armijo_lhs: base,
            armijo_rhs: base,
        });
    }
    if slope > S::zero() {
        return Err(Error::PreconditionViolation(format!(
            "not a descent direction (d'g = {slope})"
        )));
    }

    let slack = sc::<S>(ARMIJO_SLACK);
    let mut alpha = S::one();
    let mut backtracks = 0u32;
    loop {
        let trial = linalg::add_scaled(lambda, alpha, direction);
        let lhs = dual::dual_value(problem, &trial)?;
        let rhs = base + params.sigma * alpha * slope;
        if lhs <= rhs + slack {
            return Ok(LineSearchOutcome {
                alpha,
                backtrack_count: backtracks,
                per_node_alphas: None,
                armijo_lhs: lhs,
                armijo_rhs: rhs,
            });
        }
        if backtracks >= params.max_backtracks {
            return Err(Error::LineSearchFailure {
                backtracks,
                node: None,
                lhs: lhs.to_f64().unwrap_or(f64::NAN),
                rhs: rhs.to_f64().unwrap_or(f64::NAN),
            });
        }
        alpha *= params.beta;
        backtracks += 1;
    }
}

/// Right-hand-side inner product of the hop-local Armijo rule:
/// `sum over j in the neighborhood of d_j g_j`.
pub fn local_armijo_rhs_sum<S: Real>(direction: &[S], gradient: &[S], hood: &Neighborhood) -> S {
    hood.members()
        .iter()
        .map(|&j| direction[j] * gradient[j])
        .sum()
}

/// One node's backtracking loop against the dual change of its own
/// hop-local hypothetical update.
///
/// All inputs the node consumes live within `params.hops + 2` hops of it:
/// the neighborhood gradient and edge weights define the update, and the
/// trial evaluation touches dual shares up to one hop beyond the
/// neighborhood (whose flows reach one hop further still).
pub fn local_backtracking<S: Real, C: EdgeCost<S>>(
    node: usize,
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    split: &HessianSplit<S>,
    gradient: &[S],
    params: &LineSearchParams<S>,
) -> Result<LocalSearch<S>> {
    params.validate()?;
    let scope = NodeScope {
        hood: problem.graph().neighborhood(node, params.hops)?,
        ball: problem.graph().neighborhood(node, params.hops + 1)?,
    };
    local_backtracking_in(node, problem, lambda, split, gradient, &scope, params)
}

pub(crate) fn local_backtracking_in<S: Real, C: EdgeCost<S>>(
    node: usize,
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    split: &HessianSplit<S>,
    gradient: &[S],
    scope: &NodeScope,
    params: &LineSearchParams<S>,
) -> Result<LocalSearch<S>> {
    let update = add_direction_restricted(split, gradient, &scope.hood)?;
    let rhs_sum = local_armijo_rhs_sum(&update, gradient, &scope.hood);
    let base = ball_share_sum(problem, lambda, &update, S::zero(), &scope.ball);
    let slack = sc::<S>(ARMIJO_SLACK);

    if update.iter().all(|&u| u == S::zero()) {
        return Ok(LocalSearch {
            alpha: S::one(),
            backtracks: 0,
            armijo_lhs: base,
            armijo_rhs: base,
            update,
        });
    }

    let mut alpha = S::one();
    let mut backtracks = 0u32;
    loop {
        let lhs = ball_share_sum(problem, lambda, &update, alpha, &scope.ball);
        let rhs = base + params.sigma * alpha * rhs_sum;
        if lhs <= rhs + slack {
            return Ok(LocalSearch {
                alpha,
                backtracks,
                armijo_lhs: lhs,
                armijo_rhs: rhs,
                update,
            });
        }
        if backtracks >= params.max_backtracks {
            return Err(Error::LineSearchFailure {
                backtracks,
                node: Some(node),
                lhs: lhs.to_f64().unwrap_or(f64::NAN),
                rhs: rhs.to_f64().unwrap_or(f64::NAN),
            });
        }
        alpha *= params.beta;
        backtracks += 1;
    }
}

/// Sum of dual shares over the ball at the trial point
/// `lambda + alpha * update`.
///
/// The update's support is the inner neighborhood, so shares outside the
/// ball are unchanged by the trial and this sum tracks the change of the
/// full dual objective exactly.
pub(crate) fn ball_share_sum<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    update: &[S],
    alpha: S,
    ball: &Neighborhood,
) -> S {
    ball.members()
        .iter()
        .map(|&j| share_at_trial(problem, lambda, update, alpha, j))
        .sum()
}

/// A node's dual share evaluated at `lambda + alpha * update`.
pub(crate) fn share_at_trial<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    update: &[S],
    alpha: S,
    node: usize,
) -> S {
    let graph = problem.graph();
    let own = lambda[node] + alpha * update[node];
    let mut cost_in = S::zero();
    let mut divergence = S::zero();
    for inc in graph.incident_edges(node) {
        let other = lambda[inc.other] + alpha * update[inc.other];
        let diff = if inc.leaves { own - other } else { other - own };
        let flow = problem.cost(inc.edge).inv_deriv(diff);
        if inc.leaves {
            divergence += flow;
        } else {
            divergence -= flow;
            cost_in += problem.cost(inc.edge).value(flow);
        }
    }
    -cost_in + own * (divergence - problem.rates()[node])
}

/// Exact minimum of the per-node steps (the network-wide consensus value).
pub fn consensus_stepsize<S: Real>(per_node_alphas: &[S]) -> Result<S> {
    if per_node_alphas.is_empty() {
        return Err(Error::InvalidArgument(
            "consensus over an empty stepsize list".into(),
        ));
    }
    Ok(per_node_alphas
        .iter()
        .copied()
        .fold(S::infinity(), |m, a| m.min(a)))
}

/// Full distributed search: per-node backtracking followed by the
/// min-consensus. `scopes` must come from [`node_scopes`] at
/// `params.hops`.
pub fn distributed_backtracking<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: &[S],
    split: &HessianSplit<S>,
    gradient: &[S],
    scopes: &[NodeScope],
    params: &LineSearchParams<S>,
) -> Result<LineSearchOutcome<S>> {
    params.validate()?;
    let n = problem.node_count();
    debug_assert_eq!(scopes.len(), n);
    let mut alphas = Vec::with_capacity(n);
    let mut searches = Vec::with_capacity(n);
    for (node, scope) in scopes.iter().enumerate() {
        let local =
            local_backtracking_in(node, problem, lambda, split, gradient, scope, params)?;
        alphas.push(local.alpha);
        searches.push(local);
    }
    let alpha = consensus_stepsize(&alphas)?;
    let binding = searches
        .iter()
        .find(|s| s.alpha == alpha)
        .expect("the minimum comes from some node");
    Ok(LineSearchOutcome {
        alpha,
        backtrack_count: binding.backtracks,
        per_node_alphas: Some(alphas),
        armijo_lhs: binding.armijo_lhs,
        armijo_rhs: binding.armijo_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::{add_direction, exact_newton_direction, DirectionRequest};
    use crate::dual::{dual_gradient, dual_hessian, dual_value};
    use crate::graph::DirectedGraph;
    use crate::problem::FlowProblem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_node() -> FlowProblem<f64> {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        FlowProblem::with_uniform_exp_cost(g, 1.0, vec![1.0, -1.0]).unwrap()
    }

    fn three_cycle() -> FlowProblem<f64> {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        FlowProblem::with_uniform_exp_cost(g, 1.0, vec![1.0, 0.0, -1.0]).unwrap()
    }

    fn random_instance(n: usize, edges: usize, seed: u64) -> FlowProblem<f64> {
        let g = DirectedGraph::random_connected(n, edges, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
        let mut rates: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = rates.iter().sum::<f64>() / n as f64;
        for r in &mut rates {
            *r -= mean;
        }
        let correction: f64 = rates.iter().sum();
        rates[0] -= correction;
        FlowProblem::with_uniform_exp_cost(g, 1.0, rates).unwrap()
    }

    /// Scans alpha = beta^k directly against the full Armijo inequality.
    fn brute_force_centralized(
        problem: &FlowProblem<f64>,
        lambda: &[f64],
        d: &[f64],
        g: &[f64],
        sigma: f64,
        beta: f64,
    ) -> (f64, u32) {
        let base = dual_value(problem, lambda).unwrap();
        let slope = linalg::dot(d, g);
        let mut alpha = 1.0;
        let mut k = 0;
        loop {
            let trial = linalg::add_scaled(lambda, alpha, d);
            if dual_value(problem, &trial).unwrap() <= base + sigma * alpha * slope + ARMIJO_SLACK {
                return (alpha, k);
            }
            alpha *= beta;
            k += 1;
            assert!(k < 100, "brute force scan runaway");
        }
    }

    #[test]
    fn zero_direction_accepts_unit_step() {
        let p = two_node();
        let params = LineSearchParams::default();
        let out =
            centralized_backtracking(&p, &[0.3, -0.3], &[0.0, 0.0], &[0.1, -0.1], &params).unwrap();
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.backtrack_count, 0);

        // A node that sees no gradient hypothesizes no update and
        // accepts the unit step immediately.
        let optimum = [2.0 * 1f64.sinh(), 0.0];
        let split = dual_hessian(&p, &optimum).unwrap();
        let g = dual_gradient(&p, &optimum).unwrap();
        let local = local_backtracking(0, &p, &optimum, &split, &g, &params).unwrap();
        assert_eq!(local.alpha, 1.0);
        assert_eq!(local.backtracks, 0);
        assert!(local.update.iter().all(|&u| u.abs() <= 1e-12));
    }

    #[test]
    fn centralized_matches_brute_force_scan() {
        let p = two_node();
        let lambda = [0.0, 0.0];
        let g = dual_gradient(&p, &lambda).unwrap();
        let split = dual_hessian(&p, &lambda).unwrap();
        let d = exact_newton_direction(&split, &g).unwrap();
        let params = LineSearchParams::new(0.1, 0.5, 1);
        let out = centralized_backtracking(&p, &lambda, &d, &g, &params).unwrap();
        let (alpha, k) = brute_force_centralized(&p, &lambda, &d, &g, 0.1, 0.5);
        assert_eq!(out.alpha, alpha);
        assert_eq!(out.backtrack_count, k);

        // Far from the optimum the Newton step overshoots and must backtrack.
        let lambda = [10.0, 0.0];
        let g = dual_gradient(&p, &lambda).unwrap();
        let split = dual_hessian(&p, &lambda).unwrap();
        let d = exact_newton_direction(&split, &g).unwrap();
        let out = centralized_backtracking(&p, &lambda, &d, &g, &params).unwrap();
        let (alpha, k) = brute_force_centralized(&p, &lambda, &d, &g, 0.1, 0.5);
        assert!(k >= 1);
        assert_eq!(out.alpha, alpha);
        assert_eq!(out.backtrack_count, k);
    }

    #[test]
    fn accepted_step_strictly_decreases_the_dual_value() {
        for seed in 0..10 {
            let p = random_instance(8, 14, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let lambda: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = dual_gradient(&p, &lambda).unwrap();
            if linalg::norm2(&g) <= 1e-10 {
                continue;
            }
            let split = dual_hessian(&p, &lambda).unwrap();
            let d = add_direction(&DirectionRequest {
                split: &split,
                gradient: &g,
                hops: 1,
            })
            .unwrap();
            let params = LineSearchParams::new(0.1, 0.5, 1);
            let out = centralized_backtracking(&p, &lambda, &d, &g, &params).unwrap();
            let stepped = linalg::add_scaled(&lambda, out.alpha, &d);
            assert!(dual_value(&p, &stepped).unwrap() < dual_value(&p, &lambda).unwrap());
        }
    }

    #[test]
    fn exhausted_backtracks_report_failure() {
        let p = two_node();
        let lambda = [10.0, 0.0];
        let g = dual_gradient(&p, &lambda).unwrap();
        let split = dual_hessian(&p, &lambda).unwrap();
        let d = exact_newton_direction(&split, &g).unwrap();
        let mut params = LineSearchParams::new(0.1, 0.5, 1);
        params.max_backtracks = 0;
        match centralized_backtracking(&p, &lambda, &d, &g, &params) {
            Err(Error::LineSearchFailure { backtracks, .. }) => assert_eq!(backtracks, 0),
            other => panic!("expected line search failure, got {other:?}"),
        }
    }

    #[test]
    fn ascent_directions_are_rejected() {
        let p = two_node();
        let lambda = [0.0, 0.0];
        let g = dual_gradient(&p, &lambda).unwrap();
        let d: Vec<f64> = g.clone();
        let params = LineSearchParams::default();
        assert!(matches!(
            centralized_backtracking(&p, &lambda, &d, &g, &params),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn rhs_sum_examples() {
        let p = three_cycle();
        let g = [-1.0f64, 0.0, 1.0];
        let d = [0.5f64, 0.0, -0.5];
        for node in 0..3 {
            let hood = p.graph().neighborhood(node, 1).unwrap();
            assert!((local_armijo_rhs_sum(&d, &g, &hood) + 1.0).abs() <= 1e-15);
        }
        let hood = p.graph().neighborhood(0, 1).unwrap();
        let minus_g = [1.0f64, 0.0, -1.0];
        assert!((local_armijo_rhs_sum(&minus_g, &g, &hood) + 2.0).abs() <= 1e-15);
    }

    #[test]
    fn rhs_sum_is_never_positive_for_restricted_updates() {
        for seed in 0..10 {
            let p = random_instance(9, 16, seed + 30);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 31);
            let lambda: Vec<f64> = (0..9).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let g = dual_gradient(&p, &lambda).unwrap();
            let split = dual_hessian(&p, &lambda).unwrap();
            for hops in 1..=3usize {
                for node in 0..9 {
                    let hood = p.graph().neighborhood(node, hops).unwrap();
                    let update = add_direction_restricted(&split, &g, &hood).unwrap();
                    assert!(local_armijo_rhs_sum(&update, &g, &hood) <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn ball_share_sum_tracks_the_global_dual_change() {
        let p = random_instance(12, 30, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let lambda: Vec<f64> = (0..12).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let g = dual_gradient(&p, &lambda).unwrap();
        let split = dual_hessian(&p, &lambda).unwrap();
        for node in 0..12 {
            let hood = p.graph().neighborhood(node, 1).unwrap();
            let ball = p.graph().neighborhood(node, 2).unwrap();
            let update = add_direction_restricted(&split, &g, &hood).unwrap();
            for &alpha in &[1.0, 0.5, 0.25] {
                let local_delta = ball_share_sum(&p, &lambda, &update, alpha, &ball)
                    - ball_share_sum(&p, &lambda, &update, 0.0, &ball);
                let trial = linalg::add_scaled(&lambda, alpha, &update);
                let global_delta =
                    dual_value(&p, &trial).unwrap() - dual_value(&p, &lambda).unwrap();
                assert!((local_delta - global_delta).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn local_search_matches_per_node_brute_force() {
        let p = three_cycle();
        let lambda = [0.4, -0.1, -0.3];
        let g = dual_gradient(&p, &lambda).unwrap();
        let split = dual_hessian(&p, &lambda).unwrap();
        let params = LineSearchParams::new(0.1, 0.5, 1);
        for node in 0..3 {
            let hood = p.graph().neighborhood(node, 1).unwrap();
            let ball = p.graph().neighborhood(node, 2).unwrap();
            let update = add_direction_restricted(&split, &g, &hood).unwrap();
            let rhs_sum = local_armijo_rhs_sum(&update, &g, &hood);
            let base = ball_share_sum(&p, &lambda, &update, 0.0, &ball);
            let mut alpha = 1.0;
            let mut k = 0u32;
            loop {
                let lhs = ball_share_sum(&p, &lambda, &update, alpha, &ball);
                if lhs <= base + 0.1 * alpha * rhs_sum + ARMIJO_SLACK {
                    break;
                }
                alpha *= 0.5;
                k += 1;
            }
            let local = local_backtracking(node, &p, &lambda, &split, &g, &params).unwrap();
            assert_eq!(local.alpha, alpha);
            assert_eq!(local.backtracks, k);
            assert_eq!(local.update, update);
        }
    }

    #[test]
    fn smaller_steps_keep_satisfying_the_local_rule() {
        for seed in 0..10 {
            let p = random_instance(10, 18, seed + 500);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 501);
            let lambda: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = dual_gradient(&p, &lambda).unwrap();
            let split = dual_hessian(&p, &lambda).unwrap();
            let params = LineSearchParams::new(0.1, 0.5, 1);
            for node in 0..10 {
                let hood = p.graph().neighborhood(node, 1).unwrap();
                let ball = p.graph().neighborhood(node, 2).unwrap();
                let local = local_backtracking(node, &p, &lambda, &split, &g, &params).unwrap();
                let smaller = local.alpha * params.beta;
                let rhs_sum = local_armijo_rhs_sum(&local.update, &g, &hood);
                let base = ball_share_sum(&p, &lambda, &local.update, 0.0, &ball);
                let lhs = ball_share_sum(&p, &lambda, &local.update, smaller, &ball);
                assert!(lhs <= base + 0.1 * smaller * rhs_sum + ARMIJO_SLACK);
            }
        }
    }

    #[test]
    fn trial_evaluation_reads_only_bounded_radius_state() {
        let p = random_instance(14, 20, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let lambda: Vec<f64> = (0..14).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = dual_gradient(&p, &lambda).unwrap();
        let split = dual_hessian(&p, &lambda).unwrap();
        let params = LineSearchParams::new(0.1, 0.5, 1);
        for node in 0..14 {
            let clean = local_backtracking(node, &p, &lambda, &split, &g, &params).unwrap();
            // Poison everything beyond hops + 2: prices and gradient there
            // must be invisible to the node's search.
            let reach = p.graph().neighborhood(node, params.hops + 2).unwrap();
            let mut bad_lambda = lambda.clone();
            let mut bad_g = g.clone();
            for far in (0..14).filter(|j| !reach.contains(*j)) {
                bad_lambda[far] = f64::NAN;
                bad_g[far] = f64::NAN;
            }
            let poisoned =
                local_backtracking(node, &p, &bad_lambda, &split, &bad_g, &params).unwrap();
            assert_eq!(poisoned.alpha, clean.alpha);
            assert_eq!(poisoned.backtracks, clean.backtracks);
        }
    }

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus_stepsize(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(consensus_stepsize(&[1.0, 0.5, 0.25]).unwrap(), 0.25);
        assert!(consensus_stepsize::<f64>(&[]).is_err());
    }

    #[test]
    fn consensus_step_satisfies_every_local_rule_and_decreases_every_view() {
        for seed in 0..10 {
            let p = random_instance(9, 15, seed + 600);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 601);
            let lambda: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = dual_gradient(&p, &lambda).unwrap();
            let split = dual_hessian(&p, &lambda).unwrap();
            let params = LineSearchParams::new(0.1, 0.5, 1);
            let scopes = node_scopes(p.graph(), 1).unwrap();
            let out =
                distributed_backtracking(&p, &lambda, &split, &g, &scopes, &params).unwrap();
            let alphas = out.per_node_alphas.as_ref().unwrap();
            assert_eq!(out.alpha, consensus_stepsize(alphas).unwrap());

            for node in 0..9 {
                let scope = &scopes[node];
                let update = add_direction_restricted(&split, &g, &scope.hood).unwrap();
                let rhs_sum = local_armijo_rhs_sum(&update, &g, &scope.hood);
                let base = ball_share_sum(&p, &lambda, &update, 0.0, &scope.ball);
                let lhs = ball_share_sum(&p, &lambda, &update, out.alpha, &scope.ball);
                assert!(lhs <= base + params.sigma * out.alpha * rhs_sum + ARMIJO_SLACK);
                // Every node's view of the objective improves.
                assert!(lhs - base <= 1e-12);
            }
        }
    }

    #[test]
    fn guaranteed_step_satisfies_every_local_rule_along_runs() {
        let sigma = 0.1;
        let hops = 1;
        let params = LineSearchParams::new(sigma, 0.5, hops);
        for seed in 0..5 {
            let p = random_instance(12, 40, seed + 700);
            let scopes = node_scopes(p.graph(), hops).unwrap();
            let mut lambda = vec![0.0; 12];
            for _ in 0..8 {
                let g = dual_gradient(&p, &lambda).unwrap();
                if linalg::norm2(&g) <= 1e-10 {
                    break;
                }
                let split = dual_hessian(&p, &lambda).unwrap();
                let diag = dual::spectral_diagnostics(&split, hops, sigma).unwrap();
                assert!(diag.well_conditioned());
                for node in 0..12 {
                    let scope = &scopes[node];
                    let update = add_direction_restricted(&split, &g, &scope.hood).unwrap();
                    let rhs_sum = local_armijo_rhs_sum(&update, &g, &scope.hood);
                    let base = ball_share_sum(&p, &lambda, &update, 0.0, &scope.ball);
                    let lhs = ball_share_sum(&p, &lambda, &update, diag.alpha_hat, &scope.ball);
                    assert!(lhs <= base + sigma * diag.alpha_hat * rhs_sum + ARMIJO_SLACK);
                }
                let d = add_direction(&DirectionRequest {
                    split: &split,
                    gradient: &g,
                    hops,
                })
                .unwrap();
                let out =
                    distributed_backtracking(&p, &lambda, &split, &g, &scopes, &params).unwrap();
                lambda = linalg::add_scaled(&lambda, out.alpha, &d);
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let p = two_node();
        let bad_sigma = LineSearchParams::new(0.7, 0.5, 1);
        assert!(centralized_backtracking(&p, &[0.0; 2], &[0.0; 2], &[0.0; 2], &bad_sigma).is_err());
        let bad_beta = LineSearchParams::new(0.1, 1.5, 1);
        assert!(centralized_backtracking(&p, &[0.0; 2], &[0.0; 2], &[0.0; 2], &bad_beta).is_err());
    }
}
