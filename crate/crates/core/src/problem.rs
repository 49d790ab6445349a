//! Edge cost models and the primal flow problem.
//!
//! A problem instance pairs a connected directed graph with one strictly
//! convex, twice differentiable cost per edge and a balanced rate vector
//! `b` (sources positive, sinks negative, entries summing to zero so that
//! the conservation constraint `Ax = b` is solvable).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::scalar::{sc, Real};

/// Scalar edge cost model: value, first and second derivative, and the
/// inverse of the first derivative.
pub trait EdgeCost<S: Real>: Clone + Send + Sync {
    fn value(&self, x: S) -> S;
    fn deriv(&self, x: S) -> S;
    fn deriv2(&self, x: S) -> S;
    /// Inverse of [`EdgeCost::deriv`]; total for the models in this crate.
    fn inv_deriv(&self, y: S) -> S;
}

/// Exponential capacity cost `exp(c x) + exp(-c x)`.
///
/// Symmetric around zero with minimum value 2; the coefficient `c` sets
/// how sharply cost grows as flow magnitude approaches the soft capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCapacityCost<S> {
    pub c: S,
}

impl<S: Real> ExpCapacityCost<S> {
    pub fn new(c: S) -> Result<Self> {
        if c <= S::zero() {
            return Err(Error::InvalidArgument(format!(
                "capacity coefficient must be positive, got {c}"
            )));
        }
        Ok(Self { c })
    }

    pub fn unit() -> Self {
        Self { c: S::one() }
    }
}

impl<S: Real> EdgeCost<S> for ExpCapacityCost<S> {
    fn value(&self, x: S) -> S {
        (self.c * x).exp() + (-(self.c * x)).exp()
    }

    fn deriv(&self, x: S) -> S {
        self.c * ((self.c * x).exp() - (-(self.c * x)).exp())
    }

    fn deriv2(&self, x: S) -> S {
        self.c * self.c * ((self.c * x).exp() + (-(self.c * x)).exp())
    }

    fn inv_deriv(&self, y: S) -> S {
        (y / (sc::<S>(2.0) * self.c)).asinh() / self.c
    }
}

/// Quadratic cost `w x^2 / 2`; handy in tests because the induced dual
/// problem is exactly quadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost<S> {
    pub weight: S,
}

impl<S: Real> QuadraticCost<S> {
    pub fn new(weight: S) -> Result<Self> {
        if weight <= S::zero() {
            return Err(Error::InvalidArgument(format!(
                "quadratic weight must be positive, got {weight}"
            )));
        }
        Ok(Self { weight })
    }
}

impl<S: Real> EdgeCost<S> for QuadraticCost<S> {
    fn value(&self, x: S) -> S {
        self.weight * x * x / sc::<S>(2.0)
    }

    fn deriv(&self, x: S) -> S {
        self.weight * x
    }

    fn deriv2(&self, _x: S) -> S {
        self.weight
    }

    fn inv_deriv(&self, y: S) -> S {
        y / self.weight
    }
}

/// Primal instance: graph, per-edge costs, balanced rates.
#[derive(Debug, Clone)]
pub struct FlowProblem<S, C = ExpCapacityCost<S>> {
    graph: DirectedGraph,
    costs: Vec<C>,
    rates: Vec<S>,
}

/// Absolute imbalance tolerated in a rate vector.
const BALANCE_TOL: f64 = 1e-12;

impl<S: Real, C: EdgeCost<S>> FlowProblem<S, C> {
    pub fn new(graph: DirectedGraph, costs: Vec<C>, rates: Vec<S>) -> Result<Self> {
        if costs.len() != graph.edge_count() {
            return Err(Error::InvalidArgument(format!(
                "got {} edge costs for {} edges",
                costs.len(),
                graph.edge_count()
            )));
        }
        if rates.len() != graph.node_count() {
            return Err(Error::InvalidArgument(format!(
                "rate vector has length {}, expected {}",
                rates.len(),
                graph.node_count()
            )));
        }
        let imbalance: S = rates.iter().copied().sum();
        if imbalance.abs() > sc::<S>(BALANCE_TOL) {
            return Err(Error::InvalidArgument(format!(
                "rates must sum to zero, got imbalance {imbalance}"
            )));
        }
        Ok(Self {
            graph,
            costs,
            rates,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn costs(&self) -> &[C] {
        &self.costs
    }

    pub fn cost(&self, edge: usize) -> &C {
        &self.costs[edge]
    }

    pub fn rates(&self) -> &[S] {
        &self.rates
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Total cost `sum_e cost_e(x_e)` of a flow assignment.
    pub fn primal_objective(&self, x: &[S]) -> Result<S> {
        if x.len() != self.edge_count() {
            return Err(Error::InvalidArgument(format!(
                "flow vector has length {}, expected {}",
                x.len(),
                self.edge_count()
            )));
        }
        Ok(self
            .costs
            .iter()
            .zip(x)
            .map(|(cost, &xe)| cost.value(xe))
            .sum())
    }

    /// Conservation residual `A x - b`; its 2-norm is the primal
    /// feasibility metric reported in trajectories.
    pub fn feasibility_residual(&self, x: &[S]) -> Result<Vec<S>> {
        let mut out = self.graph.incidence_apply(x)?;
        for (o, &b) in out.iter_mut().zip(&self.rates) {
            *o -= b;
        }
        Ok(out)
    }
}

impl<S: Real> FlowProblem<S, ExpCapacityCost<S>> {
    /// Instance with the exponential capacity cost on every edge.
    pub fn with_uniform_exp_cost(graph: DirectedGraph, c: S, rates: Vec<S>) -> Result<Self> {
        let cost = ExpCapacityCost::new(c)?;
        let costs = vec![cost; graph.edge_count()];
        Self::new(graph, costs, rates)
    }

    /// Parses the problem text format: the graph format of
    /// [`DirectedGraph::parse_text`] followed by a line `b v0 v1 ... v(n-1)`
    /// and an optional `c <value>` line (capacity coefficient, default 1).
    ///
    /// When the `b` line is absent, `fallback_rates` supplies the rate
    /// vector (the CLI generates a unit source/sink pair in that case).
    pub fn parse_text(text: &str, fallback_rates: Option<Vec<S>>) -> Result<Self> {
        let graph = DirectedGraph::parse_text(text)?;
        let mut rates: Option<Vec<S>> = None;
        let mut c = S::one();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .skip(1 + graph.edge_count())
        {
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some("b") => {
                    let parsed: std::result::Result<Vec<S>, _> = fields
                        .map(|f| {
                            f.parse::<f64>()
                                .map(sc::<S>)
                                .map_err(|_| Error::InvalidArgument(format!("malformed rate `{f}`")))
                        })
                        .collect();
                    rates = Some(parsed?);
                }
                Some("c") => {
                    let field = fields
                        .next()
                        .ok_or_else(|| Error::InvalidArgument("missing value after `c`".into()))?;
                    c = field
                        .parse::<f64>()
                        .map(sc::<S>)
                        .map_err(|_| Error::InvalidArgument(format!("malformed coefficient `{field}`")))?;
                }
                Some(other) => {
                    return Err(Error::InvalidArgument(format!(
                        "unexpected trailing line starting with `{other}`"
                    )));
                }
                None => {}
            }
        }
        let rates = match rates.or(fallback_rates) {
            Some(r) => r,
            None => {
                return Err(Error::InvalidArgument(
                    "problem file has no `b` line and no fallback rates were given".into(),
                ))
            }
        };
        Self::with_uniform_exp_cost(graph, c, rates)
    }

    /// Serializes graph, rates and capacity coefficient to the text format.
    pub fn to_text(&self) -> String {
        let mut out = self.graph.to_text();
        out.push('b');
        for &r in &self.rates {
            let _ = write!(out, " {r}");
        }
        out.push('\n');
        let _ = writeln!(out, "c {}", self.costs[0].c);
        out
    }
}

/// Builds a rate vector from `(node, rate)` source and sink lists; sink
/// rates are given positive and stored negated.
pub fn balanced_rate_vector<S: Real>(
    n: usize,
    sources: &[(usize, S)],
    sinks: &[(usize, S)],
) -> Result<Vec<S>> {
    let mut rates = vec![S::zero(); n];
    for &(node, rate) in sources {
        if node >= n {
            return Err(Error::InvalidArgument(format!(
                "source node {node} out of range"
            )));
        }
        rates[node] += rate;
    }
    for &(node, rate) in sinks {
        if node >= n {
            return Err(Error::InvalidArgument(format!(
                "sink node {node} out of range"
            )));
        }
        rates[node] -= rate;
    }
    let imbalance: S = rates.iter().copied().sum();
    if imbalance.abs() > sc::<S>(BALANCE_TOL) {
        return Err(Error::InvalidArgument(format!(
            "source and sink rates differ by {imbalance}"
        )));
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn two_node_problem() -> FlowProblem<f64> {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        FlowProblem::with_uniform_exp_cost(g, 1.0, vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn exp_cost_closed_forms() {
        let cost = ExpCapacityCost::<f64>::unit();
        assert_eq!(cost.value(0.0), 2.0);
        assert!(close(cost.value(1.0), 1f64.exp() + (-1f64).exp(), 1e-15));
        assert!(close(cost.deriv(1.0), 2.0 * 1f64.sinh(), 1e-15));
        assert!(close(cost.deriv2(1.0), 2.0 * 1f64.cosh(), 1e-15));
        assert!(ExpCapacityCost::<f64>::new(0.0).is_err());
    }

    #[test]
    fn exp_cost_second_derivative_is_bounded_below() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c = 0.7;
        let cost = ExpCapacityCost::new(c).unwrap();
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-10.0..10.0);
            assert!(cost.deriv2(x) >= 2.0 * c * c - 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let cost = ExpCapacityCost::new(1.3f64).unwrap();
        let h = 1e-6;
        let mut x = -5.0;
        while x <= 5.0 {
            let fd1 = (cost.value(x + h) - cost.value(x - h)) / (2.0 * h);
            let fd2 = (cost.deriv(x + h) - cost.deriv(x - h)) / (2.0 * h);
            let scale1 = cost.deriv(x).abs().max(1.0);
            let scale2 = cost.deriv2(x).abs().max(1.0);
            assert!((fd1 - cost.deriv(x)).abs() <= 1e-6 * scale1);
            assert!((fd2 - cost.deriv2(x)).abs() <= 1e-6 * scale2);
            x += 0.25;
        }
    }

    #[test]
    fn inverse_derivative_round_trips() {
        let cost = ExpCapacityCost::new(2.0f64).unwrap();
        let mut x = -5.0;
        while x <= 5.0 {
            assert!(close(cost.inv_deriv(cost.deriv(x)), x, 1e-10));
            x += 0.125;
        }
    }

    #[test]
    fn quadratic_cost_basics() {
        let cost = QuadraticCost::new(2.0f64).unwrap();
        assert_eq!(cost.value(3.0), 9.0);
        assert_eq!(cost.deriv(3.0), 6.0);
        assert_eq!(cost.deriv2(3.0), 2.0);
        assert_eq!(cost.inv_deriv(6.0), 3.0);
    }

    #[test]
    fn primal_objective_examples() {
        let p = two_node_problem();
        assert_eq!(p.primal_objective(&[0.0]).unwrap(), 2.0);
        assert!(close(
            p.primal_objective(&[1.0]).unwrap(),
            1f64.exp() + (-1f64).exp(),
            1e-12
        ));
        assert!(p.primal_objective(&[1.0, 2.0]).is_err());

        let g = DirectedGraph::random_connected(6, 9, 1).unwrap();
        let e = g.edge_count();
        let p = FlowProblem::with_uniform_exp_cost(g, 1.0, vec![0.0; 6]).unwrap();
        assert_eq!(p.primal_objective(&vec![0.0; e]).unwrap(), 2.0 * e as f64);
        // Strict convexity: any nonzero flow costs strictly more than zero flow.
        assert!(p.primal_objective(&vec![0.3; e]).unwrap() > 2.0 * e as f64);
    }

    #[test]
    fn feasibility_residual_examples() {
        let p = two_node_problem();
        assert_eq!(p.feasibility_residual(&[1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.feasibility_residual(&[0.0]).unwrap(), vec![-1.0, 1.0]);

        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let p: FlowProblem<f64> =
            FlowProblem::with_uniform_exp_cost(g, 1.0, vec![1.0, 0.0, -1.0]).unwrap();
        let r = p
            .feasibility_residual(&[2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0])
            .unwrap();
        assert!(r.iter().all(|&v| v.abs() <= 1e-15));
    }

    #[test]
    fn balanced_rate_vector_examples() {
        assert_eq!(
            balanced_rate_vector(2, &[(0, 1.0)], &[(1, 1.0)]).unwrap(),
            vec![1.0, -1.0]
        );
        assert_eq!(balanced_rate_vector::<f64>(3, &[], &[]).unwrap(), vec![0.0; 3]);
        assert_eq!(
            balanced_rate_vector(5, &[(0, 2.0)], &[(3, 1.0), (4, 1.0)]).unwrap(),
            vec![2.0, 0.0, 0.0, -1.0, -1.0]
        );
        assert!(balanced_rate_vector(2, &[(0, 2.0)], &[(1, 1.0)]).is_err());
        assert!(balanced_rate_vector(2, &[(5, 1.0)], &[(1, 1.0)]).is_err());
    }

    #[test]
    fn problem_construction_validates_shapes_and_balance() {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        assert!(FlowProblem::with_uniform_exp_cost(g.clone(), 1.0, vec![1.0, -0.5]).is_err());
        assert!(FlowProblem::with_uniform_exp_cost(g.clone(), 1.0, vec![1.0]).is_err());
        assert!(FlowProblem::<f64>::new(g, vec![], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn problem_text_round_trip() {
        let g = DirectedGraph::random_connected(5, 7, 9).unwrap();
        let rates = balanced_rate_vector(5, &[(0, 2.0)], &[(3, 1.0), (4, 1.0)]).unwrap();
        let p = FlowProblem::with_uniform_exp_cost(g, 1.5, rates).unwrap();
        let q = FlowProblem::<f64>::parse_text(&p.to_text(), None).unwrap();
        assert_eq!(q.graph(), p.graph());
        assert_eq!(q.rates(), p.rates());
        assert_eq!(q.cost(0).c, 1.5);

        assert!(FlowProblem::<f64>::parse_text("2 1\n0 1\n", None).is_err());
        let fallback = FlowProblem::<f64>::parse_text("2 1\n0 1\n", Some(vec![1.0, -1.0])).unwrap();
        assert_eq!(fallback.rates(), &[1.0, -1.0]);
        assert!(FlowProblem::<f64>::parse_text("2 1\n0 1\nb 1 -1\nz 3\n", None).is_err());
    }

    proptest! {
        #[test]
        fn inverse_derivative_is_left_inverse_for_random_coefficients(
            c in 0.2f64..3.0,
            x in -5.0f64..5.0,
        ) {
            let cost = ExpCapacityCost::new(c).unwrap();
            prop_assert!((cost.inv_deriv(cost.deriv(x)) - x).abs() <= 1e-10);
        }
    }
}
