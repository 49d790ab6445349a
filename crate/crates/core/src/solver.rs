//! Outer dual-descent loop with trajectory capture.
//!
//! Three modes: plain negated-gradient steps with a fixed stepsize, the
//! truncated-series direction with the centralized Armijo backtracking,
//! and the same direction with the distributed per-node search plus
//! min-consensus (either the in-memory fast path or routed through the
//! message-passing engine iteration by iteration).

use crate::direction::{add_direction, subgradient_direction, DirectionRequest};
use crate::dual::{self, DualState, SpectralDiagnostics};
use crate::error::{Error, Result};
use crate::linalg;
use crate::linesearch::{
    centralized_backtracking, distributed_backtracking, node_scopes, LineSearchParams,
};
use crate::problem::{EdgeCost, FlowProblem};
use crate::scalar::{sc, Real};
use crate::simnet;

/// Descent mode. The CLI names map one to one:
/// `subgradient-fixed`, `addn-centralized-ls`, `addn-distributed-ls`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    SubgradientFixed,
    CentralizedLineSearch,
    DistributedLineSearch,
}

impl SolverMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "subgradient-fixed" => Ok(Self::SubgradientFixed),
            "addn-centralized-ls" => Ok(Self::CentralizedLineSearch),
            "addn-distributed-ls" => Ok(Self::DistributedLineSearch),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (expected subgradient-fixed, \
                 addn-centralized-ls or addn-distributed-ls)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SubgradientFixed => "subgradient-fixed",
            Self::CentralizedLineSearch => "addn-centralized-ls",
            Self::DistributedLineSearch => "addn-distributed-ls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<S> {
    pub mode: SolverMode,
    /// Hop parameter of the direction series and the distributed search.
    pub hops: usize,
    pub sigma: S,
    pub beta: S,
    pub max_backtracks: u32,
    /// Stepsize of the fixed-step baseline mode.
    pub fixed_step: S,
    /// Stopping threshold on the max-norm of the gradient.
    pub grad_tol: S,
    pub max_iter: usize,
    /// Recorded in outputs for reproducibility; the solver itself draws
    /// no random numbers.
    pub seed: u64,
    /// Route every distributed iteration through the message-passing
    /// engine instead of the in-memory fast path.
    pub use_simulator: bool,
    /// Recompute the spectral diagnostics at every iterate (costly); by
    /// default they are measured once at the start.
    pub recompute_spectral: bool,
}

impl<S: Real> Default for SolverConfig<S> {
    fn default() -> Self {
        Self {
            mode: SolverMode::DistributedLineSearch,
            hops: 1,
            sigma: sc(0.1),
            beta: sc(0.5),
            max_backtracks: 60,
            fixed_step: sc(1e-2),
            grad_tol: sc(1e-8),
            max_iter: 500,
            seed: 0,
            use_simulator: false,
            recompute_spectral: false,
        }
    }
}

impl<S: Real> SolverConfig<S> {
    fn validate(&self) -> Result<()> {
        if self.grad_tol <= S::zero() {
            return Err(Error::InvalidArgument(format!(
                "gradient tolerance must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        match self.mode {
            SolverMode::SubgradientFixed => {
                if self.fixed_step <= S::zero() {
                    return Err(Error::InvalidArgument(format!(
                        "fixed step must be positive, got {}",
                        self.fixed_step
                    )));
                }
            }
            SolverMode::CentralizedLineSearch => {
                self.line_search_params().validate()?;
            }
            SolverMode::DistributedLineSearch => {
                self.line_search_params().validate()?;
                if self.hops == 0 {
                    return Err(Error::InvalidArgument(
                        "distributed mode needs a hop parameter of at least 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn line_search_params(&self) -> LineSearchParams<S> {
        LineSearchParams {
            sigma: self.sigma,
            beta: self.beta,
            max_backtracks: self.max_backtracks,
            hops: self.hops,
        }
    }
}

/// One trajectory row. `alpha` is `None` on the terminal row, which
/// records the state the run stopped at without taking a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<S> {
    pub k: usize,
    pub dual_value: S,
    pub primal_value: S,
    pub feasibility_norm: S,
    pub alpha: Option<S>,
    pub grad_norm: S,
    pub backtracks: u32,
    pub rounds: usize,
    pub messages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max-iter",
            Self::LineSearchFailure => "line-search-failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<S> {
    pub lambda: Vec<S>,
    pub flows: Vec<S>,
    pub gradient: Vec<S>,
    pub trajectory: Vec<IterationRecord<S>>,
    pub termination: Termination,
    pub iterations_to_unit_stepsize: Option<usize>,
    /// Spectral diagnostics measured at the starting point (line-search
    /// modes only).
    pub initial_diagnostics: Option<SpectralDiagnostics<S>>,
    /// Total steps taken.
    pub iterations: usize,
    /// Per-iteration communication logs (simulator runs only).
    pub round_logs: Vec<simnet::RoundLog>,
}

/// Zero starting prices: the only supported policy, shift-canonical and
/// reproducible.
pub fn initial_lambda<S: Real>(n: usize) -> Vec<S> {
    vec![S::zero(); n]
}

/// Index of the first iteration from which every later step used the
/// unit stepsize; `None` when the trajectory never settles at one.
pub fn iterations_to_unit_stepsize<S: Real>(trajectory: &[IterationRecord<S>]) -> Option<usize> {
    let mut first: Option<usize> = None;
    let mut any_step = false;
    for record in trajectory {
        if let Some(alpha) = record.alpha {
            any_step = true;
            if alpha == S::one() {
                if first.is_none() {
                    first = Some(record.k);
                }
            } else {
                first = None;
            }
        }
    }
    if any_step {
        first
    } else {
        None
    }
}

/// Runs the dual descent until the gradient max-norm falls below the
/// tolerance or the iteration cap is hit. A line-search failure ends the
/// run early with the partial trajectory preserved.
pub fn solve<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    config: &SolverConfig<S>,
) -> Result<SolveResult<S>> {
    config.validate()?;
    let n = problem.node_count();
    let params = config.line_search_params();

    let mut lambda = initial_lambda::<S>(n);
    let uses_line_search = config.mode != SolverMode::SubgradientFixed;
    let initial_diagnostics = if uses_line_search {
        let split = dual::dual_hessian(problem, &lambda)?;
        let diag = dual::spectral_diagnostics(&split, config.hops, config.sigma)?;
        if config.mode == SolverMode::DistributedLineSearch
            && !params.sigma_within_distributed_bound(&diag)
        {
            log::warn!(
                "sigma = {} is not below the measured distributed bound {} \
                 (rho_bar = {}); the stepsize guarantees may not apply",
                config.sigma,
                diag.sigma_bound(config.hops),
                diag.rho_bar
            );
        }
        Some(diag)
    } else {
        None
    };

    let scopes = if config.mode == SolverMode::DistributedLineSearch && !config.use_simulator {
        Some(node_scopes(problem.graph(), config.hops)?)
    } else {
        None
    };
    let mut network = if config.mode == SolverMode::DistributedLineSearch && config.use_simulator {
        Some(simnet::assemble_network(problem, &lambda)?)
    } else {
        None
    };

    let mut trajectory: Vec<IterationRecord<S>> = Vec::new();
    let mut round_logs: Vec<simnet::RoundLog> = Vec::new();
    let mut termination = Termination::MaxIterations;

    for k in 0..=config.max_iter {
        let state = DualState::evaluate(problem, &lambda)?;
        let primal = problem.primal_objective(&state.flows)?;
        let feasibility = linalg::norm2(&problem.feasibility_residual(&state.flows)?);
        let grad_norm = linalg::norm2(&state.gradient);

        if linalg::norm_inf(&state.gradient) <= config.grad_tol || k == config.max_iter {
            trajectory.push(IterationRecord {
                k,
                dual_value: state.value,
                primal_value: primal,
                feasibility_norm: feasibility,
                alpha: None,
                grad_norm,
                backtracks: 0,
                rounds: 0,
                messages: 0,
            });
            termination = if linalg::norm_inf(&state.gradient) <= config.grad_tol {
                Termination::Converged
            } else {
                Termination::MaxIterations
            };
            return finish(
                problem,
                lambda,
                trajectory,
                termination,
                initial_diagnostics,
                round_logs,
            );
        }

        if config.recompute_spectral && uses_line_search {
            let split = dual::dual_hessian(problem, &lambda)?;
            let diag = dual::spectral_diagnostics(&split, config.hops, config.sigma)?;
            if config.mode == SolverMode::DistributedLineSearch
                && !params.sigma_within_distributed_bound(&diag)
            {
                log::warn!(
                    "iteration {k}: sigma = {} exceeds the measured bound {}",
                    config.sigma,
                    diag.sigma_bound(config.hops)
                );
            }
        }

        let step = match config.mode {
            SolverMode::SubgradientFixed => {
                let direction = subgradient_direction(&state.gradient);
                StepOutcome {
                    alpha: config.fixed_step,
                    backtracks: 0,
                    rounds: 0,
                    messages: 0,
                    next_lambda: linalg::add_scaled(&lambda, config.fixed_step, &direction),
                }
            }
            SolverMode::CentralizedLineSearch => {
                let split = dual::dual_hessian(problem, &lambda)?;
                let direction = add_direction(&DirectionRequest {
                    split: &split,
                    gradient: &state.gradient,
                    hops: config.hops,
                })?;
                let outcome = match centralized_backtracking(
                    problem,
                    &lambda,
                    &direction,
                    &state.gradient,
                    &params,
                ) {
                    Ok(outcome) => outcome,
                    Err(Error::LineSearchFailure { .. }) => {
                        termination = Termination::LineSearchFailure;
                        break;
                    }
                    Err(other) => return Err(other),
                };
                StepOutcome {
                    alpha: outcome.alpha,
                    backtracks: outcome.backtrack_count,
                    rounds: 0,
                    messages: 0,
                    next_lambda: linalg::add_scaled(&lambda, outcome.alpha, &direction),
                }
            }
            SolverMode::DistributedLineSearch => {
                if let Some(network) = network.as_mut() {
                    match network.run_iteration(&params) {
                        Ok(sim) => {
                            let step = StepOutcome {
                                alpha: sim.alpha,
                                backtracks: sim
                                    .per_node_backtracks
                                    .iter()
                                    .copied()
                                    .max()
                                    .unwrap_or(0),
                                rounds: sim.log.total_rounds(),
                                messages: sim.log.total_messages(),
                                next_lambda: network.lambdas(),
                            };
                            round_logs.push(sim.log);
                            step
                        }
                        Err(Error::LineSearchFailure { .. }) => {
                            termination = Termination::LineSearchFailure;
                            break;
                        }
                        Err(other) => return Err(other),
                    }
                } else {
                    let split = dual::dual_hessian(problem, &lambda)?;
                    let direction = add_direction(&DirectionRequest {
                        split: &split,
                        gradient: &state.gradient,
                        hops: config.hops,
                    })?;
                    let outcome = match distributed_backtracking(
                        problem,
                        &lambda,
                        &split,
                        &state.gradient,
                        scopes.as_ref().expect("scopes precomputed"),
                        &params,
                    ) {
                        Ok(outcome) => outcome,
                        Err(Error::LineSearchFailure { .. }) => {
                            termination = Termination::LineSearchFailure;
                            break;
                        }
                        Err(other) => return Err(other),
                    };
                    let alphas = outcome.per_node_alphas.as_ref().expect("distributed");
                    StepOutcome {
                        alpha: outcome.alpha,
                        backtracks: max_backtracks_of(&params, alphas),
                        rounds: 0,
                        messages: 0,
                        next_lambda: linalg::add_scaled(&lambda, outcome.alpha, &direction),
                    }
                }
            }
        };

        trajectory.push(IterationRecord {
            k,
            dual_value: state.value,
            primal_value: primal,
            feasibility_norm: feasibility,
            alpha: Some(step.alpha),
            grad_norm,
            backtracks: step.backtracks,
            rounds: step.rounds,
            messages: step.messages,
        });
        lambda = step.next_lambda;
    }

    // Reached only on line-search failure: append the terminal state row.
    let state = DualState::evaluate(problem, &lambda)?;
    let primal = problem.primal_objective(&state.flows)?;
    let feasibility = linalg::norm2(&problem.feasibility_residual(&state.flows)?);
    trajectory.push(IterationRecord {
        k: trajectory.len(),
        dual_value: state.value,
        primal_value: primal,
        feasibility_norm: feasibility,
        alpha: None,
        grad_norm: linalg::norm2(&state.gradient),
        backtracks: 0,
        rounds: 0,
        messages: 0,
    });
    finish(
        problem,
        lambda,
        trajectory,
        termination,
        initial_diagnostics,
        round_logs,
    )
}

struct StepOutcome<S> {
    alpha: S,
    backtracks: u32,
    rounds: usize,
    messages: usize,
    next_lambda: Vec<S>,
}

/// The deepest backtracking any node performed, recovered from the
/// accepted steps (every accepted step is a power of beta).
fn max_backtracks_of<S: Real>(params: &LineSearchParams<S>, alphas: &[S]) -> u32 {
    let min_alpha = alphas.iter().copied().fold(S::one(), |m, a| m.min(a));
    let mut count = 0u32;
    let mut alpha = S::one();
    while alpha > min_alpha && count < params.max_backtracks {
        alpha *= params.beta;
        count += 1;
    }
    count
}

fn finish<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda: Vec<S>,
    trajectory: Vec<IterationRecord<S>>,
    termination: Termination,
    initial_diagnostics: Option<SpectralDiagnostics<S>>,
    round_logs: Vec<simnet::RoundLog>,
) -> Result<SolveResult<S>> {
    let state = DualState::evaluate(problem, &lambda)?;
    let iterations = trajectory
        .iter()
        .filter(|record| record.alpha.is_some())
        .count();
    Ok(SolveResult {
        iterations_to_unit_stepsize: iterations_to_unit_stepsize(&trajectory),
        lambda,
        flows: state.flows,
        gradient: state.gradient,
        trajectory,
        termination,
        initial_diagnostics,
        iterations,
        round_logs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;
    use crate::problem::FlowProblem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_node() -> FlowProblem<f64> {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        FlowProblem::with_uniform_exp_cost(g, 1.0, vec![1.0, -1.0]).unwrap()
    }

    fn pair_instance(n: usize, edges: usize, seed: u64) -> FlowProblem<f64> {
        let g = DirectedGraph::random_connected(n, edges, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
        let s = rng.gen_range(0..n);
        let mut t = rng.gen_range(0..n);
        while t == s {
            t = rng.gen_range(0..n);
        }
        let mut rates = vec![0.0; n];
        rates[s] = 1.0;
        rates[t] = -1.0;
        FlowProblem::with_uniform_exp_cost(g, 1.0, rates).unwrap()
    }

    fn config(mode: SolverMode) -> SolverConfig<f64> {
        SolverConfig {
            mode,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn two_node_instance_reaches_the_analytic_optimum() {
        // The two-node graph is the pathological connectivity case
        // (rho_bar = 1): odd hop counts annihilate the gradient mode of
        // the truncated series, so the even hop count 2 is used here.
        for mode in [
            SolverMode::CentralizedLineSearch,
            SolverMode::DistributedLineSearch,
        ] {
            let mut cfg = config(mode);
            cfg.hops = 2;
            let result = solve(&two_node(), &cfg).unwrap();
            assert_eq!(result.termination, Termination::Converged);
            let price_gap = result.lambda[0] - result.lambda[1];
            assert!((price_gap - 2.0 * 1f64.sinh()).abs() <= 1e-7);
            assert!((result.flows[0] - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn odd_hop_series_degenerates_on_the_pathological_two_node_graph() {
        // With rho_bar = 1 the series partial sums alternate between one
        // and zero on the gradient mode; at hops = 1 the direction
        // vanishes identically and the run cannot move.
        let p = two_node();
        let result = solve(&p, &config(SolverMode::CentralizedLineSearch)).unwrap();
        assert_eq!(result.termination, Termination::MaxIterations);
        let diag = result.initial_diagnostics.unwrap();
        assert!((diag.rho_bar - 1.0).abs() <= 1e-10);
        assert!(!diag.well_conditioned());
        // Every recorded step kept the prices where they were.
        assert!(result.lambda.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn zero_rates_converge_immediately() {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = FlowProblem::with_uniform_exp_cost(g, 1.0, vec![0.0; 3]).unwrap();
        let result = solve(&p, &config(SolverMode::DistributedLineSearch)).unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_eq!(result.iterations, 0);
        assert_eq!(result.trajectory.len(), 1);
        assert_eq!(result.trajectory[0].alpha, None);
        assert_eq!(result.flows, vec![0.0; 3]);
        assert_eq!(result.iterations_to_unit_stepsize, None);
    }

    #[test]
    fn unit_stepsize_counter_examples() {
        let record = |k: usize, alpha: Option<f64>| IterationRecord {
            k,
            dual_value: 0.0,
            primal_value: 0.0,
            feasibility_norm: 0.0,
            alpha,
            grad_norm: 0.0,
            backtracks: 0,
            rounds: 0,
            messages: 0,
        };
        let all_unit: Vec<_> = (0..3).map(|k| record(k, Some(1.0))).collect();
        assert_eq!(iterations_to_unit_stepsize(&all_unit), Some(0));

        let late: Vec<_> = [0.5, 1.0, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(k, &a)| record(k, Some(a)))
            .collect();
        assert_eq!(iterations_to_unit_stepsize(&late), Some(1));

        let dip: Vec<_> = [1.0, 0.5, 1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(k, &a)| record(k, Some(a)))
            .collect();
        assert_eq!(iterations_to_unit_stepsize(&dip), Some(2));

        let never: Vec<_> = [1.0, 0.5]
            .iter()
            .enumerate()
            .map(|(k, &a)| record(k, Some(a)))
            .collect();
        assert_eq!(iterations_to_unit_stepsize(&never), None);
        assert_eq!(iterations_to_unit_stepsize::<f64>(&[]), None);
    }

    #[test]
    fn line_search_modes_strictly_decrease_the_dual_value() {
        for seed in 0..5 {
            let p = pair_instance(12, 30, seed);
            for mode in [
                SolverMode::CentralizedLineSearch,
                SolverMode::DistributedLineSearch,
            ] {
                let result = solve(&p, &config(mode)).unwrap();
                assert_eq!(result.termination, Termination::Converged);
                for pair in result.trajectory.windows(2) {
                    assert!(pair[1].dual_value - pair[0].dual_value <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn simulator_and_fast_path_produce_identical_trajectories() {
        for seed in 0..3 {
            let p = pair_instance(10, 22, seed + 50);
            let fast = solve(&p, &config(SolverMode::DistributedLineSearch)).unwrap();
            let mut sim_config = config(SolverMode::DistributedLineSearch);
            sim_config.use_simulator = true;
            let sim = solve(&p, &sim_config).unwrap();
            assert_eq!(fast.trajectory.len(), sim.trajectory.len());
            for (a, b) in fast.trajectory.iter().zip(&sim.trajectory) {
                assert!((a.dual_value - b.dual_value).abs() <= 1e-12);
                assert!((a.primal_value - b.primal_value).abs() <= 1e-12);
                assert!((a.feasibility_norm - b.feasibility_norm).abs() <= 1e-12);
                assert!((a.grad_norm - b.grad_norm).abs() <= 1e-12);
                match (a.alpha, b.alpha) {
                    (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12),
                    (None, None) => {}
                    other => panic!("alpha mismatch: {other:?}"),
                }
                assert_eq!(a.backtracks, b.backtracks);
            }
            for (x, y) in fast.lambda.iter().zip(&sim.lambda) {
                assert!((x - y).abs() <= 1e-12);
            }
            // Simulator rows carry the communication accounting.
            assert!(sim.trajectory[0].rounds > 0);
            assert!(sim.trajectory[0].messages > 0);
        }
    }

    #[test]
    fn subgradient_baseline_moves_toward_feasibility() {
        let p = two_node();
        let mut cfg = config(SolverMode::SubgradientFixed);
        cfg.fixed_step = 0.05;
        cfg.max_iter = 2000;
        cfg.grad_tol = 1e-4;
        let result = solve(&p, &cfg).unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert!((result.flows[0] - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn weak_duality_holds_along_the_trajectory() {
        // The dual value never drops below the negated cost of the final
        // (feasible to tolerance) flow.
        let p = pair_instance(9, 18, 7);
        let result = solve(&p, &config(SolverMode::CentralizedLineSearch)).unwrap();
        let bound = -result.trajectory.last().unwrap().primal_value;
        for record in &result.trajectory {
            assert!(record.dual_value >= bound - 1e-6);
        }
    }

    #[test]
    fn convergence_reaches_primal_dual_consistency() {
        let p = pair_instance(12, 28, 11);
        let result = solve(&p, &config(SolverMode::DistributedLineSearch)).unwrap();
        assert_eq!(result.termination, Termination::Converged);
        let last = result.trajectory.last().unwrap();
        assert!(last.feasibility_norm <= 1e-6);
        let gap = (last.dual_value + last.primal_value).abs();
        assert!(gap <= 1e-6 * (1.0 + last.primal_value.abs()));
    }

    #[test]
    fn config_validation() {
        let p = two_node();
        let mut cfg = config(SolverMode::DistributedLineSearch);
        cfg.hops = 0;
        assert!(solve(&p, &cfg).is_err());
        let mut cfg = config(SolverMode::CentralizedLineSearch);
        cfg.sigma = 0.9;
        assert!(solve(&p, &cfg).is_err());
        let mut cfg = config(SolverMode::SubgradientFixed);
        cfg.fixed_step = -1.0;
        assert!(solve(&p, &cfg).is_err());
        let mut cfg = config(SolverMode::CentralizedLineSearch);
        cfg.grad_tol = 0.0;
        assert!(solve(&p, &cfg).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [
            SolverMode::SubgradientFixed,
            SolverMode::CentralizedLineSearch,
            SolverMode::DistributedLineSearch,
        ] {
            assert_eq!(SolverMode::parse(mode.name()).unwrap(), mode);
        }
        assert!(SolverMode::parse("newton").is_err());
    }
}
