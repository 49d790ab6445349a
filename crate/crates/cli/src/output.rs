//! CSV and JSON output. Plain `Display` formatting keeps files
//! byte-identical across runs with the same flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use addflow::solver::{IterationRecord, SolveResult};
use addflow::ExpProblem;

use crate::{InstanceArgs, SolverArgs};

/// Writes the trajectory with the fixed column set. The terminal row has
/// no step, so its `alpha` (and counters) stay empty.
pub fn write_trajectory_csv(
    path: &Path,
    trajectory: &[IterationRecord<f64>],
) -> std::io::Result<()> {
    let mut out = String::from("k,q,primal,feasibility,alpha,grad_norm,backtracks,rounds,messages\n");
    for record in trajectory {
        let alpha = record
            .alpha
            .map(|a| a.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            record.k,
            record.dual_value,
            record.primal_value,
            record.feasibility_norm,
            alpha,
            record.grad_norm,
            record.backtracks,
            record.rounds,
            record.messages
        );
    }
    std::fs::write(path, out)
}

/// Summary file path for an output: `<out>.summary.json`.
pub fn write_summary(out: &Path, summary: &Value) -> std::io::Result<()> {
    let path = PathBuf::from(format!("{}.summary.json", out.display()));
    std::fs::write(path, format!("{summary}\n"))
}

pub fn instance_summary(args: &InstanceArgs, problem: &ExpProblem) -> Value {
    json!({
        "nodes": problem.node_count(),
        "edges": problem.edge_count(),
        "seed": args.seed,
        "rate": args.rate,
        "from_file": args.graph_file.as_ref().map(|p| p.display().to_string()),
        "digest": instance_digest(problem),
    })
}

pub fn parameter_summary(args: &SolverArgs) -> Value {
    json!({
        "N": args.hops,
        "sigma": args.sigma,
        "beta": args.beta,
        "grad_tol": args.grad_tol,
        "max_iter": args.max_iter,
        "fixed_step": args.fixed_step,
        "use_simulator": args.use_simulator,
    })
}

pub fn run_summary(result: &SolveResult<f64>) -> Value {
    let last = result.trajectory.last();
    json!({
        "termination": result.termination.name(),
        "iterations": result.iterations,
        "iterations_to_unit_stepsize": result.iterations_to_unit_stepsize,
        "final_dual": last.map(|r| r.dual_value),
        "final_primal": last.map(|r| r.primal_value),
        "final_feasibility": last.map(|r| r.feasibility_norm),
        "final_grad_norm": last.map(|r| r.grad_norm),
        "total_rounds": result.trajectory.iter().map(|r| r.rounds).sum::<usize>(),
        "total_messages": result.trajectory.iter().map(|r| r.messages).sum::<usize>(),
        "rho_bar": result.initial_diagnostics.map(|d| d.rho_bar),
        "alpha_hat": result.initial_diagnostics.map(|d| d.alpha_hat),
    })
}

pub fn solve_summary(
    command: &str,
    instance: &InstanceArgs,
    solver: &SolverArgs,
    problem: &ExpProblem,
    result: &SolveResult<f64>,
) -> Value {
    json!({
        "command": command,
        "instance": instance_summary(instance, problem),
        "parameters": parameter_summary(solver),
        "mode": solver.mode,
        "result": run_summary(result),
    })
}

/// FNV-1a over the edge list and rates; identifies an instance across
/// runs and modes.
fn instance_digest(problem: &ExpProblem) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
    };
    eat(&(problem.node_count() as u64).to_le_bytes());
    for &(tail, head) in problem.graph().edges() {
        eat(&(tail as u64).to_le_bytes());
        eat(&(head as u64).to_le_bytes());
    }
    for &rate in problem.rates() {
        eat(&rate.to_bits().to_le_bytes());
    }
    format!("{hash:016x}")
}
