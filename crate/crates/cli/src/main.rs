//! Command-line experiment harness: single solves, centralized-versus-
//! distributed comparisons, and batch sweeps over the benchmark grid,
//! all with machine-readable CSV/JSON output.

mod instance;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use addflow::solver::{solve, SolveResult, SolverConfig, SolverMode, Termination};

#[derive(Parser)]
#[command(
    name = "addflow",
    about = "Dual-descent min-cost flow with a distributed backtracking line search",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its trajectory as CSV.
    Solve(SolveArgs),
    /// Run centralized and distributed line searches on one instance.
    Compare(CompareArgs),
    /// Reproduce the benchmark grid: sizes x hop counts x seeds x modes.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Node count of the generated instance.
    #[arg(long, default_value_t = 25)]
    nodes: usize,
    /// Edge count of the generated instance.
    #[arg(long, default_value_t = 100)]
    edges: usize,
    /// Problem file to load instead of generating (graph lines, optional
    /// `b ...` rate line, optional `c <coefficient>` line).
    #[arg(long, value_name = "PATH")]
    graph_file: Option<PathBuf>,
    /// Seed for the instance generator (graph, source/sink placement).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rate injected at the source and drained at the sink.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Hop parameter of the direction series and the distributed search.
    #[arg(long = "N", default_value_t = 1)]
    hops: usize,
    /// subgradient-fixed | addn-centralized-ls | addn-distributed-ls
    #[arg(long, default_value = "addn-distributed-ls")]
    mode: String,
    /// Armijo sufficient-decrease parameter.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Backtracking factor.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Stopping threshold on the gradient max-norm.
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Stepsize of the subgradient baseline.
    #[arg(long, default_value_t = 1e-2)]
    fixed_step: f64,
    /// Route distributed iterations through the message-passing engine.
    #[arg(long, default_value_t = false)]
    use_simulator: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Trajectory CSV path; the summary goes to `<out>.summary.json`.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
    /// Dump one `k phase round msgs` line per communication round
    /// (implies --use-simulator).
    #[arg(long, default_value_t = false)]
    trace_rounds: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output stem: writes `<out>.centralized.csv`, `<out>.distributed.csv`
    /// and `<out>.summary.json`.
    #[arg(long, default_value = "compare")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid sizes as `nodes x edges` pairs.
    #[arg(long, value_delimiter = ',', default_values_t = ["25x100".to_string(), "50x200".to_string(), "100x400".to_string()])]
    sizes: Vec<String>,
    /// Hop parameters to sweep.
    #[arg(long = "N", value_delimiter = ',', default_values_t = [1usize, 2, 3])]
    hops: Vec<usize>,
    /// Number of seeds per cell (seeds run 0..count).
    #[arg(long, default_value_t = 50)]
    seeds: u64,
    /// Rate injected at the source and drained at the sink.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Long-format CSV path; the summary goes to `<out>.summary.json`.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn build_config(
    args: &SolverArgs,
    seed: u64,
) -> Result<SolverConfig<f64>, Box<dyn std::error::Error>> {
    Ok(SolverConfig {
        mode: SolverMode::parse(&args.mode)?,
        hops: args.hops,
        sigma: args.sigma,
        beta: args.beta,
        grad_tol: args.grad_tol,
        max_iter: args.max_iter,
        fixed_step: args.fixed_step,
        seed,
        use_simulator: args.use_simulator,
        ..SolverConfig::default()
    })
}

fn exit_code_for(termination: Termination) -> ExitCode {
    match termination {
        Termination::Converged => ExitCode::SUCCESS,
        Termination::MaxIterations => ExitCode::from(2),
        Termination::LineSearchFailure => ExitCode::from(3),
    }
}

fn cmd_solve(mut args: SolveArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if args.trace_rounds {
        args.solver.use_simulator = true;
    }
    let problem = instance::load_or_generate(&args.instance)?;
    let config = build_config(&args.solver, args.instance.seed)?;
    let result = solve(&problem, &config)?;

    if args.trace_rounds {
        for log in &result.round_logs {
            for round in &log.rounds {
                println!(
                    "{} {} {} {}",
                    log.iteration, round.phase, round.round_in_phase, round.messages
                );
            }
        }
    }

    output::write_trajectory_csv(&args.out, &result.trajectory)?;
    let summary = output::solve_summary("solve", &args.instance, &args.solver, &problem, &result);
    output::write_summary(&args.out, &summary)?;
    println!("{summary}");
    Ok(exit_code_for(result.termination))
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let problem = instance::load_or_generate(&args.instance)?;

    let mut centralized_args = args.solver.clone();
    centralized_args.mode = "addn-centralized-ls".into();
    let mut distributed_args = args.solver.clone();
    distributed_args.mode = "addn-distributed-ls".into();

    let centralized = solve(&problem, &build_config(&centralized_args, args.instance.seed)?)?;
    let distributed = solve(&problem, &build_config(&distributed_args, args.instance.seed)?)?;

    let stem = args.out.as_os_str().to_string_lossy().to_string();
    output::write_trajectory_csv(
        &PathBuf::from(format!("{stem}.centralized.csv")),
        &centralized.trajectory,
    )?;
    output::write_trajectory_csv(
        &PathBuf::from(format!("{stem}.distributed.csv")),
        &distributed.trajectory,
    )?;

    let final_dual = |r: &SolveResult<f64>| r.trajectory.last().map(|t| t.dual_value);
    let gap = match (final_dual(&centralized), final_dual(&distributed)) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let summary = json!({
        "command": "compare",
        "instance": output::instance_summary(&args.instance, &problem),
        "parameters": output::parameter_summary(&args.solver),
        "centralized": output::run_summary(&centralized),
        "distributed": output::run_summary(&distributed),
        "final_dual_gap": gap,
    });
    output::write_summary(&PathBuf::from(&stem), &summary)?;
    println!("{summary}");

    let worst = [centralized.termination, distributed.termination]
        .into_iter()
        .max_by_key(|t| match t {
            Termination::Converged => 0,
            Termination::MaxIterations => 1,
            Termination::LineSearchFailure => 2,
        })
        .unwrap();
    Ok(exit_code_for(worst))
}

struct SweepRow {
    size: String,
    hops: usize,
    seed: u64,
    mode: &'static str,
    iters_to_unit: Option<usize>,
    converged: bool,
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let sizes: Vec<(usize, usize)> = args
        .sizes
        .iter()
        .map(|s| instance::parse_size(s))
        .collect::<Result<_, _>>()?;

    let mut cells: Vec<(usize, usize, u64)> = Vec::new();
    for size_idx in 0..sizes.len() {
        for &hops in &args.hops {
            for seed in 0..args.seeds {
                cells.push((size_idx, hops, seed));
            }
        }
    }

    let rows: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(size_idx, hops, seed)| {
            let (n, edges) = sizes[size_idx];
            let size_label = format!("{n}x{edges}");
            let problem =
                instance::generate(n, edges, seed, args.rate).expect("sweep cell generation");
            let mut out = Vec::new();
            for (mode, name) in [
                (SolverMode::CentralizedLineSearch, "addn-centralized-ls"),
                (SolverMode::DistributedLineSearch, "addn-distributed-ls"),
            ] {
                let config = SolverConfig {
                    mode,
                    hops,
                    sigma: args.sigma,
                    beta: args.beta,
                    grad_tol: args.grad_tol,
                    max_iter: args.max_iter,
                    seed,
                    ..SolverConfig::default()
                };
                let row = match solve(&problem, &config) {
                    Ok(result) => SweepRow {
                        size: size_label.clone(),
                        hops,
                        seed,
                        mode: name,
                        iters_to_unit: result.iterations_to_unit_stepsize,
                        converged: result.termination == Termination::Converged,
                    },
                    Err(_) => SweepRow {
                        size: size_label.clone(),
                        hops,
                        seed,
                        mode: name,
                        iters_to_unit: None,
                        converged: false,
                    },
                };
                out.push(row);
            }
            out
        })
        .collect();

    let mut rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    rows.sort_by(|a, b| (&a.size, a.hops, a.seed, a.mode).cmp(&(&b.size, b.hops, b.seed, b.mode)));

    let mut csv = String::from("size,N,seed,mode,iters_to_unit_step,converged\n");
    for row in &rows {
        let iters = row
            .iters_to_unit
            .map(|v| v.to_string())
            .unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.size, row.hops, row.seed, row.mode, iters, row.converged
        ));
    }
    std::fs::write(&args.out, csv)?;

    // Per-cell order statistics over the runs that reached the unit step.
    let mut cells_summary = Vec::new();
    for (n, edges) in &sizes {
        let size_label = format!("{n}x{edges}");
        for &hops in &args.hops {
            for mode in ["addn-centralized-ls", "addn-distributed-ls"] {
                let mut values: Vec<usize> = rows
                    .iter()
                    .filter(|r| r.size == size_label && r.hops == hops && r.mode == mode)
                    .filter_map(|r| r.iters_to_unit)
                    .collect();
                values.sort_unstable();
                let converged = rows
                    .iter()
                    .filter(|r| {
                        r.size == size_label && r.hops == hops && r.mode == mode && r.converged
                    })
                    .count();
                let stat = |q: f64| -> Option<usize> {
                    if values.is_empty() {
                        None
                    } else {
                        Some(values[(q * (values.len() - 1) as f64).round() as usize])
                    }
                };
                cells_summary.push(json!({
                    "size": size_label,
                    "N": hops,
                    "mode": mode,
                    "runs": args.seeds,
                    "converged": converged,
                    "reached_unit_step": values.len(),
                    "q1_iters_to_unit_step": stat(0.25),
                    "median_iters_to_unit_step": stat(0.5),
                    "q3_iters_to_unit_step": stat(0.75),
                }));
            }
        }
    }
    let summary = json!({
        "command": "sweep",
        "sizes": args.sizes,
        "N": args.hops,
        "seeds": args.seeds,
        "rate": args.rate,
        "sigma": args.sigma,
        "beta": args.beta,
        "grad_tol": args.grad_tol,
        "max_iter": args.max_iter,
        "cells": cells_summary,
    });
    output::write_summary(&args.out, &summary)?;
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}
