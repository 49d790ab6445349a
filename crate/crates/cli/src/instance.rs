//! Instance construction: seeded generation of the benchmark family
//! (random connected graph, one unit source/sink pair) and problem-file
//! loading.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use addflow::graph::DirectedGraph;
use addflow::ExpProblem;

use crate::InstanceArgs;

/// Generates the benchmark instance for a seed: a random connected graph
/// plus a source/sink pair drawn from the same seed, carrying `rate`
/// units.
pub fn generate(
    nodes: usize,
    edges: usize,
    seed: u64,
    rate: f64,
) -> Result<ExpProblem, addflow::Error> {
    let graph = DirectedGraph::random_connected(nodes, edges, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let source = rng.gen_range(0..nodes);
    let mut sink = rng.gen_range(0..nodes);
    while sink == source {
        sink = rng.gen_range(0..nodes);
    }
    let mut rates = vec![0.0; nodes];
    rates[source] = rate;
    rates[sink] = -rate;
    ExpProblem::with_uniform_exp_cost(graph, 1.0, rates)
}

/// Loads the problem file when given, otherwise generates. A file without
/// a `b` line gets the generated rate vector for its own node count.
pub fn load_or_generate(args: &InstanceArgs) -> Result<ExpProblem, Box<dyn std::error::Error>> {
    match &args.graph_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let graph = DirectedGraph::parse_text(&text)?;
            let fallback = fallback_rates(graph.node_count(), args.seed, args.rate);
            Ok(ExpProblem::parse_text(&text, Some(fallback))?)
        }
        None => Ok(generate(args.nodes, args.edges, args.seed, args.rate)?),
    }
}

fn fallback_rates(nodes: usize, seed: u64, rate: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let source = rng.gen_range(0..nodes);
    let mut sink = rng.gen_range(0..nodes);
    while sink == source {
        sink = rng.gen_range(0..nodes);
    }
    let mut rates = vec![0.0; nodes];
    rates[source] = rate;
    rates[sink] = -rate;
    rates
}

/// Parses a `NODESxEDGES` size label such as `25x100`.
pub fn parse_size(label: &str) -> Result<(usize, usize), Box<dyn std::error::Error>> {
    let (n, e) = label
        .split_once('x')
        .ok_or_else(|| format!("size `{label}` is not of the form NODESxEDGES"))?;
    Ok((n.trim().parse()?, e.trim().parse()?))
}
