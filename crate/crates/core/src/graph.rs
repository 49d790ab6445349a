//! Directed graphs with incidence algebra, hop-limited neighborhoods and
//! a seeded random generator for connected test instances.
//!
//! The incidence operator `A` maps edge vectors to node vectors:
//! `(A x)_i` adds flows leaving node `i` and subtracts flows entering it.
//! Its transpose maps node potentials to per-edge differences.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One entry of a node's incident-edge table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncidentEdge {
    /// Edge id.
    pub edge: usize,
    /// The other endpoint.
    pub other: usize,
    /// True when the edge leaves this node (node is the tail).
    pub leaves: bool,
}

/// Directed graph on nodes `0..n` whose undirected support is connected.
///
/// No self-loops and no parallel edges (same unordered node pair twice):
/// both are rejected at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    incident: Vec<Vec<IncidentEdge>>,
}

/// Hop-limited neighborhood: all nodes within `radius` undirected hops of
/// `center`, the center included. Members are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: usize,
    pub radius: usize,
    members: Vec<usize>,
}

impl Neighborhood {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl DirectedGraph {
    /// Builds a graph from `(tail, head)` pairs, validating every invariant.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (id, &(tail, head)) in edges.iter().enumerate() {
            if tail >= n || head >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge {id} endpoint out of range: ({tail}, {head}) with n = {n}"
                )));
            }
            if tail == head {
                return Err(Error::InvalidArgument(format!(
                    "edge {id} is a self-loop at node {tail}"
                )));
            }
            let key = (tail.min(head), tail.max(head));
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!(
                    "parallel edge {id} between nodes {} and {}",
                    key.0, key.1
                )));
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        let mut incident = vec![Vec::new(); n];
        for (id, &(tail, head)) in edges.iter().enumerate() {
            adjacency[tail].push(head);
            adjacency[head].push(tail);
            incident[tail].push(IncidentEdge {
                edge: id,
                other: head,
                leaves: true,
            });
            incident[head].push(IncidentEdge {
                edge: id,
                other: tail,
                leaves: false,
            });
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        let graph = Self {
            n,
            edges,
            adjacency,
            incident,
        };
        if !graph.is_connected() {
            return Err(Error::InvalidArgument(
                "undirected support is not connected".into(),
            ));
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Undirected neighbor list of `node`, sorted ascending.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Incident-edge table of `node`, in ascending edge-id order.
    pub fn incident_edges(&self, node: usize) -> &[IncidentEdge] {
        &self.incident[node]
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Applies the incidence operator: `(A x)_i = sum of x over edges
    /// leaving i minus sum over edges entering i`.
    pub fn incidence_apply<S: Real>(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.edges.len() {
            return Err(Error::InvalidArgument(format!(
                "edge vector has length {}, expected {}",
                x.len(),
                self.edges.len()
            )));
        }
        let mut out = vec![S::zero(); self.n];
        for (&(tail, head), &xe) in self.edges.iter().zip(x) {
            out[tail] += xe;
            out[head] -= xe;
        }
        Ok(out)
    }

    /// Applies the transposed incidence operator: entry for edge `(i, j)`
    /// is `lambda_i - lambda_j`.
    pub fn incidence_transpose_apply<S: Real>(&self, lambda: &[S]) -> Result<Vec<S>> {
        if lambda.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "node vector has length {}, expected {}",
                lambda.len(),
                self.n
            )));
        }
        Ok(self
            .edges
            .iter()
            .map(|&(tail, head)| lambda[tail] - lambda[head])
            .collect())
    }

    /// BFS over the undirected support, truncated at `radius` hops.
    pub fn neighborhood(&self, center: usize, radius: usize) -> Result<Neighborhood> {
        if center >= self.n {
            return Err(Error::InvalidArgument(format!(
                "node id {center} out of range (n = {})",
                self.n
            )));
        }
        let mut dist = vec![usize::MAX; self.n];
        dist[center] = 0;
        let mut queue = VecDeque::from([center]);
        let mut members = vec![center];
        while let Some(u) = queue.pop_front() {
            if dist[u] == radius {
                continue;
            }
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        Ok(Neighborhood {
            center,
            radius,
            members,
        })
    }

    /// Maximum undirected shortest-path distance over all node pairs.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for start in 0..self.n {
            let mut dist = vec![usize::MAX; self.n];
            dist[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        best = best.max(dist[v]);
                        queue.push_back(v);
                    }
                }
            }
        }
        best
    }

    /// Random connected graph with exactly `edge_count` edges,
    /// deterministic for a fixed seed (ChaCha8 generator).
    ///
    /// A uniform labeled spanning tree is drawn first (random Pruefer
    /// sequence), the remaining undirected pairs are then sampled without
    /// replacement, and each edge gets a uniformly random direction.
    pub fn random_connected(n: usize, edge_count: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        let max_edges = n * (n - 1) / 2;
        if edge_count < n - 1 || edge_count > max_edges {
            return Err(Error::InvalidArgument(format!(
                "edge count {edge_count} infeasible for {n} nodes \
                 (must lie in [{}, {max_edges}])",
                n - 1
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = spanning_tree_pairs(n, &mut rng);
        let in_tree: std::collections::BTreeSet<(usize, usize)> = pairs.iter().copied().collect();
        let mut candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|pair| !in_tree.contains(pair))
            .collect();
        candidates.shuffle(&mut rng);
        pairs.extend(candidates.into_iter().take(edge_count - (n - 1)));
        pairs.sort_unstable();

        let edges = pairs
            .into_iter()
            .map(|(a, b)| if rng.gen_bool(0.5) { (a, b) } else { (b, a) })
            .collect();
        Self::new(n, edges)
    }

    /// Parses the plain text format: first line `n E`, then `E` lines of
    /// `tail head`. Trailing lines are ignored (the problem format appends
    /// rate and cost lines after the edge list).
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty graph file".into()))?;
        let mut parts = header.split_whitespace();
        let n = parse_field::<usize>(parts.next(), "node count")?;
        let edge_count = parse_field::<usize>(parts.next(), "edge count")?;
        let mut edges = Vec::with_capacity(edge_count);
        for _ in 0..edge_count {
            let line = lines.next().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "expected {edge_count} edge lines, found {}",
                    edges.len()
                ))
            })?;
            let mut fields = line.split_whitespace();
            let tail = parse_field::<usize>(fields.next(), "edge tail")?;
            let head = parse_field::<usize>(fields.next(), "edge head")?;
            edges.push((tail, head));
        }
        Self::new(n, edges)
    }

    /// Serializes to the text format accepted by [`DirectedGraph::parse_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for &(tail, head) in &self.edges {
            let _ = writeln!(out, "{tail} {head}");
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::InvalidArgument(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("malformed {what}")))
}

/// Uniform random labeled tree on `n` nodes as sorted undirected pairs,
/// decoded from a random Pruefer sequence.
fn spanning_tree_pairs(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut leaves: std::collections::BTreeSet<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    let mut pairs = Vec::with_capacity(n - 1);
    for &s in &seq {
        let leaf = *leaves.iter().next().expect("tree decode keeps a leaf");
        leaves.remove(&leaf);
        pairs.push((leaf.min(s), leaf.max(s)));
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.insert(s);
        }
    }
    let mut rest = leaves.into_iter();
    let a = rest.next().expect("two nodes remain");
    let b = rest.next().expect("two nodes remain");
    pairs.push((a.min(b), a.max(b)));
    pairs
}
