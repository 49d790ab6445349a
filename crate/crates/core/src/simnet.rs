//! Synchronous round-based message-passing engine that executes one full
//! descent iteration as an explicit protocol.
//!
//! Each node holds only its own price, rate, incident edges and 1-hop
//! neighbor table (plus the network-size constants used to size its
//! buffers); everything else arrives in messages, and the engine rejects
//! any message that does not travel over a graph edge, so the
//! hop-locality of the algorithm is enforced structurally.
//!
//! One iteration runs these phases, all built from 1-hop rounds:
//!
//! 1. `gradient` - one round of price exchange; every node recovers the
//!    flows on its incident edges and its gradient component.
//! 2. `direction` - exactly `hops` rounds of series-term exchange
//!    implementing the truncated inverse-Hessian recursion.
//! 3. `linesearch` - a TTL-limited flood (`hops + 2` rounds) of node and
//!    edge records, after which every node runs its whole backtracking
//!    loop offline on its local view. The per-node rule evaluates dual
//!    shares one hop beyond the node's neighborhood, and those shares
//!    read prices one hop further still, hence the flood depth.
//! 4. `consensus` - `ceil(diameter / hops)` stages of `hops` rounds each,
//!    spreading the minimum accepted step to everyone.
//!
//! The agreed step is applied locally without further communication.

use std::fmt;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::linesearch::{LineSearchParams, ARMIJO_SLACK};
use crate::problem::{EdgeCost, FlowProblem};
use crate::scalar::{sc, Real};

/// Wire format: every message crosses exactly one graph edge per round.
#[derive(Debug, Clone, PartialEq)]
pub struct Message<S, C> {
    pub src: usize,
    pub dst: usize,
    pub round: usize,
    pub payload: Payload<S, C>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload<S, C> {
    /// Current price of the sender.
    Lambda(S),
    /// One term of the direction recursion.
    SeriesTerm { term: usize, value: S },
    /// Flooded node record with hops-to-live.
    NodeInfo {
        origin: usize,
        lambda: S,
        gradient: S,
        rate: S,
        ttl: usize,
    },
    /// Flooded edge record with hops-to-live.
    EdgeInfo {
        edge: usize,
        tail: usize,
        head: usize,
        cost: C,
        ttl: usize,
    },
    /// Running minimum of the accepted stepsizes.
    ConsensusMin { value: S, ttl: usize },
}

/// Protocol phases as they appear in round logs and trace dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Gradient,
    Direction,
    LineSearchFlood,
    Consensus,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::Gradient => "gradient",
            Phase::Direction => "direction",
            Phase::LineSearchFlood => "linesearch",
            Phase::Consensus => "consensus",
        };
        f.write_str(name)
    }
}

/// One communication round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub phase: Phase,
    pub round_in_phase: usize,
    pub messages: usize,
}

/// Accounting for one full iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundLog {
    pub iteration: usize,
    pub hops: usize,
    pub diameter: usize,
    pub rounds: Vec<RoundRecord>,
}

impl RoundLog {
    pub fn total_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn total_messages(&self) -> usize {
        self.rounds.iter().map(|r| r.messages).sum()
    }

    pub fn phase_rounds(&self, phase: Phase) -> usize {
        self.rounds.iter().filter(|r| r.phase == phase).count()
    }
}

/// Audit over a completed iteration's log; the engine already guarantees
/// that every counted message traveled over a graph edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub gradient_rounds: usize,
    pub direction_rounds: usize,
    pub linesearch_rounds: usize,
    pub consensus_rounds: usize,
    pub consensus_stages: usize,
    pub consensus_stage_bound: usize,
    pub total_messages: usize,
    /// Direction phase used exactly `hops` rounds.
    pub direction_rounds_exact: bool,
    /// Consensus finished within `ceil(diameter / hops)` hop-limited stages.
    pub consensus_within_bound: bool,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.direction_rounds_exact && self.consensus_within_bound
    }
}

pub fn message_audit(log: &RoundLog) -> AuditReport {
    let hops = log.hops.max(1);
    let consensus_rounds = log.phase_rounds(Phase::Consensus);
    let consensus_stages = consensus_rounds.div_ceil(hops);
    let consensus_stage_bound = log.diameter.div_ceil(hops).max(1);
    let direction_rounds = log.phase_rounds(Phase::Direction);
    AuditReport {
        gradient_rounds: log.phase_rounds(Phase::Gradient),
        direction_rounds,
        linesearch_rounds: log.phase_rounds(Phase::LineSearchFlood),
        consensus_rounds,
        consensus_stages,
        consensus_stage_bound,
        total_messages: log.total_messages(),
        direction_rounds_exact: direction_rounds == log.hops,
        consensus_within_bound: consensus_stages <= consensus_stage_bound,
    }
}

/// Incident-edge entry replicated into a node's local state.
#[derive(Debug, Clone)]
struct LocalEdge<S, C> {
    edge_id: usize,
    other: usize,
    leaves: bool,
    cost: C,
    flow: S,
    weight: S,
}

/// Flooded record of a remote node.
#[derive(Debug, Clone, Copy)]
struct NodeRecord<S> {
    lambda: S,
    gradient: S,
    rate: S,
}

/// Flooded record of an edge.
#[derive(Debug, Clone)]
struct EdgeRecord<C> {
    tail: usize,
    head: usize,
    cost: C,
}

/// Per-iteration working state; rebuilt from messages every iteration.
/// Buffers are indexed by node/edge id (the ids and network size are
/// deployment constants every node knows); their contents only ever come
/// from received messages.
#[derive(Debug, Clone)]
struct Scratch<S, C> {
    neighbor_lambda: Vec<Option<S>>,
    series_inbox: Vec<Option<S>>,
    degree_weight: S,
    gradient: S,
    series_prev: S,
    series_sum: S,
    direction: S,
    node_records: Vec<Option<NodeRecord<S>>>,
    edge_records: Vec<Option<EdgeRecord<C>>>,
    /// Records to forward next round, tagged with the neighbor they came
    /// from (not echoed back there).
    relay: Vec<(Payload<S, C>, Option<usize>)>,
    alpha: S,
    backtracks: u32,
    consensus_min: S,
}

impl<S: Real, C> Scratch<S, C> {
    fn new(node_count: usize, edge_count: usize) -> Self {
        Self {
            neighbor_lambda: vec![None; node_count],
            series_inbox: vec![None; node_count],
            degree_weight: S::zero(),
            gradient: S::zero(),
            series_prev: S::zero(),
            series_sum: S::zero(),
            direction: S::zero(),
            node_records: vec![None; node_count],
            edge_records: (0..edge_count).map(|_| None).collect(),
            relay: Vec::new(),
            alpha: S::one(),
            backtracks: 0,
            consensus_min: S::one(),
        }
    }
}

/// Everything a node owns. There are no global state vectors in here;
/// all non-local values arrive through messages.
#[derive(Debug, Clone)]
pub struct NodeState<S, C> {
    id: usize,
    lambda: S,
    rate: S,
    edges: Vec<LocalEdge<S, C>>,
    neighbors: Vec<usize>,
    node_count: usize,
    edge_count: usize,
    scratch: Scratch<S, C>,
}

impl<S: Real, C: EdgeCost<S>> NodeState<S, C> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn lambda(&self) -> S {
        self.lambda
    }

    pub fn rate(&self) -> S {
        self.rate
    }

    pub fn incident_edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbor_ids(&self) -> &[usize] {
        &self.neighbors
    }
}

/// Result of one simulated iteration, as observed by the engine.
#[derive(Debug, Clone)]
pub struct SimIteration<S> {
    pub log: RoundLog,
    pub alpha: S,
    pub per_node_alphas: Vec<S>,
    pub per_node_backtracks: Vec<u32>,
    pub gradient: Vec<S>,
    pub direction: Vec<S>,
}

/// The engine: owns the node states plus the topology used for routing
/// validation, and drives the synchronous rounds.
#[derive(Debug, Clone)]
pub struct SimNetwork<S, C> {
    graph: DirectedGraph,
    diameter: usize,
    iteration: usize,
    nodes: Vec<NodeState<S, C>>,
}

/// Builds per-node states from a problem instance; edge cost parameters
/// are replicated at both endpoints.
pub fn assemble_network<S: Real, C: EdgeCost<S>>(
    problem: &FlowProblem<S, C>,
    lambda0: &[S],
) -> Result<SimNetwork<S, C>> {
    if lambda0.len() != problem.node_count() {
        return Err(Error::InvalidArgument(format!(
            "initial prices have length {}, expected {}",
            lambda0.len(),
            problem.node_count()
        )));
    }
    let graph = problem.graph().clone();
    let (node_count, edge_count) = (graph.node_count(), graph.edge_count());
    let nodes = (0..node_count)
        .map(|id| NodeState {
            id,
            lambda: lambda0[id],
            rate: problem.rates()[id],
            edges: graph
                .incident_edges(id)
                .iter()
                .map(|inc| LocalEdge {
                    edge_id: inc.edge,
                    other: inc.other,
                    leaves: inc.leaves,
                    cost: problem.cost(inc.edge).clone(),
                    flow: S::zero(),
                    weight: S::zero(),
                })
                .collect(),
            neighbors: graph.neighbors(id).to_vec(),
            node_count,
            edge_count,
            scratch: Scratch::new(node_count, edge_count),
        })
        .collect();
    Ok(SimNetwork {
        diameter: graph.diameter(),
        graph,
        iteration: 0,
        nodes,
    })
}

impl<S: Real, C: EdgeCost<S>> SimNetwork<S, C> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeState<S, C>] {
        &self.nodes
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    /// God-view extraction of the current prices (observer only).
    pub fn lambdas(&self) -> Vec<S> {
        self.nodes.iter().map(|n| n.lambda).collect()
    }

    /// Runs one full iteration; afterwards every node has applied the
    /// same consensus step to its price.
    pub fn run_iteration(&mut self, params: &LineSearchParams<S>) -> Result<SimIteration<S>> {
        params.validate()?;
        let hops = params.hops;
        if hops == 0 {
            return Err(Error::InvalidArgument(
                "the message-passing protocol needs a hop parameter of at least 1".into(),
            ));
        }
        for node in &mut self.nodes {
            node.scratch = Scratch::new(node.node_count, node.edge_count);
        }
        let mut log = RoundLog {
            iteration: self.iteration,
            hops,
            diameter: self.diameter,
            rounds: Vec::new(),
        };

        self.gradient_phase(&mut log)?;
        self.direction_phase(hops, &mut log)?;
        self.linesearch_phase(params, &mut log)?;
        let alpha = self.consensus_phase(hops, &mut log)?;

        for node in &mut self.nodes {
            node.lambda += alpha * node.scratch.direction;
        }
        self.iteration += 1;

        Ok(SimIteration {
            log,
            alpha,
            per_node_alphas: self.nodes.iter().map(|n| n.scratch.alpha).collect(),
            per_node_backtracks: self.nodes.iter().map(|n| n.scratch.backtracks).collect(),
            gradient: self.nodes.iter().map(|n| n.scratch.gradient).collect(),
            direction: self.nodes.iter().map(|n| n.scratch.direction).collect(),
        })
    }

    /// Delivers one round's messages, enforcing that each travels over a
    /// graph edge. This is the locality guard: node handlers never see
    /// state that did not come through here.
    fn route(&mut self, messages: Vec<Message<S, C>>) -> Result<usize> {
        let count = messages.len();
        for msg in messages {
            if msg.src >= self.nodes.len() || msg.dst >= self.nodes.len() {
                return Err(Error::ProtocolFault(format!(
                    "message endpoint out of range ({} -> {})",
                    msg.src, msg.dst
                )));
            }
            if self
                .graph
                .neighbors(msg.src)
                .binary_search(&msg.dst)
                .is_err()
            {
                return Err(Error::ProtocolFault(format!(
                    "message from {} to {} does not traverse a graph edge",
                    msg.src, msg.dst
                )));
            }
            self.nodes[msg.dst].receive(msg);
        }
        Ok(count)
    }

    /// One synchronous round: every node emits the closure's payloads to
    /// all of its neighbors.
    fn broadcast_round<F>(
        &mut self,
        phase: Phase,
        round_in_phase: usize,
        log: &mut RoundLog,
        emit: F,
    ) -> Result<()>
    where
        F: Fn(&NodeState<S, C>) -> Vec<Payload<S, C>>,
    {
        let round = log.rounds.len();
        let mut outbox = Vec::new();
        for node in &self.nodes {
            for payload in emit(node) {
                for &neighbor in &node.neighbors {
                    outbox.push(Message {
                        src: node.id,
                        dst: neighbor,
                        round,
                        payload: payload.clone(),
                    });
                }
            }
        }
        let messages = self.route(outbox)?;
        log.rounds.push(RoundRecord {
            phase,
            round_in_phase,
            messages,
        });
        Ok(())
    }

    fn gradient_phase(&mut self, log: &mut RoundLog) -> Result<()> {
        self.broadcast_round(Phase::Gradient, 1, log, |node| {
            vec![Payload::Lambda(node.lambda)]
        })?;
        for node in &mut self.nodes {
            node.compute_flows_and_gradient()?;
        }
        Ok(())
    }

    fn direction_phase(&mut self, hops: usize, log: &mut RoundLog) -> Result<()> {
        for node in &mut self.nodes {
            let seed = node.scratch.gradient / node.scratch.degree_weight;
            node.scratch.series_prev = seed;
            node.scratch.series_sum = seed;
        }
        for term in 0..hops {
            self.broadcast_round(Phase::Direction, term + 1, log, move |node| {
                vec![Payload::SeriesTerm {
                    term,
                    value: node.scratch.series_prev,
                }]
            })?;
            for node in &mut self.nodes {
                node.fold_series_term();
            }
        }
        for node in &mut self.nodes {
            node.scratch.direction = -node.scratch.series_sum;
        }
        Ok(())
    }

    fn linesearch_phase(
        &mut self,
        params: &LineSearchParams<S>,
        log: &mut RoundLog,
    ) -> Result<()> {
        let depth = params.hops + 2;
        for node in &mut self.nodes {
            node.seed_flood(depth);
        }
        for flood_round in 1..=depth {
            let round = log.rounds.len();
            let mut outbox = Vec::new();
            for node in &mut self.nodes {
                let payloads = std::mem::take(&mut node.scratch.relay);
                for (payload, came_from) in payloads {
                    for &neighbor in &node.neighbors {
                        if Some(neighbor) == came_from {
                            continue;
                        }
                        outbox.push(Message {
                            src: node.id,
                            dst: neighbor,
                            round,
                            payload: payload.clone(),
                        });
                    }
                }
            }
            let messages = self.route(outbox)?;
            log.rounds.push(RoundRecord {
                phase: Phase::LineSearchFlood,
                round_in_phase: flood_round,
                messages,
            });
        }
        for node in &mut self.nodes {
            node.run_local_backtracking(params, depth)?;
            node.scratch.consensus_min = node.scratch.alpha;
        }
        Ok(())
    }

    fn consensus_phase(&mut self, hops: usize, log: &mut RoundLog) -> Result<S> {
        let stages = self.diameter.div_ceil(hops).max(1);
        let mut round_in_phase = 0;
        for _stage in 0..stages {
            for hop in 0..hops {
                round_in_phase += 1;
                let ttl = hops - hop;
                self.broadcast_round(Phase::Consensus, round_in_phase, log, move |node| {
                    vec![Payload::ConsensusMin {
                        value: node.scratch.consensus_min,
                        ttl,
                    }]
                })?;
            }
        }
        let alpha = self.nodes[0].scratch.consensus_min;
        for node in &self.nodes {
            if node.scratch.consensus_min != alpha {
                return Err(Error::ProtocolFault(format!(
                    "consensus not reached within {stages} stages \
                     (node {} holds {}, node 0 holds {})",
                    node.id, node.scratch.consensus_min, alpha
                )));
            }
        }
        Ok(alpha)
    }
}

impl<S: Real, C: EdgeCost<S>> NodeState<S, C> {
    fn receive(&mut self, msg: Message<S, C>) {
        match msg.payload {
            Payload::Lambda(value) => {
                self.scratch.neighbor_lambda[msg.src] = Some(value);
            }
            Payload::SeriesTerm { value, .. } => {
                self.scratch.series_inbox[msg.src] = Some(value);
            }
            Payload::NodeInfo {
                origin,
                lambda,
                gradient,
                rate,
                ttl,
            } => {
                if self.scratch.node_records[origin].is_none() {
                    self.scratch.node_records[origin] = Some(NodeRecord {
                        lambda,
                        gradient,
                        rate,
                    });
                    if ttl > 1 {
                        self.scratch.relay.push((
                            Payload::NodeInfo {
                                origin,
                                lambda,
                                gradient,
                                rate,
                                ttl: ttl - 1,
                            },
                            Some(msg.src),
                        ));
                    }
                }
            }
            Payload::EdgeInfo {
                edge,
                tail,
                head,
                cost,
                ttl,
            } => {
                if self.scratch.edge_records[edge].is_none() {
                    self.scratch.edge_records[edge] = Some(EdgeRecord {
                        tail,
                        head,
                        cost: cost.clone(),
                    });
                    if ttl > 1 {
                        self.scratch.relay.push((
                            Payload::EdgeInfo {
                                edge,
                                tail,
                                head,
                                cost,
                                ttl: ttl - 1,
                            },
                            Some(msg.src),
                        ));
                    }
                }
            }
            Payload::ConsensusMin { value, .. } => {
                self.scratch.consensus_min = self.scratch.consensus_min.min(value);
            }
        }
    }

    fn seed_flood(&mut self, depth: usize) {
        self.scratch.node_records[self.id] = Some(NodeRecord {
            lambda: self.lambda,
            gradient: self.scratch.gradient,
            rate: self.rate,
        });
        let mut relay = vec![(
            Payload::NodeInfo {
                origin: self.id,
                lambda: self.lambda,
                gradient: self.scratch.gradient,
                rate: self.rate,
                ttl: depth,
            },
            None,
        )];
        for edge in &self.edges {
            let (tail, head) = if edge.leaves {
                (self.id, edge.other)
            } else {
                (edge.other, self.id)
            };
            self.scratch.edge_records[edge.edge_id] = Some(EdgeRecord {
                tail,
                head,
                cost: edge.cost.clone(),
            });
            relay.push((
                Payload::EdgeInfo {
                    edge: edge.edge_id,
                    tail,
                    head,
                    cost: edge.cost.clone(),
                    ttl: depth,
                },
                None,
            ));
        }
        self.scratch.relay = relay;
    }

    fn compute_flows_and_gradient(&mut self) -> Result<()> {
        let own = self.lambda;
        let mut degree_weight = S::zero();
        let mut divergence = S::zero();
        for edge in &mut self.edges {
            let other = self.scratch.neighbor_lambda[edge.other].ok_or_else(|| {
                Error::ProtocolFault(format!(
                    "node {} missing price of neighbor {}",
                    self.id, edge.other
                ))
            })?;
            let diff = if edge.leaves { own - other } else { other - own };
            edge.flow = edge.cost.inv_deriv(diff);
            edge.weight = S::one() / edge.cost.deriv2(edge.flow);
            degree_weight += edge.weight;
            if edge.leaves {
                divergence += edge.flow;
            } else {
                divergence -= edge.flow;
            }
        }
        if degree_weight <= S::zero() {
            return Err(Error::DegenerateInstance(format!(
                "node {} has nonpositive weight degree",
                self.id
            )));
        }
        self.scratch.degree_weight = degree_weight;
        self.scratch.gradient = divergence - self.rate;
        Ok(())
    }

    fn fold_series_term(&mut self) {
        let mut acc = S::zero();
        for edge in &self.edges {
            let term = self.scratch.series_inbox[edge.other]
                .expect("series term from every neighbor");
            acc += edge.weight * term;
        }
        let next = acc / self.scratch.degree_weight;
        for slot in &mut self.scratch.series_inbox {
            *slot = None;
        }
        self.scratch.series_prev = next;
        self.scratch.series_sum += next;
    }

    /// Offline per-node backtracking over the flooded local view.
    fn run_local_backtracking(&mut self, params: &LineSearchParams<S>, depth: usize) -> Result<()> {
        let view = LocalView::build(self, depth);
        let hops = params.hops;
        let hood = view.members_within(hops);
        let ball = view.members_within(hops + 1);

        // Hypothetical update: the series recursion compressed onto the
        // hood, rebuilt from flooded records only. Entries outside the
        // hood stay zero, which masks the recursion automatically.
        let mut update = vec![S::zero(); self.node_count];
        let mut prev = vec![S::zero(); self.node_count];
        for &j in &hood {
            let seed = view.node(j).gradient / view.degree(j);
            prev[j] = seed;
            update[j] = seed;
        }
        for _ in 0..hops {
            let mut next = vec![S::zero(); self.node_count];
            for &j in &hood {
                let mut acc = S::zero();
                for (other, weight) in view.weighted_neighbors(j) {
                    acc += weight * prev[other];
                }
                next[j] = acc / view.degree(j);
            }
            for &j in &hood {
                update[j] += next[j];
            }
            prev = next;
        }
        for value in &mut update {
            *value = -*value;
        }

        let rhs_sum: S = hood
            .iter()
            .map(|&j| update[j] * view.node(j).gradient)
            .sum();
        let base = view.ball_share_sum(&ball, &update, S::zero());
        let slack = sc::<S>(ARMIJO_SLACK);

        if update.iter().all(|&u| u == S::zero()) {
            self.scratch.alpha = S::one();
            self.scratch.backtracks = 0;
            return Ok(());
        }
        let mut alpha = S::one();
        let mut backtracks = 0u32;
        loop {
            let lhs = view.ball_share_sum(&ball, &update, alpha);
            let rhs = base + params.sigma * alpha * rhs_sum;
            if lhs <= rhs + slack {
                self.scratch.alpha = alpha;
                self.scratch.backtracks = backtracks;
                return Ok(());
            }
            if backtracks >= params.max_backtracks {
                return Err(Error::LineSearchFailure {
                    backtracks,
                    node: Some(self.id),
                    lhs: lhs.to_f64().unwrap_or(f64::NAN),
                    rhs: rhs.to_f64().unwrap_or(f64::NAN),
                });
            }
            alpha *= params.beta;
            backtracks += 1;
        }
    }
}

/// One node's flooded records, organized for offline evaluation. Edge
/// weights and weight degrees at the current prices are cached once.
struct LocalView<'a, S, C> {
    nodes: &'a [Option<NodeRecord<S>>],
    edges: &'a [Option<EdgeRecord<C>>],
    /// Per node: incident (edge id, other endpoint, leaves), edge-id order.
    incident: Vec<Vec<(usize, usize, bool)>>,
    /// Hop distance from the center, recovered by BFS over the records.
    dist: Vec<usize>,
    weights: Vec<S>,
    degrees: Vec<S>,
}

impl<'a, S: Real, C: EdgeCost<S>> LocalView<'a, S, C> {
    fn build(node: &'a NodeState<S, C>, depth: usize) -> Self {
        let node_records = &node.scratch.node_records;
        let edge_records = &node.scratch.edge_records;
        let mut incident: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); node.node_count];
        for (edge_id, record) in edge_records.iter().enumerate() {
            if let Some(record) = record {
                incident[record.tail].push((edge_id, record.head, true));
                incident[record.head].push((edge_id, record.tail, false));
            }
        }
        // The flood delivers every record along shortest paths, so a BFS
        // over the recorded subgraph recovers true hop distances up to
        // the flood depth.
        let mut dist = vec![usize::MAX; node.node_count];
        dist[node.id] = 0;
        let mut frontier = vec![node.id];
        for d in 1..=depth {
            let mut next = Vec::new();
            for &u in &frontier {
                for &(_, v, _) in &incident[u] {
                    if node_records[v].is_some() && dist[v] == usize::MAX {
                        dist[v] = d;
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        // Weights exist wherever both endpoint prices are known, which
        // covers every edge the evaluations below touch.
        let mut weights = vec![S::zero(); node.edge_count];
        for (edge_id, record) in edge_records.iter().enumerate() {
            if let Some(record) = record {
                if let (Some(tail), Some(head)) =
                    (&node_records[record.tail], &node_records[record.head])
                {
                    let flow = record.cost.inv_deriv(tail.lambda - head.lambda);
                    weights[edge_id] = S::one() / record.cost.deriv2(flow);
                }
            }
        }
        let mut degrees = vec![S::zero(); node.node_count];
        for (id, list) in incident.iter().enumerate() {
            let mut acc = S::zero();
            for &(edge_id, _, _) in list {
                acc += weights[edge_id];
            }
            degrees[id] = acc;
        }
        Self {
            nodes: node_records,
            edges: edge_records,
            incident,
            dist,
            weights,
            degrees,
        }
    }

    fn node(&self, id: usize) -> &NodeRecord<S> {
        self.nodes[id].as_ref().expect("record within flood reach")
    }

    fn members_within(&self, radius: usize) -> Vec<usize> {
        (0..self.dist.len())
            .filter(|&id| self.dist[id] <= radius)
            .collect()
    }

    fn degree(&self, id: usize) -> S {
        self.degrees[id]
    }

    fn weighted_neighbors(&self, id: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        self.incident[id]
            .iter()
            .map(|&(edge_id, other, _)| (other, self.weights[edge_id]))
    }

    fn price(&self, id: usize, update: &[S], alpha: S) -> S {
        self.node(id).lambda + alpha * update[id]
    }

    fn ball_share_sum(&self, ball: &[usize], update: &[S], alpha: S) -> S {
        ball.iter().map(|&j| self.share_at(j, update, alpha)).sum()
    }

    fn share_at(&self, id: usize, update: &[S], alpha: S) -> S {
        let record = self.node(id);
        let own = self.price(id, update, alpha);
        let mut cost_in = S::zero();
        let mut divergence = S::zero();
        for &(edge_id, other, leaves) in &self.incident[id] {
            let other_price = self.price(other, update, alpha);
            let diff = if leaves {
                own - other_price
            } else {
                other_price - own
            };
            let edge = self.edges[edge_id].as_ref().expect("edge record present");
            let flow = edge.cost.inv_deriv(diff);
            if leaves {
                divergence += flow;
            } else {
                divergence -= flow;
                cost_in += edge.cost.value(flow);
            }
        }
        -cost_in + own * (divergence - record.rate)
    }
}
