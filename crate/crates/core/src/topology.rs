//! Time-varying communication graphs, the superposition channel and the
//! orthogonal-transmission ledger.
//!
//! Agent `j` is an in-neighbour of `i` when the arc `(j, i)` is present, i.e.
//! `j` transmits to `i`. Every agent hears itself.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::planar::Vec2;
use crate::rng::{stream_rng, Stream};
use crate::stochastic::RowStochasticMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    arcs: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    /// Graph on `n` nodes with only the mandatory self-loops.
    pub fn with_self_loops(n: usize) -> Self {
        Self { n, arcs: (0..n).map(|i| (i, i)).collect() }
    }

    /// Builds a graph from `(from, to)` arcs; self-loops are always added.
    pub fn from_arcs(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut graph = Self::with_self_loops(n);
        for (from, to) in arcs {
            graph.add_arc(from, to)?;
        }
        Ok(graph)
    }

    pub fn add_arc(&mut self, from: usize, to: usize) -> Result<()> {
        if from >= self.n || to >= self.n {
            return Err(Error::Graph(format!("arc ({from}, {to}) out of range for {} nodes", self.n)));
        }
        self.arcs.insert((from, to));
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.arcs.contains(&(from, to))
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs.iter().copied()
    }

    pub fn in_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.arcs.iter().filter(move |(_, to)| *to == node).map(|(from, _)| *from)
    }

    /// Arcs between distinct nodes.
    pub fn non_self_arc_count(&self) -> usize {
        self.arcs.iter().filter(|(a, b)| a != b).count()
    }

    /// Every node reaches node 0 and is reached from it.
    pub fn is_strongly_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        self.reach_all(false) && self.reach_all(true)
    }

    fn reach_all(&self, reversed: bool) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &(a, b) in &self.arcs {
                let (src, dst) = if reversed { (b, a) } else { (a, b) };
                if src == node && !seen[dst] {
                    seen[dst] = true;
                    stack.push(dst);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Graph plus the unknown channel gains `ξ_ij ∈ (0, 1]` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    graph: DirectedGraph,
    /// Row-major; entry `i * n + j` is `ξ_ij` for receiver `i`, transmitter `j`.
    gains: Vec<f64>,
    instant: usize,
}

impl ChannelRealization {
    /// `gains[i * n + j]` must lie in `(0, 1]` on every arc `(j, i)`; entries
    /// off the arc set are ignored and stored as zero.
    pub fn new(graph: DirectedGraph, gains: Vec<f64>, instant: usize) -> Result<Self> {
        let n = graph.node_count();
        if gains.len() != n * n {
            return Err(Error::Dimension { expected: n * n, got: gains.len() });
        }
        for i in 0..n {
            if !graph.has_arc(i, i) {
                return Err(Error::Graph(format!("node {i} has no self-loop")));
            }
        }
        let mut stored = vec![0.0; n * n];
        for (from, to) in graph.arcs() {
            let value = gains[to * n + from];
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::Coefficient { from, to, value });
            }
            stored[to * n + from] = value;
        }
        Ok(Self { graph, gains: stored, instant })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn instant(&self) -> usize {
        self.instant
    }

    pub fn agent_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn gain(&self, receiver: usize, transmitter: usize) -> f64 {
        self.gains[receiver * self.agent_count() + transmitter]
    }

    /// Superimposed value `y_i = Σ_{j ∈ N_i} ξ_ij·α_j` for one scalar
    /// broadcast. `payload` is indexed by transmitter.
    pub fn superpose(&self, receiver: usize, payload: &[f64]) -> f64 {
        let n = self.agent_count();
        self.gains[receiver * n..(receiver + 1) * n]
            .iter()
            .zip(payload)
            .filter(|(g, _)| **g > 0.0)
            .map(|(g, a)| g * a)
            .sum()
    }

    /// Receiver-side normalized aggregate of a planar broadcast.
    ///
    /// Each component travels on its own orthogonal channel and a third
    /// channel carries the constant 1; the ratio of the superimposed values
    /// is a convex combination of the neighbours' payloads.
    pub fn normalized_aggregate(&self, receiver: usize, payload: &[Vec2]) -> Vec2 {
        let xs: Vec<f64> = payload.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = payload.iter().map(|p| p.y).collect();
        let ones = vec![1.0; payload.len()];
        let norm = self.superpose(receiver, &ones);
        Vec2::new(self.superpose(receiver, &xs) / norm, self.superpose(receiver, &ys) / norm)
    }

    /// `H_k` with `h_ij = ξ_ij / Σ_{l ∈ N_i} ξ_il` on arcs and zero elsewhere.
    pub fn effective_matrix(&self) -> RowStochasticMatrix {
        let n = self.agent_count();
        let mut entries = self.gains.clone();
        for row in entries.chunks_mut(n) {
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
        }
        RowStochasticMatrix::new(n, entries).expect("normalized gains are row-stochastic")
    }
}

/// Random topology generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyParams {
    /// Probability of each extra arc between distinct nodes.
    pub edge_probability: f64,
    /// Lower bound of the uniform channel-gain draw; the upper bound is 1.
    pub xi_min: f64,
    /// Seed every instant with a random Hamiltonian cycle.
    pub hamiltonian_cycle: bool,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self { edge_probability: 0.2, xi_min: 0.1, hamiltonian_cycle: true }
    }
}

impl TopologyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return Err(Error::config("topology.edge_probability", "must lie in [0, 1]"));
        }
        if !(self.xi_min > 0.0 && self.xi_min <= 1.0) {
            return Err(Error::config("topology.xi_min", "must lie in (0, 1]"));
        }
        if !self.hamiltonian_cycle && self.edge_probability == 0.0 {
            return Err(Error::config(
                "topology.edge_probability",
                "zero edge probability without a cycle backbone cannot be strongly connected",
            ));
        }
        Ok(())
    }
}

const MAX_REJECTION_DRAWS: usize = 10_000;

/// Draws `count` strongly connected realizations, deterministic in `seed`.
///
/// Graphs and gains come from separate streams; gains are drawn for every
/// ordered pair so the gain stream does not depend on the sampled arcs.
pub fn generate_topology_sequence(
    n: usize,
    count: usize,
    params: &TopologyParams,
    seed: u64,
) -> Result<Vec<ChannelRealization>> {
    if n < 2 {
        return Err(Error::config("agents", "at least two agents are required"));
    }
    if count == 0 {
        return Err(Error::config("horizon", "at least one communication instant is required"));
    }
    params.validate()?;
    let mut graph_rng = stream_rng(seed, Stream::Topology);
    let mut gain_rng = stream_rng(seed, Stream::Coefficients);
    let mut out = Vec::with_capacity(count);
    for instant in 0..count {
        let graph = draw_graph(n, params, &mut graph_rng)?;
        let gains: Vec<f64> = (0..n * n).map(|_| gain_rng.gen_range(params.xi_min..=1.0)).collect();
        out.push(ChannelRealization::new(graph, gains, instant)?);
    }
    Ok(out)
}

fn draw_graph<R: Rng>(n: usize, params: &TopologyParams, rng: &mut R) -> Result<DirectedGraph> {
    for _ in 0..MAX_REJECTION_DRAWS {
        let mut graph = DirectedGraph::with_self_loops(n);
        if params.hamiltonian_cycle {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for w in 0..n {
                graph.add_arc(order[w], order[(w + 1) % n])?;
            }
        }
        for from in 0..n {
            for to in 0..n {
                if from != to && rng.gen_bool(params.edge_probability) {
                    graph.add_arc(from, to)?;
                }
            }
        }
        if graph.is_strongly_connected() {
            return Ok(graph);
        }
    }
    Err(Error::config(
        "topology.edge_probability",
        "too small to draw a strongly connected graph",
    ))
}

/// Running count of orthogonal channels used by the over-the-air protocol and
/// by a node-to-node protocol carrying the same information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransmissionLedger {
    pub ota_count: u64,
    pub n2n_count: u64,
    pub instants: u64,
}

impl TransmissionLedger {
    /// One broadcast round: `payload_dim` components plus the normalization
    /// channel for the whole swarm, versus two channels per directed link.
    pub fn record_instant(&mut self, real: &ChannelRealization, payload_dim: usize) {
        assert!(payload_dim >= 1, "payload dimension must be positive");
        self.instants += 1;
        self.ota_count += payload_dim as u64 + 1;
        self.n2n_count += 2 * real.graph().non_self_arc_count() as u64;
    }
}
