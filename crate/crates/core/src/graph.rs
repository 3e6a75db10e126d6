//! Communication graphs and the dynamic-graph families that drive executions.
//!
//! Every round of an execution is shaped by one [`Graph`]: a reflexive,
//! bidirectional topology on `n` vertices. A [`DynamicGraphModel`] produces the
//! round-`t` graph deterministically, so an entire execution is a pure function
//! of the model parameters and the input vector.
//!
//! Vertices are `0..n`. The line-oriented text format (see [`parse_schedule`])
//! uses 1-based labels instead; conversion happens only at that boundary.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// One round's communication topology.
///
/// Edges are unordered pairs, so bidirectionality holds by construction.
/// Self-loops are stored explicitly: a vertex without one fails
/// [`Graph::validate_class_g`]. Immutable once built (all mutation happens
/// through constructors), hence freely shareable across threads.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<BTreeSet<usize>>,
}

impl Graph {
    /// Graph on `n` vertices with no edges at all, not even self-loops.
    pub fn empty(n: usize) -> Self {
        assert!(n >= 1, "graph needs at least one vertex");
        Graph {
            n,
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    /// Graph on `n` vertices with every self-loop and the given proper edges.
    pub fn from_proper_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            g.add_edge(i, i);
        }
        for &(i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    /// Path 0 – 1 – … – (n−1), self-loops included.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_proper_edges(n, &edges)
    }

    /// Cycle over `n` vertices (degenerates to a path for n ≤ 2).
    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n >= 3 {
            edges.push((n - 1, 0));
        }
        Graph::from_proper_edges(n, &edges)
    }

    /// Complete graph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Graph::from_proper_edges(n, &edges)
    }

    /// Star with the given hub joined to every other vertex.
    pub fn star(n: usize, hub: usize) -> Self {
        assert!(hub < n, "hub {hub} out of range for {n} vertices");
        let edges: Vec<_> = (0..n).filter(|&i| i != hub).map(|i| (hub, i)).collect();
        Graph::from_proper_edges(n, &edges)
    }

    /// Insert the unordered edge {i, j}; `i == j` stores a self-loop.
    pub fn add_edge(&mut self, i: usize, j: usize) {
        assert!(i < self.n && j < self.n, "edge ({i},{j}) out of range");
        self.adjacency[i].insert(j);
        self.adjacency[j].insert(i);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Count of neighbors of `i`, the self-loop included when present.
    pub fn degree(&self, i: usize) -> usize {
        assert!(i < self.n, "vertex {i} out of range for {} vertices", self.n);
        self.adjacency[i].len()
    }

    /// Neighbors of `i` in ascending order; contains `i` itself when the
    /// self-loop is present.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        assert!(i < self.n, "vertex {i} out of range for {} vertices", self.n);
        self.adjacency[i].iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        assert!(i < self.n && j < self.n, "edge ({i},{j}) out of range");
        self.adjacency[i].contains(&j)
    }

    /// Degrees of all vertices, in vertex order.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Proper edges {i, j} with i < j, sorted, self-loops excluded.
    pub fn proper_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for &j in &self.adjacency[i] {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether every vertex is reachable from vertex 0 (ignoring self-loops).
    pub fn is_connected(&self) -> bool {
        self.reachable_from(0).len() == self.n
    }

    fn reachable_from(&self, start: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut queue = vec![start];
        seen.insert(start);
        while let Some(v) = queue.pop() {
            for &w in &self.adjacency[v] {
                if seen.insert(w) {
                    queue.push(w);
                }
            }
        }
        seen
    }

    /// Check membership in the round-graph class: reflexive plus connected.
    ///
    /// Bidirectionality cannot be violated with unordered edges, so only the
    /// two remaining properties are examined. Violations come back as a
    /// report naming a witness, not as a panic: invalid graphs are legitimate
    /// inputs here.
    pub fn validate_class_g(&self) -> Result<(), ClassGViolation> {
        for i in 0..self.n {
            if !self.adjacency[i].contains(&i) {
                return Err(ClassGViolation::MissingSelfLoop { vertex: i });
            }
        }
        let component = self.reachable_from(0);
        if component.len() != self.n {
            let inside: Vec<usize> = component.iter().copied().collect();
            let outside: Vec<usize> = (0..self.n).filter(|v| !component.contains(v)).collect();
            return Err(ClassGViolation::Disconnected { inside, outside });
        }
        Ok(())
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, proper_edges={:?})", self.n, self.proper_edges())
    }
}

/// Why a graph is not a valid round graph, with a witness.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassGViolation {
    #[error("vertex {vertex} has no self-loop")]
    MissingSelfLoop { vertex: usize },
    #[error("graph is disconnected: component {inside:?} does not reach {outside:?}")]
    Disconnected {
        inside: Vec<usize>,
        outside: Vec<usize>,
    },
}

/// Parameter problems that make a model unable to produce valid round graphs.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model needs at least one vertex")]
    EmptyVertexSet,
    #[error("edge probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("rotation period must be at least 1")]
    ZeroPeriod,
    #[error("schedule contains no graphs")]
    EmptySchedule,
    #[error("schedule graph for round slot {slot} has {found} vertices, expected {expected}")]
    MixedSizes {
        slot: usize,
        expected: usize,
        found: usize,
    },
    #[error("graph for {context} is invalid: {violation}")]
    InvalidGraph {
        context: String,
        violation: ClassGViolation,
    },
    #[error("burst round must be at least 1")]
    ZeroBurstRound,
}

fn require_class_g(g: &Graph, context: &str) -> Result<(), ModelError> {
    g.validate_class_g().map_err(|violation| ModelError::InvalidGraph {
        context: context.to_string(),
        violation,
    })
}

/// Deterministic generator of the round-`t` communication graph.
///
/// `generate` is a pure function of the model and `t`: repeated calls with the
/// same arguments return identical graphs, and every produced graph passes
/// [`Graph::validate_class_g`].
#[derive(Debug, Clone)]
pub enum DynamicGraphModel {
    /// The same graph in every round.
    Static { graph: Graph },
    /// An explicit list of graphs, cycled when exhausted.
    Schedule { graphs: Vec<Graph> },
    /// Erdős–Rényi sample per round, resampled until connected (with a
    /// spanning-tree fallback after [`RANDOM_RETRY_CAP`] failures), then all
    /// self-loops added. Seeded per round, so rounds are independent.
    RandomConnected { n: usize, p: f64, seed: u64 },
    /// Star whose hub advances every `period` rounds, visiting every vertex.
    RotatingStar { n: usize, period: u64 },
    /// `base` in every round except `burst_round`, which yields `burst`.
    /// Useful for forcing degree growth arbitrarily late in an execution.
    DegreeBurst {
        base: Graph,
        burst_round: u64,
        burst: Graph,
    },
}

/// Rejection-sampling retry budget for [`DynamicGraphModel::RandomConnected`].
pub const RANDOM_RETRY_CAP: usize = 10_000;

impl DynamicGraphModel {
    pub fn new_static(graph: Graph) -> Result<Self, ModelError> {
        require_class_g(&graph, "static model")?;
        Ok(DynamicGraphModel::Static { graph })
    }

    pub fn new_schedule(graphs: Vec<Graph>) -> Result<Self, ModelError> {
        let first = graphs.first().ok_or(ModelError::EmptySchedule)?;
        let n = first.n();
        for (slot, g) in graphs.iter().enumerate() {
            if g.n() != n {
                return Err(ModelError::MixedSizes {
                    slot,
                    expected: n,
                    found: g.n(),
                });
            }
            require_class_g(g, &format!("schedule slot {slot}"))?;
        }
        Ok(DynamicGraphModel::Schedule { graphs })
    }

    pub fn new_random_connected(n: usize, p: f64, seed: u64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyVertexSet);
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::InvalidProbability(p));
        }
        Ok(DynamicGraphModel::RandomConnected { n, p, seed })
    }

    pub fn new_rotating_star(n: usize, period: u64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyVertexSet);
        }
        if period == 0 {
            return Err(ModelError::ZeroPeriod);
        }
        Ok(DynamicGraphModel::RotatingStar { n, period })
    }

    pub fn new_degree_burst(base: Graph, burst_round: u64, burst: Graph) -> Result<Self, ModelError> {
        if burst_round == 0 {
            return Err(ModelError::ZeroBurstRound);
        }
        require_class_g(&base, "degree-burst base")?;
        require_class_g(&burst, "degree-burst burst")?;
        if base.n() != burst.n() {
            return Err(ModelError::MixedSizes {
                slot: 0,
                expected: base.n(),
                found: burst.n(),
            });
        }
        Ok(DynamicGraphModel::DegreeBurst {
            base,
            burst_round,
            burst,
        })
    }

    /// Number of agents every produced graph has.
    pub fn n(&self) -> usize {
        match self {
            DynamicGraphModel::Static { graph } => graph.n(),
            DynamicGraphModel::Schedule { graphs } => graphs[0].n(),
            DynamicGraphModel::RandomConnected { n, .. } => *n,
            DynamicGraphModel::RotatingStar { n, .. } => *n,
            DynamicGraphModel::DegreeBurst { base, .. } => base.n(),
        }
    }

    /// The communication graph of round `t` (rounds start at 1).
    pub fn generate(&self, t: u64) -> Graph {
        assert!(t >= 1, "rounds are numbered from 1");
        match self {
            DynamicGraphModel::Static { graph } => graph.clone(),
            DynamicGraphModel::Schedule { graphs } => {
                let idx = ((t - 1) % graphs.len() as u64) as usize;
                graphs[idx].clone()
            }
            DynamicGraphModel::RandomConnected { n, p, seed } => {
                random_connected_graph(*n, *p, *seed, t)
            }
            DynamicGraphModel::RotatingStar { n, period } => {
                let hub = (((t - 1) / period) % *n as u64) as usize;
                Graph::star(*n, hub)
            }
            DynamicGraphModel::DegreeBurst {
                base,
                burst_round,
                burst,
            } => {
                if t == *burst_round {
                    burst.clone()
                } else {
                    base.clone()
                }
            }
        }
    }
}

/// Size-generic recipe for a dynamic graph model, instantiable at any agent
/// count. Sweeps use these to build one model per (family, n, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelFamily {
    StaticPath,
    StaticCycle,
    StaticComplete,
    StaticStar,
    RandomConnected { p: f64 },
    RotatingStar { period: u64 },
    /// Cycle base with a single complete-graph round, forcing every tracker
    /// to jump late in the execution.
    DegreeBurst { burst_round: u64 },
    /// Fixed list of graphs; only instantiable at their common size.
    Schedule { graphs: Vec<Graph> },
}

impl ModelFamily {
    pub fn instantiate(&self, n: usize, seed: u64) -> Result<DynamicGraphModel, ModelError> {
        match self {
            ModelFamily::StaticPath => DynamicGraphModel::new_static(Graph::path(n)),
            ModelFamily::StaticCycle => DynamicGraphModel::new_static(Graph::cycle(n)),
            ModelFamily::StaticComplete => DynamicGraphModel::new_static(Graph::complete(n)),
            ModelFamily::StaticStar => DynamicGraphModel::new_static(Graph::star(n, 0)),
            ModelFamily::RandomConnected { p } => {
                DynamicGraphModel::new_random_connected(n, *p, seed)
            }
            ModelFamily::RotatingStar { period } => {
                DynamicGraphModel::new_rotating_star(n, *period)
            }
            ModelFamily::DegreeBurst { burst_round } => {
                DynamicGraphModel::new_degree_burst(Graph::cycle(n), *burst_round, Graph::complete(n))
            }
            ModelFamily::Schedule { graphs } => {
                let model = DynamicGraphModel::new_schedule(graphs.clone())?;
                if model.n() != n {
                    return Err(ModelError::MixedSizes {
                        slot: 0,
                        expected: n,
                        found: model.n(),
                    });
                }
                Ok(model)
            }
        }
    }

    /// Stable name used in report tables.
    pub fn name(&self) -> String {
        match self {
            ModelFamily::StaticPath => "static-path".to_string(),
            ModelFamily::StaticCycle => "static-cycle".to_string(),
            ModelFamily::StaticComplete => "static-complete".to_string(),
            ModelFamily::StaticStar => "static-star".to_string(),
            ModelFamily::RandomConnected { p } => format!("random-connected(p={p})"),
            ModelFamily::RotatingStar { period } => format!("rotating-star(period={period})"),
            ModelFamily::DegreeBurst { burst_round } => format!("degree-burst(round={burst_round})"),
            ModelFamily::Schedule { graphs } => format!("schedule({} rounds)", graphs.len()),
        }
    }
}

/// SplitMix64 finalizer; decorrelates (seed, round) pairs into RNG streams.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for round `t` of the stream identified by `seed`.
pub fn round_rng(seed: u64, t: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed) ^ mix64(t.wrapping_mul(0x2545_f491_4f6c_dd1d)))
}

fn random_connected_graph(n: usize, p: f64, seed: u64, t: u64) -> Graph {
    let mut rng = round_rng(seed, t);
    for _ in 0..RANDOM_RETRY_CAP {
        let mut g = Graph::from_proper_edges(n, &[]);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    g.add_edge(i, j);
                }
            }
        }
        if g.is_connected() {
            return g;
        }
    }
    // Sparse p can make rejection hopeless; patch connectivity with a random
    // spanning tree on top of one more sample.
    let mut g = Graph::from_proper_edges(n, &[]);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                g.add_edge(i, j);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    for k in 1..n {
        let attach = rng.gen_range(0..k);
        g.add_edge(order[k], order[attach]);
    }
    g
}

/// Error for the line-oriented graph schedule format.
#[derive(Debug, Error)]
pub enum ScheduleParseError {
    #[error("line {line}: expected `n <count>` to open a round block, found {found:?}")]
    MissingHeader { line: usize, found: String },
    #[error("line {line}: malformed directive {found:?}")]
    Malformed { line: usize, found: String },
    #[error("line {line}: vertex {vertex} out of range 1..={n}")]
    VertexOutOfRange { line: usize, vertex: usize, n: usize },
    #[error("line {line}: edge endpoints must satisfy i < j")]
    BadEdgeOrder { line: usize },
    #[error("no round blocks found")]
    Empty,
}

/// Parse the round-schedule text format.
///
/// Each block is `n <count>` followed by `e <i> <j>` lines (1-based, i < j);
/// blank lines separate blocks. Self-loops are implicit and added to every
/// parsed graph.
pub fn parse_schedule(text: &str) -> Result<Vec<Graph>, ScheduleParseError> {
    let mut graphs = Vec::new();
    let mut current: Option<Graph> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            if let Some(g) = current.take() {
                graphs.push(g);
            }
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        match parts.next() {
            Some("n") => {
                if let Some(g) = current.take() {
                    graphs.push(g);
                }
                let count: usize = parts
                    .next()
                    .and_then(|tok| tok.parse().ok())
                    .filter(|&c| c >= 1)
                    .ok_or_else(|| ScheduleParseError::Malformed {
                        line,
                        found: trimmed.to_string(),
                    })?;
                if parts.next().is_some() {
                    return Err(ScheduleParseError::Malformed {
                        line,
                        found: trimmed.to_string(),
                    });
                }
                current = Some(Graph::from_proper_edges(count, &[]));
            }
            Some("e") => {
                let g = current
                    .as_mut()
                    .ok_or_else(|| ScheduleParseError::MissingHeader {
                        line,
                        found: trimmed.to_string(),
                    })?;
                let endpoint = |tok: Option<&str>| -> Result<usize, ScheduleParseError> {
                    let v: usize = tok
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| ScheduleParseError::Malformed {
                            line,
                            found: trimmed.to_string(),
                        })?;
                    if v < 1 || v > g.n() {
                        return Err(ScheduleParseError::VertexOutOfRange {
                            line,
                            vertex: v,
                            n: g.n(),
                        });
                    }
                    Ok(v)
                };
                let i = endpoint(parts.next())?;
                let j = endpoint(parts.next())?;
                if parts.next().is_some() {
                    return Err(ScheduleParseError::Malformed {
                        line,
                        found: trimmed.to_string(),
                    });
                }
                if i >= j {
                    return Err(ScheduleParseError::BadEdgeOrder { line });
                }
                g.add_edge(i - 1, j - 1);
            }
            _ => {
                return Err(ScheduleParseError::Malformed {
                    line,
                    found: trimmed.to_string(),
                })
            }
        }
    }
    if let Some(g) = current.take() {
        graphs.push(g);
    }
    if graphs.is_empty() {
        return Err(ScheduleParseError::Empty);
    }
    Ok(graphs)
}

/// Render one graph as a schedule block (1-based `e i j` lines, i < j,
/// self-loops omitted).
pub fn format_graph(g: &Graph) -> String {
    let mut out = format!("n {}\n", g.n());
    for (i, j) in g.proper_edges() {
        out.push_str(&format!("e {} {}\n", i + 1, j + 1));
    }
    out
}
