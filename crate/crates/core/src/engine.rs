//! Round-synchronous execution, two ways.
//!
//! [`run_agents`] drives local state machines through the broadcast →
//! receive → transition → output loop, with each agent seeing nothing but
//! the multiset of messages its round neighbors sent. [`run_matrix`] evolves
//! the estimate vector by per-round matrix products. The two paths compute
//! the same numbers by different arithmetic, which makes their agreement a
//! meaningful end-to-end check rather than a tautology.
//!
//! Agents are anonymous: transitions reduce the inbox by sums, so delivery
//! order cannot matter beyond floating-point roundoff. [`Delivery::Shuffled`]
//! exists to test exactly that.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::seq::SliceRandom;

use crate::graph::{round_rng, DynamicGraphModel};
use crate::rules::{
    equal_neighbor, fixed_weight, max_metropolis_step, max_weight_step, metropolis,
    LearningState, UpdateMatrix,
};
use crate::spectral::diameter;

/// Algorithms with a local implementation.
///
/// The symmetrized round-degree rule is deliberately absent: its weights
/// need neighbors' current degrees, which no agent can know in time over an
/// arbitrary dynamic graph, so it exists only as a matrix rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    EqualNeighbor,
    MaxWeight,
    MaxMetropolis,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::EqualNeighbor => "equal-neighbor",
            Algorithm::MaxWeight => "max-weight",
            Algorithm::MaxMetropolis => "max-metropolis",
        }
    }
}

/// Rules available to the matrix path; a superset of [`Algorithm`].
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixRule {
    EqualNeighbor,
    Metropolis,
    FixedWeight(Vec<usize>),
    MaxWeight,
    MaxMetropolis,
}

impl From<Algorithm> for MatrixRule {
    fn from(a: Algorithm) -> Self {
        match a {
            Algorithm::EqualNeighbor => MatrixRule::EqualNeighbor,
            Algorithm::MaxWeight => MatrixRule::MaxWeight,
            Algorithm::MaxMetropolis => MatrixRule::MaxMetropolis,
        }
    }
}

/// One broadcast payload: the estimate, plus the degree tracker for the
/// algorithm that shares it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub x: f64,
    pub q: Option<usize>,
}

/// Inbox ordering for the agent path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    /// Messages arrive in ascending sender index (the default; keeps the
    /// agent and matrix paths summing in the same order).
    Ascending,
    /// Messages arrive in a seeded random order per (round, agent); traces
    /// must agree with the ascending ones up to roundoff.
    Shuffled { seed: u64 },
}

enum AgentCore {
    EqualNeighbor { x: f64 },
    MaxWeight { x: f64, q: usize },
    MaxMetropolis { x: f64, q: usize },
}

impl AgentCore {
    fn new(algorithm: Algorithm, input: f64) -> Self {
        match algorithm {
            Algorithm::EqualNeighbor => AgentCore::EqualNeighbor { x: input },
            Algorithm::MaxWeight => AgentCore::MaxWeight { x: input, q: 2 },
            Algorithm::MaxMetropolis => AgentCore::MaxMetropolis { x: input, q: 2 },
        }
    }

    fn send(&self) -> Message {
        match self {
            AgentCore::EqualNeighbor { x } | AgentCore::MaxWeight { x, .. } => {
                Message { x: *x, q: None }
            }
            AgentCore::MaxMetropolis { x, q } => Message { x: *x, q: Some(*q) },
        }
    }

    fn transition(&mut self, inbox: &[Message]) {
        let received = inbox.len();
        debug_assert!(received >= 1, "reflexive graphs deliver at least the own message");
        match self {
            AgentCore::EqualNeighbor { x } => {
                let sum: f64 = inbox.iter().map(|m| m.x).sum();
                *x = sum / received as f64;
            }
            AgentCore::MaxWeight { x, q } => {
                *q = (*q).max(received);
                let pull: f64 = inbox.iter().map(|m| m.x - *x).sum();
                *x += pull / *q as f64;
            }
            AgentCore::MaxMetropolis { x, q } => {
                let own = *x;
                let own_q = *q;
                let pull: f64 = inbox
                    .iter()
                    .map(|m| {
                        let peer_q = m.q.expect("max-metropolis messages carry the tracker");
                        (m.x - own) / own_q.max(peer_q) as f64
                    })
                    .sum();
                *x = own + pull;
                *q = own_q.max(received);
            }
        }
    }

    fn output(&self) -> f64 {
        match self {
            AgentCore::EqualNeighbor { x }
            | AgentCore::MaxWeight { x, .. }
            | AgentCore::MaxMetropolis { x, .. } => *x,
        }
    }
}

/// Full record of one execution.
///
/// `estimates[t]` is the round-`t` output vector (`estimates[0]` is the
/// input), `d_prime_history[t]` the running maximum degrees after round `t`,
/// and `learning_rounds` the rounds in which some tracker grew. The matrix
/// path additionally stores its per-round matrices.
#[derive(Debug, Clone)]
pub struct Trace {
    mu: DVector<f64>,
    estimates: Vec<DVector<f64>>,
    d_prime_history: Vec<Vec<usize>>,
    learning_rounds: BTreeSet<u64>,
    matrices: Option<Vec<UpdateMatrix>>,
}

impl Trace {
    fn new(mu: DVector<f64>, with_matrices: bool) -> Self {
        let n = mu.len();
        Trace {
            estimates: vec![mu.clone()],
            mu,
            d_prime_history: vec![vec![2; n]],
            learning_rounds: BTreeSet::new(),
            matrices: if with_matrices { Some(Vec::new()) } else { None },
        }
    }

    fn push_round(
        &mut self,
        t: u64,
        x: DVector<f64>,
        d_prime: Vec<usize>,
        learned: bool,
        matrix: Option<UpdateMatrix>,
    ) {
        self.estimates.push(x);
        self.d_prime_history.push(d_prime);
        if learned {
            self.learning_rounds.insert(t);
        }
        if let (Some(store), Some(m)) = (self.matrices.as_mut(), matrix) {
            store.push(m);
        }
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Number of executed rounds (the trace holds `horizon() + 1` vectors).
    pub fn horizon(&self) -> u64 {
        (self.estimates.len() - 1) as u64
    }

    pub fn input(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn estimate(&self, t: u64) -> &DVector<f64> {
        &self.estimates[t as usize]
    }

    pub fn estimates(&self) -> &[DVector<f64>] {
        &self.estimates
    }

    pub fn d_prime(&self, t: u64) -> &[usize] {
        &self.d_prime_history[t as usize]
    }

    /// Trackers after the final round.
    pub fn realized_d_prime(&self) -> &[usize] {
        self.d_prime_history.last().expect("trace holds round 0")
    }

    pub fn learning_rounds(&self) -> &BTreeSet<u64> {
        &self.learning_rounds
    }

    pub fn matrices(&self) -> Option<&[UpdateMatrix]> {
        self.matrices.as_deref()
    }

    pub fn diameters(&self) -> Vec<f64> {
        self.estimates.iter().map(diameter).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.estimates
            .iter()
            .map(|x| x.iter().sum::<f64>() / x.len() as f64)
            .collect()
    }
}

/// Execute a local algorithm over the model for `rounds` rounds.
pub fn run_agents(
    algorithm: Algorithm,
    model: &DynamicGraphModel,
    mu: &DVector<f64>,
    rounds: u64,
) -> Trace {
    run_agents_with_delivery(algorithm, model, mu, rounds, Delivery::Ascending)
}

/// [`run_agents`] with an explicit inbox ordering.
pub fn run_agents_with_delivery(
    algorithm: Algorithm,
    model: &DynamicGraphModel,
    mu: &DVector<f64>,
    rounds: u64,
    delivery: Delivery,
) -> Trace {
    let n = model.n();
    assert_eq!(mu.len(), n, "input length {} != system size {}", mu.len(), n);
    let mut agents: Vec<AgentCore> = mu.iter().map(|&m| AgentCore::new(algorithm, m)).collect();
    let mut observer = LearningState::new(n);
    let mut trace = Trace::new(mu.clone(), false);
    for t in 1..=rounds {
        let g = model.generate(t);
        let outbox: Vec<Message> = agents.iter().map(AgentCore::send).collect();
        for (i, agent) in agents.iter_mut().enumerate() {
            let mut inbox: Vec<Message> = g.neighbors(i).map(|j| outbox[j]).collect();
            if let Delivery::Shuffled { seed } = delivery {
                let mut rng = round_rng(seed ^ i as u64, t);
                inbox.shuffle(&mut rng);
            }
            agent.transition(&inbox);
        }
        let x = DVector::from_iterator(n, agents.iter().map(AgentCore::output));
        let learned = observer.observe(&g);
        trace.push_round(t, x, observer.d_prime().to_vec(), learned, None);
    }
    trace
}

/// Evolve the estimate vector by per-round update matrices, storing them in
/// the trace.
pub fn run_matrix(
    rule: &MatrixRule,
    model: &DynamicGraphModel,
    mu: &DVector<f64>,
    rounds: u64,
) -> Trace {
    let n = model.n();
    assert_eq!(mu.len(), n, "input length {} != system size {}", mu.len(), n);
    if let MatrixRule::FixedWeight(q) = rule {
        assert_eq!(q.len(), n, "fixed weights length {} != system size {}", q.len(), n);
    }
    let mut state = LearningState::new(n);
    let mut x = mu.clone();
    let mut trace = Trace::new(mu.clone(), true);
    for t in 1..=rounds {
        let g = model.generate(t);
        let before = state.d_prime().to_vec();
        let a = match rule {
            MatrixRule::EqualNeighbor => {
                state.observe(&g);
                equal_neighbor(&g)
            }
            MatrixRule::Metropolis => {
                state.observe(&g);
                metropolis(&g)
            }
            MatrixRule::FixedWeight(q) => {
                state.observe(&g);
                fixed_weight(&g, q)
            }
            MatrixRule::MaxWeight => max_weight_step(&g, &mut state),
            MatrixRule::MaxMetropolis => max_metropolis_step(&g, &mut state),
        };
        let learned = state.d_prime() != before.as_slice();
        x = a.apply(&x);
        trace.push_round(t, x.clone(), state.d_prime().to_vec(), learned, Some(a));
    }
    trace
}

/// Largest entrywise difference over all rounds of two equally-shaped traces.
pub fn max_deviation(a: &Trace, b: &Trace) -> f64 {
    assert_eq!(a.n(), b.n(), "traces have different system sizes");
    assert_eq!(a.horizon(), b.horizon(), "traces have different horizons");
    let mut worst: f64 = 0.0;
    for (xa, xb) in a.estimates.iter().zip(&b.estimates) {
        worst = worst.max((xa - xb).amax());
    }
    worst
}

/// Whether two traces agree entrywise within `tol` over every round.
pub fn traces_agree(a: &Trace, b: &Trace, tol: f64) -> bool {
    max_deviation(a, b) <= tol
}
