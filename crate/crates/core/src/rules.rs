//! Per-round update matrices for every rule, plus the degree-learning state.
//!
//! All rules produce row-stochastic-in-sum matrices (rows sum to 1), but only
//! some keep every entry non-negative. The two learning rules thread a
//! [`LearningState`] and differ in one load-bearing detail: the max-degree
//! tracker is raised *before* the MaxWeight matrix is formed and *after* the
//! MaxMetropolis matrix is formed. That ordering is exactly what makes the
//! former convex in every round and the latter occasionally expansive.

use nalgebra::{DMatrix, DVector};

use crate::graph::Graph;

/// Dense n×n update matrix. Rows always sum to 1; off-diagonal entries are
/// nonzero only on edges of the generating graph.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMatrix {
    inner: DMatrix<f64>,
}

impl UpdateMatrix {
    /// Wrap a square matrix, checking the affine row-sum property.
    pub fn new(inner: DMatrix<f64>) -> Self {
        assert!(inner.is_square(), "update matrix must be square");
        for i in 0..inner.nrows() {
            let sum: f64 = inner.row(i).iter().sum();
            assert!(
                (sum - 1.0).abs() <= 1e-12,
                "row {i} sums to {sum}, expected 1"
            );
        }
        UpdateMatrix { inner }
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// x(t) = A · x(t−1).
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n(), "vector length {} != matrix size {}", x.len(), self.n());
        &self.inner * x
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.inner.row(i).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.inner.column(j).iter().sum()).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.inner.iter().all(|&a| a >= 0.0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.inner[(i, j)] - self.inner[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Rows sum to 1 by construction; this additionally checks columns.
    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.is_nonnegative() && self.column_sums().iter().all(|s| (s - 1.0).abs() <= tol)
    }

    /// Whether the nonzero off-diagonal pattern equals the proper edges of `g`.
    pub fn supports_graph(&self, g: &Graph) -> bool {
        if g.n() != self.n() {
            return false;
        }
        for i in 0..self.n() {
            for j in 0..self.n() {
                if i != j && (self.inner[(i, j)] != 0.0) != g.has_edge(i, j) {
                    return false;
                }
            }
        }
        true
    }

    /// Strong connectivity of the associated graph (nonzero pattern).
    pub fn is_irreducible(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(v) = queue.pop() {
            for (w, visited) in seen.iter_mut().enumerate() {
                if !*visited && self.inner[(v, w)] != 0.0 {
                    *visited = true;
                    queue.push(w);
                }
            }
        }
        // Off-diagonal support is symmetric for every rule here, so one BFS
        // settles strong connectivity.
        seen.into_iter().all(|s| s)
    }
}

/// Running maximum degree per agent, the single learned parameter.
///
/// Starts at 2 for every agent and only ever moves up, capped by n in any
/// valid round graph (a single-agent system keeps the initial 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningState {
    d_prime: Vec<usize>,
}

impl LearningState {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "learning state needs at least one agent");
        LearningState { d_prime: vec![2; n] }
    }

    pub fn n(&self) -> usize {
        self.d_prime.len()
    }

    pub fn d_prime(&self) -> &[usize] {
        &self.d_prime
    }

    pub fn d_prime_sum(&self) -> usize {
        self.d_prime.iter().sum()
    }

    /// Raise every tracker to the round's degree. Returns true when any
    /// component grew, i.e. when the round is a learning round.
    pub fn observe(&mut self, g: &Graph) -> bool {
        assert_eq!(g.n(), self.n(), "graph size {} != state size {}", g.n(), self.n());
        let mut changed = false;
        for i in 0..self.n() {
            let d = g.degree(i);
            if d > self.d_prime[i] {
                self.d_prime[i] = d;
                changed = true;
            }
        }
        changed
    }
}

fn assert_class_g(g: &Graph) {
    if let Err(violation) = g.validate_class_g() {
        panic!("rule requires a valid round graph: {violation}");
    }
}

/// Unweighted neighborhood averaging: entry (i, j) is 1/dᵢ on the closed
/// neighborhood of i.
pub fn equal_neighbor(g: &Graph) -> UpdateMatrix {
    assert_class_g(g);
    let n = g.n();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = 1.0 / g.degree(i) as f64;
        for j in g.neighbors(i) {
            m[(i, j)] = w;
        }
    }
    UpdateMatrix::new(m)
}

/// Pairwise-minimum symmetrization: off-diagonal min(aᵢⱼ, aⱼᵢ), diagonal
/// topped up so rows still sum to 1. Requires a non-negative stochastic
/// input; the output is symmetric and doubly stochastic.
pub fn metropolis_symmetrize(a: &UpdateMatrix) -> UpdateMatrix {
    assert!(
        a.is_nonnegative(),
        "symmetrization requires non-negative entries"
    );
    let n = a.n();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = a.get(i, j).min(a.get(j, i));
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    UpdateMatrix::new(m)
}

/// Symmetrized neighborhood averaging: neighbor weight 1/max(dᵢ, dⱼ) with
/// round-t degrees.
///
/// No local algorithm realizes this rule over arbitrary round graphs (an
/// agent cannot know its neighbors' current degrees in time), so the engine
/// only ever runs it through the matrix path.
pub fn metropolis(g: &Graph) -> UpdateMatrix {
    metropolis_symmetrize(&equal_neighbor(g))
}

/// Lazy averaging with fixed denominators: neighbor weight 1/qᵢ, diagonal
/// 1 − (dᵢ−1)/qᵢ. Small qᵢ is allowed and yields a negative diagonal; that
/// regime diverges on purpose in the experiments.
pub fn fixed_weight(g: &Graph, q: &[usize]) -> UpdateMatrix {
    assert_class_g(g);
    let n = g.n();
    assert_eq!(q.len(), n, "q has length {}, expected {}", q.len(), n);
    assert!(q.iter().all(|&qi| qi >= 1), "every qᵢ must be positive");
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = 1.0 / q[i] as f64;
        for j in g.neighbors(i) {
            if j != i {
                m[(i, j)] = w;
            }
        }
        m[(i, i)] = 1.0 - (g.degree(i) as f64 - 1.0) * w;
    }
    UpdateMatrix::new(m)
}

/// One MaxWeight round: raise the trackers to the current degrees *first*,
/// then build the fixed-weight matrix from the raised values.
///
/// Because the raise precedes the matrix, the diagonal is at least
/// 1/d′ᵢ > 0 and the matrix is convex in every round.
pub fn max_weight_step(g: &Graph, state: &mut LearningState) -> UpdateMatrix {
    assert_class_g(g);
    state.observe(g);
    fixed_weight(g, state.d_prime())
}

/// One MaxMetropolis round: build the symmetric matrix from the *previous*
/// trackers (the values agents had already exchanged), then raise them.
///
/// Neighbor weight is 1/max(d′ᵢ, d′ⱼ) over the old state; the diagonal can
/// go negative in a learning round, which is the price of keeping the matrix
/// symmetric with strictly local information.
pub fn max_metropolis_step(g: &Graph, state: &mut LearningState) -> UpdateMatrix {
    assert_class_g(g);
    let n = g.n();
    assert_eq!(state.n(), n, "state size {} != graph size {}", state.n(), n);
    let old = state.d_prime().to_vec();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in g.neighbors(i) {
            if i < j {
                let w = 1.0 / old[i].max(old[j]) as f64;
                m[(i, j)] = w;
                m[(j, i)] = w;
            }
        }
    }
    for i in 0..n {
        let off: f64 = g.neighbors(i).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    state.observe(g);
    UpdateMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn assert_matrix_eq(m: &UpdateMatrix, expected: &[&[f64]], tol: f64) {
        assert_eq!(m.n(), expected.len());
        for (i, row) in expected.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                let got = m.get(i, j);
                assert!(
                    (got - want).abs() <= tol,
                    "entry ({i},{j}) = {got}, expected {want}"
                );
            }
        }
    }

    const THIRD: f64 = 1.0 / 3.0;

    #[test]
    fn equal_neighbor_on_path() {
        let m = equal_neighbor(&Graph::path(3));
        assert_matrix_eq(
            &m,
            &[
                &[0.5, 0.5, 0.0],
                &[THIRD, THIRD, THIRD],
                &[0.0, 0.5, 0.5],
            ],
            0.0,
        );
        assert!(m.supports_graph(&Graph::path(3)));
    }

    #[test]
    fn equal_neighbor_on_complete_and_singleton() {
        let m = equal_neighbor(&Graph::complete(4));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), 0.25);
            }
        }
        let single = equal_neighbor(&Graph::from_proper_edges(1, &[]));
        assert_eq!(single.get(0, 0), 1.0);
    }

    #[test]
    fn symmetrization_of_path_equal_neighbor() {
        let m = metropolis_symmetrize(&equal_neighbor(&Graph::path(3)));
        assert_matrix_eq(
            &m,
            &[
                &[2.0 / 3.0, THIRD, 0.0],
                &[THIRD, THIRD, THIRD],
                &[0.0, THIRD, 2.0 / 3.0],
            ],
            1e-15,
        );
        assert!(m.is_doubly_stochastic(1e-12));
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn symmetrization_leaves_symmetric_input_unchanged() {
        let sym = metropolis(&Graph::path(4));
        let again = metropolis_symmetrize(&sym);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(sym.get(i, j), again.get(i, j));
            }
        }
        let id = UpdateMatrix::new(DMatrix::identity(3, 3));
        let id2 = metropolis_symmetrize(&id);
        assert_eq!(id2.as_matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn symmetrization_raises_diagonal() {
        let a = equal_neighbor(&Graph::star(5, 0));
        let m = metropolis_symmetrize(&a);
        for i in 0..5 {
            assert!(m.get(i, i) >= a.get(i, i) - 1e-15);
        }
    }

    #[test]
    #[should_panic(expected = "non-negative")]
    fn symmetrization_rejects_negative_entries() {
        let fw = fixed_weight(&Graph::star(4, 0), &[2, 2, 2, 2]);
        metropolis_symmetrize(&fw);
    }

    #[test]
    fn metropolis_weights_use_round_degrees() {
        let m = metropolis(&Graph::path(3));
        assert_matrix_eq(
            &m,
            &[
                &[2.0 / 3.0, THIRD, 0.0],
                &[THIRD, THIRD, THIRD],
                &[0.0, THIRD, 2.0 / 3.0],
            ],
            1e-15,
        );
        // star n=4: hub↔leaf weight 1/max(4,2) = 1/4
        let star = metropolis(&Graph::star(4, 0));
        for leaf in 1..4 {
            assert_eq!(star.get(0, leaf), 0.25);
            assert_eq!(star.get(leaf, 0), 0.25);
            assert_eq!(star.get(leaf, leaf), 0.75);
        }
        assert_eq!(star.get(0, 0), 0.25);
        let kn = metropolis(&Graph::complete(5));
        assert!(kn.as_matrix().iter().all(|&a| (a - 0.2).abs() < 1e-15));
    }

    #[test]
    fn fixed_weight_matches_hand_values() {
        let m = fixed_weight(&Graph::path(3), &[3, 3, 3]);
        assert_matrix_eq(
            &m,
            &[
                &[2.0 / 3.0, THIRD, 0.0],
                &[THIRD, THIRD, THIRD],
                &[0.0, THIRD, 2.0 / 3.0],
            ],
            1e-15,
        );
        // q_i = d_i reduces to EqualNeighbor.
        let g = Graph::star(5, 2);
        let q = g.degrees();
        let fw = fixed_weight(&g, &q);
        let en = equal_neighbor(&g);
        for i in 0..5 {
            for j in 0..5 {
                assert!((fw.get(i, j) - en.get(i, j)).abs() <= 1e-15);
            }
        }
        // Breaking the degree condition drives the hub diagonal negative.
        let bad = fixed_weight(&Graph::star(4, 0), &[2, 2, 2, 2]);
        assert_eq!(bad.get(0, 0), -0.5);
        assert!((bad.row_sums()[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn max_weight_raises_state_before_matrix() {
        let mut state = LearningState::new(3);
        let m = max_weight_step(&Graph::path(3), &mut state);
        assert_eq!(state.d_prime(), &[2, 3, 2]);
        let en = equal_neighbor(&Graph::path(3));
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.get(i, j) - en.get(i, j)).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn max_weight_keeps_learned_maximum() {
        let mut state = LearningState::new(3);
        max_weight_step(&Graph::complete(3), &mut state);
        assert_eq!(state.d_prime(), &[3, 3, 3]);
        let m = max_weight_step(&Graph::path(3), &mut state);
        assert_eq!(state.d_prime(), &[3, 3, 3]);
        assert_matrix_eq(
            &m,
            &[
                &[2.0 / 3.0, THIRD, 0.0],
                &[THIRD, THIRD, THIRD],
                &[0.0, THIRD, 2.0 / 3.0],
            ],
            1e-15,
        );
    }

    #[test]
    fn max_weight_on_complete_graph_is_uniform() {
        let n = 6;
        let mut state = LearningState::new(n);
        for _ in 0..3 {
            let m = max_weight_step(&Graph::complete(n), &mut state);
            assert_eq!(state.d_prime(), &vec![n; n][..]);
            assert!(m.as_matrix().iter().all(|&a| (a - 1.0 / n as f64).abs() < 1e-15));
        }
    }

    #[test]
    fn max_weight_is_always_convex() {
        let mut state = LearningState::new(5);
        for g in [Graph::star(5, 0), Graph::path(5), Graph::complete(5)] {
            let m = max_weight_step(&g, &mut state);
            assert!(m.is_nonnegative());
            for i in 0..5 {
                assert!(m.get(i, i) >= 1.0 / 5.0 - 1e-15);
            }
        }
    }

    #[test]
    fn max_metropolis_uses_old_state_then_learns() {
        let mut state = LearningState::new(4);
        let m = max_metropolis_step(&Graph::star(4, 0), &mut state);
        // Weights from the old trackers (all 2): hub↔leaf 1/2, hub diagonal −1/2.
        for leaf in 1..4 {
            assert_eq!(m.get(0, leaf), 0.5);
            assert_eq!(m.get(leaf, 0), 0.5);
            assert_eq!(m.get(leaf, leaf), 0.5);
        }
        assert_eq!(m.get(0, 0), -0.5);
        assert_eq!(state.d_prime(), &[4, 2, 2, 2]);
        assert!(m.is_symmetric(0.0));
        for s in m.column_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn max_metropolis_is_convex_once_settled() {
        let mut state = LearningState::new(4);
        max_metropolis_step(&Graph::star(4, 0), &mut state);
        max_metropolis_step(&Graph::complete(4), &mut state);
        assert_eq!(state.d_prime(), &[4, 4, 4, 4]);
        let m = max_metropolis_step(&Graph::star(4, 1), &mut state);
        assert!(m.is_nonnegative());
        assert!(m.is_doubly_stochastic(1e-12));
    }

    #[test]
    fn max_metropolis_singleton_is_identity() {
        let mut state = LearningState::new(1);
        let m = max_metropolis_step(&Graph::from_proper_edges(1, &[]), &mut state);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(state.d_prime(), &[2]);
    }

    #[test]
    fn learning_state_is_monotone() {
        let mut state = LearningState::new(4);
        let before = state.d_prime().to_vec();
        let changed = state.observe(&Graph::cycle(4));
        assert!(changed);
        for (a, b) in before.iter().zip(state.d_prime()) {
            assert!(b >= a);
        }
        let snapshot = state.d_prime().to_vec();
        let changed_again = state.observe(&Graph::cycle(4));
        assert!(!changed_again);
        assert_eq!(state.d_prime(), &snapshot[..]);
    }

    #[test]
    #[should_panic(expected = "valid round graph")]
    fn rules_reject_invalid_graphs() {
        equal_neighbor(&Graph::empty(3));
    }
}
