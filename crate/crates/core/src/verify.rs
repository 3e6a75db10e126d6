//! Randomized verification suites.
//!
//! Each suite draws a stream of cases from a seeded generator, runs one of
//! the numerical checkers or engine invariants, and reports a count of
//! failures with the first counterexample spelled out. The CLI `verify`
//! subcommand and the acceptance tests both run these.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    max_deviation, run_agents, run_matrix, Algorithm, MatrixRule,
};
use crate::graph::{mix64, DynamicGraphModel, Graph};
use crate::rules::{
    equal_neighbor, max_metropolis_step, max_weight_step, metropolis, LearningState, UpdateMatrix,
};
use crate::spectral::{
    check_contraction, check_contraction_mean_zero, check_dispersion_mean_zero, check_gap_bounds,
    check_variance_switch, check_weighted_dispersion, nu_bound, spectral_radius, WeightVector,
};

/// Tally of one suite run.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        SuiteOutcome {
            name,
            cases: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Connected graph with all self-loops: a uniform random spanning tree plus
/// p-dense extra edges. Always valid, unlike rejection sampling, so fuzz
/// cases never stall.
pub fn random_class_g_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut g = Graph::from_proper_edges(n, &[]);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    for k in 1..n {
        let attach = rng.gen_range(0..k);
        g.add_edge(order[k], order[attach]);
    }
    let p = rng.gen_range(0.0..0.6);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                g.add_edge(i, j);
            }
        }
    }
    g
}

fn random_weight_vector(rng: &mut ChaCha8Rng, n: usize) -> WeightVector {
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    WeightVector::normalized(&weights)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..1.0)))
}

fn random_size(rng: &mut ChaCha8Rng, n_max: usize) -> usize {
    rng.gen_range(2..=n_max.max(2))
}

/// Random matrix from the reversible family: the averaging rule or one
/// learning step from a random tracker state.
fn random_reversible_matrix(rng: &mut ChaCha8Rng, n: usize) -> UpdateMatrix {
    let g = random_class_g_graph(rng, n);
    if rng.gen_bool(0.5) {
        equal_neighbor(&g)
    } else {
        let mut state = random_learning_state(rng, n);
        max_weight_step(&g, &mut state)
    }
}

/// Random symmetric stochastic matrix with positive diagonal: the
/// symmetrized rule, or the learning rule after its trackers have settled.
fn random_symmetric_matrix(rng: &mut ChaCha8Rng, n: usize) -> UpdateMatrix {
    let g = random_class_g_graph(rng, n);
    if rng.gen_bool(0.5) {
        metropolis(&g)
    } else {
        let mut state = LearningState::new(n);
        state.observe(&g);
        max_metropolis_step(&g, &mut state)
    }
}

fn random_learning_state(rng: &mut ChaCha8Rng, n: usize) -> LearningState {
    let mut state = LearningState::new(n);
    if n >= 3 && rng.gen_bool(0.5) {
        // Pre-raise some trackers so matrices vary beyond the fresh state.
        let mut g = Graph::from_proper_edges(n, &[]);
        for _ in 0..rng.gen_range(0..2 * n) {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            g.add_edge(i, j);
        }
        for k in 1..n {
            g.add_edge(k - 1, k);
        }
        state.observe(&g);
    }
    state
}

fn suite_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed) ^ mix64(salt))
}

/// Var_{π′} v ≤ max ratio · Var_π v on random weights and vectors.
pub fn variance_switch_suite(n_max: usize, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 1);
    let mut outcome = SuiteOutcome::new("lemma-variance-switch");
    for case in 0..cases {
        let n = random_size(&mut rng, n_max);
        let pi = random_weight_vector(&mut rng, n);
        let pi_prime = random_weight_vector(&mut rng, n);
        let v = random_vector(&mut rng, n);
        let report = check_variance_switch(&pi, &pi_prime, &v);
        outcome.record(report.ok, || {
            format!("case {case}: n={n} lhs={} rhs={}", report.lhs, report.rhs)
        });
    }
    outcome
}

/// Dispersion sandwich in both the weighted and the mean-zero form, with a
/// near-consensus edge case mixed in.
pub fn dispersion_suite(n_max: usize, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 2);
    let mut outcome = SuiteOutcome::new("lemma-dispersion");
    for case in 0..cases {
        let n = random_size(&mut rng, n_max);
        let pi = random_weight_vector(&mut rng, n);
        let mut v = random_vector(&mut rng, n);
        if case % 17 == 0 {
            // Near-consensus: offsets of about 1e-9 around a common value.
            let base = rng.gen_range(-1.0..1.0);
            v = DVector::from_iterator(
                n,
                (0..n).map(|_| base + rng.gen_range(-1e-9..1e-9)),
            );
        }
        let weighted = check_weighted_dispersion(&pi, &v);
        let mean = v.iter().sum::<f64>() / n as f64;
        let centered = v.add_scalar(-mean);
        let unweighted = check_dispersion_mean_zero(&centered);
        outcome.record(weighted.ok() && unweighted.ok(), || {
            format!("case {case}: n={n} weighted={weighted:?} mean-zero={unweighted:?}")
        });
    }
    outcome
}

/// Variance contraction under reversible matrices and norm contraction under
/// symmetric ones.
pub fn contraction_suite(n_max: usize, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 3);
    let mut outcome = SuiteOutcome::new("lemma-contraction");
    for case in 0..cases {
        let n = random_size(&mut rng, n_max);
        let ok = if case % 2 == 0 {
            let a = random_reversible_matrix(&mut rng, n);
            let v = random_vector(&mut rng, n);
            check_contraction(&a, &v).map(|r| r.ok)
        } else {
            let a = random_symmetric_matrix(&mut rng, n);
            let v = random_vector(&mut rng, n);
            let mean = v.iter().sum::<f64>() / n as f64;
            check_contraction_mean_zero(&a, &v.add_scalar(-mean)).map(|r| r.ok)
        };
        match ok {
            Ok(ok) => outcome.record(ok, || format!("case {case}: n={n} inequality violated")),
            Err(e) => outcome.record(false, || format!("case {case}: precondition lost: {e}")),
        }
    }
    outcome
}

/// Spectral-gap lower bounds from smallest entries, weighted and unweighted.
pub fn gap_bounds_suite(n_max: usize, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 4);
    let mut outcome = SuiteOutcome::new("lemma-gap-bounds");
    for case in 0..cases {
        let n = random_size(&mut rng, n_max);
        let a = if case % 2 == 0 {
            random_reversible_matrix(&mut rng, n)
        } else {
            random_symmetric_matrix(&mut rng, n)
        };
        match check_gap_bounds(&a) {
            Ok(report) => outcome.record(report.ok, || {
                format!(
                    "case {case}: n={n} gamma={} alpha_bound={} min_entry_bound={:?}",
                    report.gamma, report.alpha_bound, report.min_entry_bound
                )
            }),
            Err(e) => outcome.record(false, || format!("case {case}: precondition lost: {e}")),
        }
    }
    outcome
}

/// ρ(A) ≤ ν² for symmetric learning-phase matrices, negative diagonals
/// included, plus radius 1 for the settled non-negative ones.
pub fn nu_radius_suite(n_max: usize, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 5);
    let mut outcome = SuiteOutcome::new("nu-radius-bound");
    for case in 0..cases {
        let n = random_size(&mut rng, n_max);
        let g = random_class_g_graph(&mut rng, n);
        let mut state = random_learning_state(&mut rng, n);
        let a = max_metropolis_step(&g, &mut state);
        let b = nu_bound(&a);
        let rho = spectral_radius(&a);
        let ok = rho <= b.radius_bound + 1e-9
            && (b.nu > 1.0 || (rho - 1.0).abs() <= 1e-9);
        outcome.record(ok, || {
            format!("case {case}: n={n} rho={rho} nu={} bound={}", b.nu, b.radius_bound)
        });
    }
    outcome
}

/// Agent-path and matrix-path traces agree entrywise within `tol`.
pub fn equivalence_suite(
    n_max: usize,
    executions: usize,
    rounds: u64,
    tol: f64,
    seed: u64,
) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 6);
    let mut outcome = SuiteOutcome::new("agent-matrix-equivalence");
    let algorithms = [
        Algorithm::EqualNeighbor,
        Algorithm::MaxWeight,
        Algorithm::MaxMetropolis,
    ];
    for case in 0..executions {
        let n = random_size(&mut rng, n_max);
        let model = random_model(&mut rng, n);
        let mu = random_vector(&mut rng, n);
        let algorithm = algorithms[case % algorithms.len()];
        let a = run_agents(algorithm, &model, &mu, rounds);
        let b = run_matrix(&algorithm.into(), &model, &mu, rounds);
        let deviation = max_deviation(&a, &b);
        outcome.record(deviation <= tol, || {
            format!("case {case}: {algorithm:?} n={n} deviation={deviation:e}")
        });
    }
    outcome
}

/// Symmetrized-rule matrices are exactly symmetric and doubly stochastic.
pub fn double_stochasticity_suite(n_max: usize, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 7);
    let mut outcome = SuiteOutcome::new("double-stochasticity");
    for case in 0..cases {
        let n = random_size(&mut rng, n_max);
        let g = random_class_g_graph(&mut rng, n);
        let a = if case % 2 == 0 {
            metropolis(&g)
        } else {
            let mut state = LearningState::new(n);
            state.observe(&g);
            max_metropolis_step(&g, &mut state)
        };
        let ok = a.is_symmetric(1e-15)
            && a.column_sums().iter().all(|s| (s - 1.0).abs() <= 1e-12)
            && a.is_nonnegative()
            && a.supports_graph(&g);
        outcome.record(ok, || format!("case {case}: n={n} matrix broke an invariant"));
    }
    outcome
}

/// The estimate average is invariant under the symmetric rules.
pub fn conservation_suite(
    n_max: usize,
    executions: usize,
    rounds: u64,
    seed: u64,
) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 8);
    let mut outcome = SuiteOutcome::new("average-conservation");
    for case in 0..executions {
        let n = random_size(&mut rng, n_max);
        let model = random_model(&mut rng, n);
        let mu = random_vector(&mut rng, n);
        let trace = if case % 2 == 0 {
            run_agents(Algorithm::MaxMetropolis, &model, &mu, rounds)
        } else {
            run_matrix(&MatrixRule::Metropolis, &model, &mu, rounds)
        };
        let target = mu.iter().sum::<f64>() / n as f64;
        let worst = trace
            .means()
            .iter()
            .map(|m| (m - target).abs())
            .fold(0.0_f64, f64::max);
        outcome.record(worst <= 1e-9, || {
            format!("case {case}: n={n} mean drifted by {worst:e}")
        });
    }
    outcome
}

/// Stochastic matrices have unit spectral radius.
pub fn radius_one_suite(n_max: usize, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = suite_rng(seed, 9);
    let mut outcome = SuiteOutcome::new("spectral-radius-one");
    for case in 0..cases {
        let n = random_size(&mut rng, n_max);
        let a = if case % 2 == 0 {
            random_reversible_matrix(&mut rng, n)
        } else {
            random_symmetric_matrix(&mut rng, n)
        };
        let rho = spectral_radius(&a);
        outcome.record((rho - 1.0).abs() <= 1e-9, || {
            format!("case {case}: n={n} rho={rho}")
        });
    }
    outcome
}

/// Random dynamic model drawn from the generator families.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize) -> DynamicGraphModel {
    match rng.gen_range(0..4u8) {
        0 => DynamicGraphModel::new_static(random_class_g_graph(rng, n)).expect("valid by construction"),
        1 => {
            let len = rng.gen_range(2..5);
            let graphs = (0..len).map(|_| random_class_g_graph(rng, n)).collect();
            DynamicGraphModel::new_schedule(graphs).expect("valid by construction")
        }
        2 => DynamicGraphModel::new_random_connected(n, rng.gen_range(0.2..0.8), rng.gen())
            .expect("valid by construction"),
        _ => DynamicGraphModel::new_rotating_star(n, rng.gen_range(1..4)).expect("valid by construction"),
    }
}

/// Run every suite at its standard size. Lemma and matrix suites use `cases`
/// directly; the execution-level suites run `cases / 10` (at least 10)
/// executions of 50 rounds each.
pub fn run_all(n_max: usize, cases: usize, seed: u64) -> Vec<SuiteOutcome> {
    let executions = (cases / 10).max(10);
    vec![
        variance_switch_suite(n_max, cases, seed),
        dispersion_suite(n_max, cases, seed),
        contraction_suite(n_max, cases, seed),
        gap_bounds_suite(n_max, cases, seed),
        nu_radius_suite(n_max, cases, seed),
        double_stochasticity_suite(n_max, cases, seed),
        radius_one_suite(n_max, cases, seed),
        equivalence_suite(n_max, executions, 50, 1e-12, seed),
        conservation_suite(n_max, executions, 50, seed),
    ]
}
