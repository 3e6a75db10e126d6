//! Property tests for the structural invariants: graph symmetry, matrix row
//! sums and sparsity, learning-state monotonicity, trace comparison, and the
//! long-horizon validity of every model family.

use nalgebra::DVector;
use proptest::prelude::*;

use consensus_lab::engine::{run_agents, traces_agree, Algorithm};
use consensus_lab::graph::{
    format_graph, parse_schedule, DynamicGraphModel, Graph, ModelFamily,
};
use consensus_lab::metrics::{convergence_time, ConvergenceTime};
use consensus_lab::rules::{
    equal_neighbor, max_metropolis_step, max_weight_step, metropolis, LearningState,
};

fn arb_proper_edges(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..n, 0..n), 0..2 * n)
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2..10usize)
        .prop_flat_map(|n| (Just(n), arb_proper_edges(n)))
        .prop_map(|(n, edges)| {
            let mut g = Graph::from_proper_edges(n, &[]);
            for (i, j) in edges {
                g.add_edge(i, j);
            }
            g
        })
}

fn arb_connected_graph() -> impl Strategy<Value = Graph> {
    arb_graph().prop_map(|mut g| {
        for k in 1..g.n() {
            g.add_edge(k - 1, k);
        }
        g
    })
}

proptest! {
    #[test]
    fn edges_are_symmetric_and_degree_counts_neighbors(g in arb_graph()) {
        for i in 0..g.n() {
            prop_assert_eq!(g.degree(i), g.neighbors(i).count());
            for j in 0..g.n() {
                prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
            }
        }
    }

    #[test]
    fn schedule_text_round_trips(g in arb_connected_graph()) {
        let parsed = parse_schedule(&format_graph(&g)).unwrap();
        prop_assert_eq!(&parsed[0], &g);
    }

    #[test]
    fn rule_matrices_are_affine_and_edge_supported(g in arb_connected_graph(), q in 1..6usize) {
        let n = g.n();
        let matrices = [
            equal_neighbor(&g),
            metropolis(&g),
            consensus_lab::rules::fixed_weight(&g, &vec![q + 1; n]),
            {
                let mut state = LearningState::new(n);
                max_weight_step(&g, &mut state)
            },
            {
                let mut state = LearningState::new(n);
                max_metropolis_step(&g, &mut state)
            },
        ];
        for m in &matrices {
            for sum in m.row_sums() {
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            }
            prop_assert!(m.supports_graph(&g));
            // Negative entries are a diagonal-only phenomenon.
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        prop_assert!(m.get(i, j) >= 0.0);
                    }
                }
            }
        }
        // Raised-first learning keeps convexity; the symmetric rule keeps
        // column sums even while entries may dip below zero.
        prop_assert!(matrices[3].is_nonnegative());
        for i in 0..n {
            prop_assert!(matrices[3].get(i, i) >= 1.0 / n as f64 - 1e-15);
        }
        prop_assert!(matrices[4].is_symmetric(0.0));
        for sum in matrices[4].column_sums() {
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn learning_state_growth_is_monotone(g1 in arb_connected_graph(), seq in prop::collection::vec(0..3usize, 1..6)) {
        let n = g1.n();
        let graphs = [Graph::path(n), Graph::star(n, 0), Graph::complete(n)];
        let mut state = LearningState::new(n);
        let mut previous = state.d_prime().to_vec();
        state.observe(&g1);
        for (a, b) in previous.iter().zip(state.d_prime()) {
            prop_assert!(b >= a);
        }
        previous = state.d_prime().to_vec();
        for idx in seq {
            let changed = state.observe(&graphs[idx]);
            let grew = previous.iter().zip(state.d_prime()).any(|(a, b)| b > a);
            prop_assert_eq!(changed, grew);
            for (a, b) in previous.iter().zip(state.d_prime()) {
                prop_assert!(b >= a && *b <= n.max(2));
            }
            previous = state.d_prime().to_vec();
        }
    }

    #[test]
    fn convergence_time_is_antitone_in_epsilon(seed in 0..500u64, e1 in 0.001f64..0.5, factor in 1.0f64..50.0) {
        let model = DynamicGraphModel::new_random_connected(6, 0.5, seed).unwrap();
        let mu = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let trace = run_agents(Algorithm::MaxWeight, &model, &mu, 400);
        let loose = convergence_time(&trace, e1 * factor.min(1.0 / e1));
        let tight = convergence_time(&trace, e1);
        match (loose, tight) {
            (ConvergenceTime::Reached(a), ConvergenceTime::Reached(b)) => prop_assert!(a <= b),
            (ConvergenceTime::NotReached, ConvergenceTime::Reached(_)) => {
                prop_assert!(false, "loose threshold unreached but tight reached")
            }
            _ => {}
        }
    }

    #[test]
    fn csv_floats_round_trip_exactly(x in prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL) {
        let printed = format!("{x}");
        let parsed: f64 = printed.parse().unwrap();
        prop_assert_eq!(parsed.to_bits(), x.to_bits());
    }
}

#[test]
fn traces_agree_thresholds() {
    let model = DynamicGraphModel::new_static(Graph::path(4)).unwrap();
    let mu = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
    let a = run_agents(Algorithm::EqualNeighbor, &model, &mu, 20);
    let b = run_agents(Algorithm::EqualNeighbor, &model, &mu, 20);
    assert!(traces_agree(&a, &b, 0.0));
    let mut mu2 = mu.clone();
    mu2[0] += 2e-12;
    let c = run_agents(Algorithm::EqualNeighbor, &model, &mu2, 20);
    assert!(!traces_agree(&a, &c, 1e-12));
}

#[test]
fn every_model_family_is_valid_for_ten_thousand_rounds() {
    let models = [
        ModelFamily::StaticPath.instantiate(7, 0).unwrap(),
        ModelFamily::StaticCycle.instantiate(6, 0).unwrap(),
        ModelFamily::StaticComplete.instantiate(5, 0).unwrap(),
        ModelFamily::StaticStar.instantiate(8, 0).unwrap(),
        ModelFamily::RandomConnected { p: 0.25 }.instantiate(8, 42).unwrap(),
        ModelFamily::RotatingStar { period: 3 }.instantiate(6, 0).unwrap(),
        ModelFamily::DegreeBurst { burst_round: 5000 }.instantiate(6, 0).unwrap(),
        ModelFamily::Schedule {
            graphs: vec![Graph::path(5), Graph::star(5, 4), Graph::cycle(5)],
        }
        .instantiate(5, 0)
        .unwrap(),
    ];
    for model in &models {
        for t in 1..=10_000u64 {
            let g = model.generate(t);
            assert!(
                g.validate_class_g().is_ok(),
                "round {t} produced an invalid graph"
            );
        }
        assert_eq!(model.generate(9_999), model.generate(9_999));
    }
}
