//! Invariants checked over random inputs.

use logitq_core::diagnostics::stationary_bias;
use logitq_core::game::{generate_random_game, GameGenConfig, JointActionSpace, QTable};
use logitq_core::graph::{build_state_graph, check_projection, recurrent_classes, StateGraph};
use logitq_core::linalg::{linf_distance, SquareMatrix};
use logitq_core::logit::{stationary_brute_force, stationary_closed_form, transition_matrix};
use logitq_core::solver::{bellman_backup, logit_distribution};
use proptest::prelude::*;

/// Reachability by repeated relaxation; `reach[s][t]` iff a path `s -> ... -> t`
/// of length >= 0 exists.
fn reachability(g: &StateGraph) -> Vec<Vec<bool>> {
    let n = g.n_vertices();
    let mut reach = vec![vec![false; n]; n];
    for s in 0..n {
        reach[s][s] = true;
        for &t in g.successors(s) {
            reach[s][t] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Recurrent states by definition: everything reachable from `s` reaches back.
fn recurrent_by_definition(g: &StateGraph) -> Vec<bool> {
    let reach = reachability(g);
    let n = g.n_vertices();
    (0..n)
        .map(|s| (0..n).all(|t| !reach[s][t] || reach[t][s]))
        .collect()
}

fn random_graph() -> impl Strategy<Value = StateGraph> {
    (1usize..8).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), n).prop_map(move |m| {
            let adj = m
                .iter()
                .enumerate()
                .map(|(s, row)| {
                    let mut succ: Vec<usize> = row
                        .iter()
                        .enumerate()
                        .filter(|(_, &b)| b)
                        .map(|(t, _)| t)
                        .collect();
                    // every state has at least one successor in a Markov game
                    if succ.is_empty() {
                        succ.push(s);
                    }
                    succ
                })
                .collect();
            StateGraph::from_adjacency(adj)
        })
    })
}

fn small_space() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1usize..=3, 1..=3)
}

proptest! {
    #[test]
    fn recurrent_classes_match_definition(g in random_graph()) {
        let classes = recurrent_classes(&g);
        let expected = recurrent_by_definition(&g);
        let mut seen = vec![false; g.n_vertices()];
        for class in &classes {
            for &s in class {
                prop_assert!(!seen[s], "classes overlap at {}", s);
                seen[s] = true;
                for &t in g.successors(s) {
                    prop_assert!(class.contains(&t), "edge {}->{} leaves its class", s, t);
                }
            }
        }
        prop_assert_eq!(seen, expected);
    }

    #[test]
    fn generated_games_validate(states in 1usize..5, counts in small_space(), seed in any::<u64>(), gamma in 0.0f64..0.99) {
        let cfg = GameGenConfig { n_states: states, action_counts: counts, discount: gamma, transition_range: (0.2, 1.0), seed };
        let g = generate_random_game(&cfg).unwrap();
        prop_assert!(g.validate().is_empty());
        let max = g.rewards().iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert_eq!(max, 1.0);
    }

    #[test]
    fn backup_is_a_gamma_contraction(seed in any::<u64>(), gamma in 0.0f64..0.99, xs in proptest::collection::vec(-5.0f64..5.0, 24), ys in proptest::collection::vec(-5.0f64..5.0, 24)) {
        let cfg = GameGenConfig { n_states: 3, action_counts: vec![2, 4], discount: gamma, transition_range: (0.2, 1.0), seed };
        let g = generate_random_game(&cfg).unwrap();
        let x = QTable::from_vec(3, 8, xs).unwrap();
        let y = QTable::from_vec(3, 8, ys).unwrap();
        let lhs = bellman_backup(&g, &x).unwrap().sup_norm_diff(&bellman_backup(&g, &y).unwrap()).unwrap();
        let rhs = gamma * x.sup_norm_diff(&y).unwrap();
        prop_assert!(lhs <= rhs + 1e-12, "{} > {}", lhs, rhs);
    }

    #[test]
    fn logit_shift_invariance_and_argmax(row in proptest::collection::vec(-3.0f64..3.0, 1..12), c in -50.0f64..50.0, tau in 0.01f64..5.0) {
        let p = logit_distribution(&row, tau).unwrap();
        let shifted: Vec<f64> = row.iter().map(|x| x + c).collect();
        let q = logit_distribution(&shifted, tau).unwrap();
        prop_assert!(linf_distance(&p, &q) <= 1e-12);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|x| *x > 0.0));
        let arg = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
        prop_assert_eq!(arg(&p), arg(&row));
    }

    #[test]
    fn closed_form_is_stationary(counts in small_space(), seed in any::<u64>(), tau in 0.005f64..3.0) {
        let space = JointActionSpace::new(&counts).unwrap();
        let mut rng = logitq_core::rng::seeded(seed);
        let row: Vec<f64> = (0..space.size()).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let p = transition_matrix(&row, &space, tau).unwrap();
        for a in 0..space.size() {
            prop_assert!((p.row(a).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let mu = stationary_closed_form(&row, tau).unwrap();
        prop_assert!(linf_distance(&p.left_mul(&mu), &mu) <= 1e-10);
        let brute = stationary_brute_force(&p).unwrap();
        prop_assert!(linf_distance(&brute, &mu) <= 1e-8);

        // irreducible and aperiodic: P^(n+1) strictly positive
        let mut power = p.clone();
        for _ in 0..space.n_agents() {
            power = power.mul(&p);
        }
        let n = space.size();
        prop_assert!((0..n).all(|i| (0..n).all(|j| power.get(i, j) > 0.0)));
    }

    #[test]
    fn stationary_bias_is_bounded(row in proptest::collection::vec(-1.0f64..1.0, 1..30), tau in prop_oneof![Just(1e-3), Just(0.1), Just(1.0)]) {
        let bias = stationary_bias(&row, tau).unwrap();
        prop_assert!(bias <= 0.0);
        prop_assert!(bias >= -tau * (row.len() as f64).ln());
    }
}

#[test]
fn projection_holds_on_tiny_random_games() {
    let mut checked = 0;
    for seed in 0..50u64 {
        let n_states = 1 + (seed % 2) as usize;
        let n_agents = 1 + ((seed / 2) % 2) as usize;
        let n_actions = 1 + ((seed / 4) % 3) as usize;
        let g = generate_random_game(&GameGenConfig::uniform(n_states, n_agents, n_actions, 0.5, seed)).unwrap();
        assert!(check_projection(&g).unwrap(), "seed {seed}");
        checked += 1;
    }
    assert_eq!(checked, 50);
}

#[test]
fn state_graph_edges_follow_kernel() {
    let g = generate_random_game(&GameGenConfig::uniform(4, 2, 2, 0.5, 3)).unwrap();
    let sg = build_state_graph(&g);
    for s in 0..4 {
        for t in 0..4 {
            let any = (0..g.n_joint()).any(|a| g.transition_row(s, a)[t] > 0.0);
            assert_eq!(sg.has_edge(s, t), any);
        }
    }
}

#[test]
fn matrix_power_of_constant_chain() {
    // two agents, two actions, constant Q: the chain mixes in two steps
    let space = JointActionSpace::new(&[2, 2]).unwrap();
    let p = transition_matrix(&[0.0; 4], &space, 1.0).unwrap();
    let p3 = p.mul(&p).mul(&p);
    let id = SquareMatrix::zeros(4);
    assert_eq!(id.dim(), 4);
    assert!((0..4).all(|i| (0..4).all(|j| p3.get(i, j) > 0.0)));
}
