//! State graph reachability: recurrent classes of the state graph and, for
//! tiny games, the raised graph over (state, stationary pure profile) pairs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::game::MarkovGame;

/// Default vertex cap for [`build_raised_graph`].
pub const RAISED_VERTEX_CAP: usize = 1_000_000;

/// Directed graph over states: `s -> s'` iff some joint action moves `s` to
/// `s'` with positive probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGraph {
    adjacency: Vec<Vec<usize>>,
}

impl StateGraph {
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        Self { adjacency }
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from].contains(&to)
    }
}

pub fn build_state_graph(game: &MarkovGame) -> StateGraph {
    let n = game.n_states();
    let adjacency = (0..n)
        .map(|s| {
            (0..n)
                .filter(|&t| (0..game.n_joint()).any(|a| game.transition_row(s, a)[t] > 0.0))
                .collect()
        })
        .collect();
    StateGraph { adjacency }
}

/// Strongly connected components (iterative Tarjan). Each component is
/// sorted; components are returned in reverse topological order.
pub fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut call = Vec::new();
    let mut next_index = 0;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0usize));
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge == 0 && index[v] == UNVISITED {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adjacency[v].get(*edge) {
                *edge += 1;
                if index[w] == UNVISITED {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

/// Closed strongly connected components of an adjacency list, sorted by
/// their smallest vertex.
pub fn closed_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(adjacency);
    let mut comp_of = vec![0usize; adjacency.len()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = comps
        .into_iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&v| adjacency[v].iter().all(|&w| comp_of[w] == *c))
        })
        .map(|(_, members)| members)
        .collect();
    closed.sort_unstable_by_key(|c| c[0]);
    closed
}

/// Recurrent classes: the closed strongly connected components.
pub fn recurrent_classes(graph: &StateGraph) -> Vec<Vec<usize>> {
    closed_components(&graph.adjacency)
}

/// States outside every recurrent class.
pub fn transient_states(graph: &StateGraph) -> Vec<usize> {
    let mut recurrent = vec![false; graph.n_vertices()];
    for class in recurrent_classes(graph) {
        for s in class {
            recurrent[s] = true;
        }
    }
    (0..graph.n_vertices()).filter(|&s| !recurrent[s]).collect()
}

/// Graph over raised states `w = (s, {a(s~)}_{s~})`.
///
/// Vertex `w` is encoded as `s * |A|^|S| + sum_k a(k) * |A|^(|S|-1-k)`. From
/// `(s, a(.))` the profile at `s` may be redrawn to any profile differing in
/// at most one agent's action (including itself), and the state moves to any
/// `s'` reachable under the redrawn profile.
#[derive(Debug, Clone)]
pub struct RaisedGraph {
    n_states: usize,
    n_joint: usize,
    per_state: usize,
    adjacency: Vec<Vec<usize>>,
}

impl RaisedGraph {
    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn successors(&self, w: usize) -> &[usize] {
        &self.adjacency[w]
    }

    pub fn encode(&self, state: usize, profiles: &[usize]) -> usize {
        let mut idx = 0;
        for &p in profiles {
            idx = idx * self.n_joint + p;
        }
        state * self.per_state + idx
    }

    /// `(state, per-state profiles)` of vertex `w`.
    pub fn decode(&self, w: usize) -> (usize, Vec<usize>) {
        let state = w / self.per_state;
        let mut rest = w % self.per_state;
        let mut profiles = vec![0; self.n_states];
        for k in (0..self.n_states).rev() {
            profiles[k] = rest % self.n_joint;
            rest /= self.n_joint;
        }
        (state, profiles)
    }

    pub fn state_of(&self, w: usize) -> usize {
        w / self.per_state
    }

    pub fn recurrent_classes(&self) -> Vec<Vec<usize>> {
        closed_components(&self.adjacency)
    }
}

pub fn build_raised_graph(game: &MarkovGame) -> Result<RaisedGraph> {
    build_raised_graph_with_cap(game, RAISED_VERTEX_CAP)
}

pub fn build_raised_graph_with_cap(game: &MarkovGame, cap: usize) -> Result<RaisedGraph> {
    let n_states = game.n_states();
    let n_joint = game.n_joint();
    let too_big = CoreError::Size {
        what: "raised graph",
        size: usize::MAX,
        cap,
    };
    let mut per_state = 1usize;
    for _ in 0..n_states {
        per_state = per_state.checked_mul(n_joint).ok_or(too_big.clone())?;
    }
    let n_vertices = per_state.checked_mul(n_states).ok_or(too_big)?;
    if n_vertices > cap {
        return Err(CoreError::Size {
            what: "raised graph",
            size: n_vertices,
            cap,
        });
    }

    let space = game.space();
    let mut graph = RaisedGraph {
        n_states,
        n_joint,
        per_state,
        adjacency: Vec::with_capacity(n_vertices),
    };
    // profiles reachable from `a` by one agent's redraw, itself included
    let neighbours: Vec<Vec<usize>> = (0..n_joint)
        .map(|a| {
            let mut out = vec![a];
            for i in 0..space.n_agents() {
                for x in 0..space.counts()[i] {
                    let b = space.with_component(a, i, x);
                    if b != a {
                        out.push(b);
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect();
    // place value of state k's profile inside the per-state index
    let place: Vec<usize> = (0..n_states)
        .map(|k| {
            let mut p = 1;
            for _ in k + 1..n_states {
                p *= n_joint;
            }
            p
        })
        .collect();

    for w in 0..n_vertices {
        let s = w / per_state;
        let profiles_idx = w % per_state;
        let current = (profiles_idx / place[s]) % n_joint;
        let mut succ = Vec::new();
        for &b in &neighbours[current] {
            let new_idx = profiles_idx - current * place[s] + b * place[s];
            let row = game.transition_row(s, b);
            for (t, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    succ.push(t * per_state + new_idx);
                }
            }
        }
        succ.sort_unstable();
        succ.dedup();
        graph.adjacency.push(succ);
    }
    Ok(graph)
}

/// Checks that recurrent classes of the raised graph project onto recurrent
/// classes of the state graph.
///
/// Holds iff (i) every raised recurrent class projects onto a recurrent class
/// of the state graph, (ii) it contains every profile combination over the
/// states of that class (profiles at states outside the class are frozen),
/// and (iii) the distinct projections are exactly the state graph's
/// recurrent classes.
pub fn check_projection(game: &MarkovGame) -> Result<bool> {
    check_projection_with_cap(game, RAISED_VERTEX_CAP)
}

pub fn check_projection_with_cap(game: &MarkovGame, cap: usize) -> Result<bool> {
    let raised = build_raised_graph_with_cap(game, cap)?;
    let state_classes = recurrent_classes(&build_state_graph(game));
    let mut images: Vec<Vec<usize>> = Vec::new();
    for class in raised.recurrent_classes() {
        let mut states: Vec<usize> = class.iter().map(|&w| raised.state_of(w)).collect();
        states.sort_unstable();
        states.dedup();
        if !state_classes.contains(&states) {
            return Ok(false);
        }
        let mut expected = states.len();
        for _ in 0..states.len() {
            expected *= raised.n_joint;
        }
        if class.len() != expected {
            return Ok(false);
        }
        images.push(states);
    }
    images.sort_unstable();
    images.dedup();
    let mut targets = state_classes;
    targets.sort_unstable();
    Ok(images == targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_game, GameGenConfig};

    fn graph(adj: &[&[usize]]) -> StateGraph {
        StateGraph::from_adjacency(adj.iter().map(|r| r.to_vec()).collect())
    }

    /// s0 -> s1 with certainty, s1 absorbing; one agent with two actions.
    pub(crate) fn chain_game() -> MarkovGame {
        MarkovGame::new(
            2,
            &[2],
            vec![1.0, 0.0, 0.5, 0.2],
            vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn generator_games_are_complete() {
        let g = generate_random_game(&GameGenConfig::uniform(5, 2, 2, 0.6, 3)).unwrap();
        let sg = build_state_graph(&g);
        for s in 0..5 {
            assert_eq!(sg.successors(s), &[0, 1, 2, 3, 4]);
        }
        assert_eq!(recurrent_classes(&sg), vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn chain_state_graph() {
        let sg = build_state_graph(&chain_game());
        assert_eq!(sg, graph(&[&[1], &[1]]));
        assert_eq!(recurrent_classes(&sg), vec![vec![1]]);
        assert_eq!(transient_states(&sg), vec![0]);
    }

    #[test]
    fn single_state_self_loop() {
        let g = MarkovGame::new(1, &[2], vec![1.0, 0.0], vec![1.0, 1.0], 0.5).unwrap();
        assert_eq!(build_state_graph(&g), graph(&[&[0]]));
    }

    #[test]
    fn recurrent_class_examples() {
        assert_eq!(
            recurrent_classes(&graph(&[&[0, 1], &[2], &[2]])),
            vec![vec![2]]
        );
        assert_eq!(
            recurrent_classes(&graph(&[&[0], &[1], &[0, 1]])),
            vec![vec![0], vec![1]]
        );
        let full: Vec<usize> = (0..5).collect();
        let complete = StateGraph::from_adjacency(vec![full.clone(); 5]);
        assert_eq!(recurrent_classes(&complete), vec![full]);
    }

    #[test]
    fn raised_graph_counts() {
        let one = MarkovGame::new(1, &[2], vec![1.0, 0.0], vec![1.0, 1.0], 0.5).unwrap();
        let r = build_raised_graph(&one).unwrap();
        assert_eq!(r.n_vertices(), 2);
        assert_eq!(r.successors(0), &[0, 1]);
        assert_eq!(r.successors(1), &[0, 1]);

        let two = generate_random_game(&GameGenConfig::uniform(2, 1, 2, 0.5, 9)).unwrap();
        assert_eq!(build_raised_graph(&two).unwrap().n_vertices(), 8);
    }

    #[test]
    fn raised_edges_change_at_most_one_agent() {
        let g = generate_random_game(&GameGenConfig::uniform(1, 2, 2, 0.5, 4)).unwrap();
        let r = build_raised_graph(&g).unwrap();
        let space = g.space();
        // profile (0,0) -> (1,1) needs two agents to move
        let from = r.encode(0, &[space.encode(&[0, 0]).unwrap()]);
        let to = r.encode(0, &[space.encode(&[1, 1]).unwrap()]);
        assert!(!r.successors(from).contains(&to));
        for w in 0..r.n_vertices() {
            let (_, pw) = r.decode(w);
            for &x in r.successors(w) {
                let (_, px) = r.decode(x);
                assert!(space.hamming(pw[0], px[0]) <= 1);
            }
        }
    }

    #[test]
    fn raised_cap_is_enforced() {
        let g = generate_random_game(&GameGenConfig::uniform(3, 2, 3, 0.5, 1)).unwrap();
        assert!(matches!(
            build_raised_graph_with_cap(&g, 100),
            Err(CoreError::Size { .. })
        ));
        assert!(check_projection_with_cap(&g, 100).is_err());
    }

    #[test]
    fn projection_holds_on_small_games() {
        assert!(check_projection(&chain_game()).unwrap());
        for seed in 0..5 {
            let g = generate_random_game(&GameGenConfig::uniform(2, 2, 2, 0.5, seed)).unwrap();
            assert!(check_projection(&g).unwrap());
        }
    }
}
