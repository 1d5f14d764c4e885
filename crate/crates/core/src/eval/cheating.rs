use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::preference::PreferenceGraph;
use crate::data::VoteDataset;

/// Above this many vote categories the ordering is found heuristically.
pub const DEFAULT_EXACT_LIMIT: usize = 9;

/// Highest total answer score any category ordering can earn on the votes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheatingScore {
    pub score: f64,
    /// Category indices, best first.
    pub ordering: Vec<usize>,
    pub exact: bool,
}

/// Best ordering of the vote categories. Exact (subset dynamic program)
/// when at most `exact_limit` categories appear, otherwise heuristic.
pub fn best_cheating_score(votes: &VoteDataset, exact_limit: usize) -> CheatingScore {
    let graph = PreferenceGraph::build(votes);
    let (order, exact) = if graph.len() <= exact_limit {
        (exact_order(&graph), true)
    } else {
        (heuristic_order(&graph), false)
    };
    CheatingScore {
        score: graph.order_score(&order),
        ordering: order.iter().map(|&n| graph.categories()[n]).collect(),
        exact,
    }
}

/// Optimal node ordering by dynamic programming over placed-node subsets.
pub fn exact_order(g: &PreferenceGraph) -> Vec<usize> {
    let k = g.len();
    if k == 0 {
        return Vec::new();
    }
    assert!(k < 25, "exact ordering over {k} categories is infeasible");
    let full = (1usize << k) - 1;
    let mut best = vec![f64::NEG_INFINITY; 1 << k];
    let mut choice = vec![usize::MAX; 1 << k];
    best[0] = 0.0;
    for set in 0..full {
        if best[set] == f64::NEG_INFINITY {
            continue;
        }
        for x in (0..k).filter(|x| set & (1 << x) == 0) {
            // Placing x next earns its points against every later node.
            let gain: f64 = (0..k)
                .filter(|&b| b != x && set & (1 << b) == 0)
                .map(|b| g.points(x, b))
                .sum();
            let next = set | (1 << x);
            if best[set] + gain > best[next] + 1e-12 {
                best[next] = best[set] + gain;
                choice[next] = x;
            }
        }
    }
    let mut order = Vec::with_capacity(k);
    let mut set = full;
    while set != 0 {
        let x = choice[set];
        order.push(x);
        set &= !(1 << x);
    }
    order.reverse();
    order
}

/// Majority-graph components in topological order, each ordered by net
/// margin against its own members, then local search by adjacent swaps and
/// single-element insertions. The same search also runs from the global
/// net-margin order and the better result is kept.
pub fn heuristic_order(g: &PreferenceGraph) -> Vec<usize> {
    let mut best = local_search(g, condensation_order(g));
    let all: Vec<usize> = (0..g.len()).collect();
    let alt = local_search(g, margin_order(g, all));
    if g.order_score(&alt) > g.order_score(&best) + 1e-12 {
        best = alt;
    }
    best
}

fn condensation_order(g: &PreferenceGraph) -> Vec<usize> {
    let k = g.len();
    let mut dg = DiGraph::<usize, ()>::with_capacity(k, 0);
    let nodes: Vec<_> = (0..k).map(|i| dg.add_node(i)).collect();
    for a in 0..k {
        for b in 0..k {
            if a != b && g.margin(a, b) > 0.0 {
                dg.add_edge(nodes[a], nodes[b], ());
            }
        }
    }
    let mut order = Vec::with_capacity(k);
    // Tarjan emits components sinks first.
    for comp in tarjan_scc(&dg).into_iter().rev() {
        let mut members: Vec<usize> = comp.into_iter().map(|n| dg[n]).collect();
        members.sort_unstable();
        order.extend(margin_order(g, members));
    }
    order
}

/// Nodes by descending net margin against the other given nodes.
fn margin_order(g: &PreferenceGraph, members: Vec<usize>) -> Vec<usize> {
    let net: Vec<f64> = members
        .iter()
        .map(|&a| members.iter().map(|&b| if a == b { 0.0 } else { g.margin(a, b) }).sum())
        .collect();
    let mut idx: Vec<usize> = (0..members.len()).collect();
    idx.sort_by(|&i, &j| net[j].total_cmp(&net[i]).then(members[i].cmp(&members[j])));
    idx.into_iter().map(|i| members[i]).collect()
}

fn local_search(g: &PreferenceGraph, mut order: Vec<usize>) -> Vec<usize> {
    loop {
        hill_climb(g, &mut order);
        if !insertion_pass(g, &mut order) {
            break;
        }
    }
    order
}

/// Adjacent swaps while any swap strictly improves the score.
fn hill_climb(g: &PreferenceGraph, order: &mut [usize]) {
    loop {
        let mut improved = false;
        for i in 0..order.len().saturating_sub(1) {
            let (x, y) = (order[i], order[i + 1]);
            if g.margin(y, x) > 1e-12 {
                order.swap(i, i + 1);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Moves each element to its best position when that strictly improves the
/// score. Returns whether anything moved.
fn insertion_pass(g: &PreferenceGraph, order: &mut Vec<usize>) -> bool {
    let mut moved = false;
    let mut i = 0;
    while i < order.len() {
        let x = order[i];
        let (mut best_gain, mut best_at) = (1e-12, i);
        // Moving x left past order[j] gains margin(x, order[j]).
        let mut gain = 0.0;
        for j in (0..i).rev() {
            gain += g.margin(x, order[j]);
            if gain > best_gain {
                (best_gain, best_at) = (gain, j);
            }
        }
        gain = 0.0;
        for j in i + 1..order.len() {
            gain += g.margin(order[j], x);
            if gain > best_gain {
                (best_gain, best_at) = (gain, j);
            }
        }
        if best_at != i {
            order.remove(i);
            order.insert(best_at, x);
            moved = true;
        } else {
            i += 1;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Answer, Question};

    fn pairwise(prefs: &[(usize, usize, usize)]) -> VoteDataset {
        // Each (winner, loser, count) becomes a 2-choice question.
        let mut qs = Vec::new();
        let mut ans = Vec::new();
        for (i, &(w, l, n)) in prefs.iter().enumerate() {
            qs.push(Question { id: format!("q{i}"), choices: vec![w, l] });
            ans.extend((0..n).map(|_| Answer { question: i, choice: 0 }));
        }
        VoteDataset::new(qs, ans).unwrap()
    }

    #[test]
    fn consistent_votes_score_every_answer() {
        let v = pairwise(&[(0, 1, 3), (1, 2, 2), (0, 2, 4)]);
        for limit in [0, DEFAULT_EXACT_LIMIT] {
            let c = best_cheating_score(&v, limit);
            assert_eq!(c.score, 9.0);
            assert_eq!(c.ordering, vec![0, 1, 2]);
        }
    }

    #[test]
    fn three_cycle_violates_exactly_one_preference() {
        let v = pairwise(&[(0, 1, 1), (1, 2, 1), (2, 0, 1)]);
        let exact = best_cheating_score(&v, DEFAULT_EXACT_LIMIT);
        let heur = best_cheating_score(&v, 0);
        assert_eq!(exact.score, 2.0);
        assert_eq!(heur.score, 2.0);
        assert!(exact.exact && !heur.exact);
    }
}
