use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::VoteDataset;

/// Pairwise vote tallies between categories that co-appear in questions.
///
/// For categories `a` and `b`, `votes(a, b)` counts answers that picked `a`
/// in a question also offering `b`; `points(a, b)` weights each such answer
/// by `1 / (m - 1)`, its share of the answer score.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceGraph {
    categories: Vec<usize>,
    position: HashMap<usize, usize>,
    votes: Vec<u64>,
    points: Vec<f64>,
}

/// Majority edge: more answers preferred `winner` over `loser`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorityEdge {
    pub winner: usize,
    pub loser: usize,
    pub winner_votes: u64,
    pub loser_votes: u64,
}

impl PreferenceGraph {
    pub fn build(votes: &VoteDataset) -> Self {
        let categories = votes.categories();
        let position: HashMap<usize, usize> = categories.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let k = categories.len();
        let mut tally = vec![0u64; k * k];
        let mut points = vec![0.0; k * k];
        for a in votes.answers() {
            let q = votes.question_of(a);
            let w = 1.0 / (q.choices.len() - 1) as f64;
            let winner = position[&q.choices[a.choice]];
            for (i, &c) in q.choices.iter().enumerate() {
                if i != a.choice {
                    let loser = position[&c];
                    tally[winner * k + loser] += 1;
                    points[winner * k + loser] += w;
                }
            }
        }
        Self {
            categories,
            position,
            votes: tally,
            points,
        }
    }

    /// Node set: distinct vote categories, ascending.
    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn node_of(&self, category: usize) -> Option<usize> {
        self.position.get(&category).copied()
    }

    /// Vote count for node `a` over node `b` (node indices).
    pub fn votes(&self, a: usize, b: usize) -> u64 {
        self.votes[a * self.len() + b]
    }

    pub fn points(&self, a: usize, b: usize) -> f64 {
        self.points[a * self.len() + b]
    }

    /// Points earned by placing node `a` before node `b` minus the reverse.
    pub fn margin(&self, a: usize, b: usize) -> f64 {
        self.points(a, b) - self.points(b, a)
    }

    /// One edge per unordered pair with a strict vote majority, in
    /// category order.
    pub fn majority_edges(&self) -> Vec<MajorityEdge> {
        let k = self.len();
        let mut edges = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                let (ab, ba) = (self.votes(a, b), self.votes(b, a));
                let (winner, loser, wv, lv) = match ab.cmp(&ba) {
                    std::cmp::Ordering::Greater => (a, b, ab, ba),
                    std::cmp::Ordering::Less => (b, a, ba, ab),
                    std::cmp::Ordering::Equal => continue,
                };
                edges.push(MajorityEdge {
                    winner: self.categories[winner],
                    loser: self.categories[loser],
                    winner_votes: wv,
                    loser_votes: lv,
                });
            }
        }
        edges
    }

    /// Total answer points of a node ordering (best first).
    pub fn order_score(&self, order: &[usize]) -> f64 {
        let mut total = 0.0;
        for (i, &a) in order.iter().enumerate() {
            for &b in &order[i + 1..] {
                total += self.points(a, b);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Answer, Question};

    fn dataset(questions: Vec<Vec<usize>>, answers: Vec<(usize, usize)>) -> VoteDataset {
        let qs = questions
            .into_iter()
            .enumerate()
            .map(|(i, choices)| Question { id: format!("q{i}"), choices })
            .collect();
        let ans = answers.into_iter().map(|(question, choice)| Answer { question, choice }).collect();
        VoteDataset::new(qs, ans).unwrap()
    }

    #[test]
    fn unanimous_votes_give_edges_to_every_co_choice() {
        let v = dataset(vec![vec![0, 1, 2, 3, 4]], vec![(0, 0); 20]);
        let g = PreferenceGraph::build(&v);
        for x in 1..5 {
            assert_eq!(g.votes(0, x), 20);
        }
        let edges = g.majority_edges();
        assert_eq!(edges.len(), 4);
        assert!(edges.iter().all(|e| e.winner == 0 && e.winner_votes == 20));
    }

    #[test]
    fn tied_pair_has_no_majority_edge() {
        let mut answers = vec![(0, 0); 10];
        answers.extend(vec![(0, 1); 10]);
        let g = PreferenceGraph::build(&dataset(vec![vec![0, 1]], answers));
        assert!(g.majority_edges().is_empty());
    }

    #[test]
    fn order_score_counts_points() {
        let g = PreferenceGraph::build(&dataset(vec![vec![5, 7, 9]], vec![(0, 1), (0, 1), (0, 0)]));
        let (n5, n7, n9) = (g.node_of(5).unwrap(), g.node_of(7).unwrap(), g.node_of(9).unwrap());
        assert_eq!(g.order_score(&[n7, n5, n9]), 2.0 + 0.5);
    }
}
