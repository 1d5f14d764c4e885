//! Scoring category rankings against human preference votes.

mod cheating;
mod preference;

pub use cheating::{best_cheating_score, exact_order, heuristic_order, CheatingScore, DEFAULT_EXACT_LIMIT};
pub use preference::{MajorityEdge, PreferenceGraph};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Answer, CategoryIndex, Dictionary, Question, VoteDataset};
use crate::error::{Error, Result};

/// Placement of categories missing from a ranking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    /// After every ranked category, in ascending index order.
    #[default]
    Index,
}

impl fmt::Display for Fallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("index")
    }
}

impl FromStr for Fallback {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "index" => Ok(Self::Index),
            _ => Err(Error::InvalidArgument(format!("unknown fallback rule {s:?}"))),
        }
    }
}

/// Total position of every category under a ranking plus fallback rule.
#[derive(Clone, Debug)]
pub struct RankLookup {
    position: HashMap<usize, usize>,
    fallback: Fallback,
}

impl RankLookup {
    /// `order` lists category indices, best first. Repeats keep their first
    /// position.
    pub fn new(order: &[usize], fallback: Fallback) -> Self {
        let mut position = HashMap::with_capacity(order.len());
        for (i, &c) in order.iter().enumerate() {
            position.entry(c).or_insert(i);
        }
        Self { position, fallback }
    }

    pub fn is_ranked(&self, category: usize) -> bool {
        self.position.contains_key(&category)
    }

    /// Sort key: smaller is better.
    fn key(&self, category: usize) -> (bool, usize) {
        match (self.position.get(&category), self.fallback) {
            (Some(&p), _) => (false, p),
            (None, Fallback::Index) => (true, category),
        }
    }

    /// 1-based rank of the voted choice among the question's choices.
    pub fn relative_rank(&self, question: &Question, voted: usize) -> usize {
        let key = self.key(question.choices[voted]);
        1 + question
            .choices
            .iter()
            .enumerate()
            .filter(|&(i, &c)| i != voted && self.key(c) < key)
            .count()
    }
}

/// Points for one answer: `(m - i) / (m - 1)` where `i` is the voted
/// choice's relative rank among `m` choices.
pub fn score_answer(answer: &Answer, question: &Question, ranking: &RankLookup) -> f64 {
    let m = question.choices.len();
    let i = ranking.relative_rank(question, answer.choice);
    (m - i) as f64 / (m - 1) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughAccuracy {
    pub total_points: f64,
    pub n_answers: usize,
    pub accuracy: f64,
    /// Fraction of answers whose voted choice sits at relative rank `i + 1`.
    pub agreement_histogram: Vec<f64>,
    /// Fraction of the total points earned at relative rank `i + 1`.
    pub points_by_rank: Vec<f64>,
    /// Answers to questions offering at least one unranked category.
    pub unranked_fallback_count: usize,
}

pub fn rough_accuracy(votes: &VoteDataset, ranking: &RankLookup) -> Result<RoughAccuracy> {
    if votes.is_empty() {
        return Err(Error::Empty("vote set has no answers".into()));
    }
    let m_max = votes.questions().iter().map(|q| q.choices.len()).max().unwrap_or(2);
    let per_answer: Vec<(usize, f64, bool)> = votes
        .answers()
        .par_iter()
        .map(|a| {
            let q = votes.question_of(a);
            let rank = ranking.relative_rank(q, a.choice);
            let fallback = q.choices.iter().any(|&c| !ranking.is_ranked(c));
            (rank, score_answer(a, q, ranking), fallback)
        })
        .collect();
    let mut counts = vec![0usize; m_max];
    let mut points = vec![0.0; m_max];
    let mut total = 0.0;
    let mut fallback = 0;
    for &(rank, p, fb) in &per_answer {
        counts[rank - 1] += 1;
        points[rank - 1] += p;
        total += p;
        fallback += fb as usize;
    }
    let n = per_answer.len();
    Ok(RoughAccuracy {
        total_points: total,
        n_answers: n,
        accuracy: total / n as f64,
        agreement_histogram: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        points_by_rank: points
            .iter()
            .map(|&p| if total > 0.0 { p / total } else { 0.0 })
            .collect(),
        unranked_fallback_count: fallback,
    })
}

/// Total points over the cheating score. Values above 1 mean the cheating
/// score came from a suboptimal heuristic ordering; they are reported
/// unchanged with a warning.
pub fn improved_accuracy(total_points: f64, cheating: &CheatingScore) -> Result<f64> {
    if cheating.score <= 0.0 {
        return Err(Error::InvalidArgument("cheating score is zero".into()));
    }
    let acc = total_points / cheating.score;
    if acc > 1.0 + 1e-12 {
        warn!(
            "improved accuracy {acc:.6} exceeds 1: the {} cheating ordering is suboptimal",
            if cheating.exact { "exact" } else { "heuristic" }
        );
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub total_points: f64,
    pub n_answers: usize,
    pub rough_accuracy: f64,
    pub cheating_score: f64,
    pub cheating_exact: bool,
    pub improved_accuracy: f64,
    pub agreement_histogram: Vec<f64>,
    pub points_by_rank: Vec<f64>,
    pub unranked_fallback_count: usize,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let mut rows = vec![
            ("answers".to_string(), self.n_answers.to_string()),
            ("total points".into(), format!("{:.2}", self.total_points)),
            ("rough accuracy".into(), format!("{:.2}%", 100.0 * self.rough_accuracy)),
            (
                format!("cheating score ({})", if self.cheating_exact { "exact" } else { "heuristic" }),
                format!("{:.2}", self.cheating_score),
            ),
            ("improved accuracy".into(), format!("{:.2}%", 100.0 * self.improved_accuracy)),
        ];
        for (i, f) in self.agreement_histogram.iter().enumerate() {
            rows.push((format!("{} agreement", ordinal(i + 1)), format!("{:.2}%", 100.0 * f)));
        }
        rows.push(("answers using fallback".into(), self.unranked_fallback_count.to_string()));
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<width$}  {v:>10}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Full evaluation of a ranking (category indices, best first).
pub fn evaluate(
    votes: &VoteDataset,
    order: &[usize],
    fallback: Fallback,
    cheating: &CheatingScore,
) -> Result<EvaluationReport> {
    let lookup = RankLookup::new(order, fallback);
    let rough = rough_accuracy(votes, &lookup)?;
    let improved = improved_accuracy(rough.total_points, cheating)?;
    let mut warnings = Vec::new();
    if improved > 1.0 + 1e-12 {
        warnings.push(format!(
            "improved accuracy exceeds 1; the {} cheating ordering is beaten by this ranking",
            if cheating.exact { "exact" } else { "heuristic" }
        ));
    }
    if rough.unranked_fallback_count == rough.n_answers {
        warnings.push("no voted question is fully covered by the ranking".into());
    }
    Ok(EvaluationReport {
        total_points: rough.total_points,
        n_answers: rough.n_answers,
        rough_accuracy: rough.accuracy,
        cheating_score: cheating.score,
        cheating_exact: cheating.exact,
        improved_accuracy: improved,
        agreement_histogram: rough.agreement_histogram,
        points_by_rank: rough.points_by_rank,
        unranked_fallback_count: rough.unranked_fallback_count,
        warnings,
    })
}

/// Geometric mean of two conditionals from `n_a`, `n_b` supports and
/// `n_ab` joint count. `None` when either support is empty.
pub fn co_prob_from_counts(n_a: usize, n_b: usize, n_ab: usize) -> Option<f64> {
    if n_a == 0 || n_b == 0 {
        return None;
    }
    let a_given_b = n_ab as f64 / n_b as f64;
    let b_given_a = n_ab as f64 / n_a as f64;
    Some((a_given_b * b_given_a).sqrt())
}

/// Co-Prob over questions: supports count questions offering a category.
pub fn co_prob_questions(votes: &VoteDataset, a: usize, b: usize) -> Option<f64> {
    let (mut na, mut nb, mut nab) = (0, 0, 0);
    for q in votes.questions() {
        let (ha, hb) = (q.choices.contains(&a), q.choices.contains(&b));
        na += ha as usize;
        nb += hb as usize;
        nab += (ha && hb) as usize;
    }
    co_prob_from_counts(na, nb, nab)
}

/// Co-Prob over entities: supports are category member sets.
pub fn co_prob_members(cats: &CategoryIndex, a: usize, b: usize) -> Option<f64> {
    let (ma, mb) = (cats.members(a), cats.members(b));
    let shared = ma.iter().filter(|&&e| mb.binary_search(&e).is_ok()).count();
    co_prob_from_counts(ma.len(), mb.len(), shared)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusingPair {
    pub a: String,
    pub b: String,
    pub co_prob: f64,
}

/// Co-appearing category pairs with the highest question Co-Prob.
pub fn confusing_pairs(votes: &VoteDataset, names: &Dictionary, top: usize) -> Vec<ConfusingPair> {
    let mut support: HashMap<usize, usize> = HashMap::new();
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for q in votes.questions() {
        for (i, &x) in q.choices.iter().enumerate() {
            *support.entry(x).or_default() += 1;
            for &y in &q.choices[i + 1..] {
                *joint.entry((x.min(y), x.max(y))).or_default() += 1;
            }
        }
    }
    let mut pairs: Vec<((usize, usize), f64)> = joint
        .into_iter()
        .filter_map(|((x, y), n)| Some(((x, y), co_prob_from_counts(support[&x], support[&y], n)?)))
        .collect();
    pairs.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.cmp(&q.0)));
    pairs
        .into_iter()
        .take(top)
        .map(|((x, y), c)| ConfusingPair {
            a: names.name(x).to_owned(),
            b: names.name(y).to_owned(),
            co_prob: c,
        })
        .collect()
}
