//! Category coherence from close-neighbor relations: conductance and
//! binomial-tail surprise level, plus rankings built from either.

mod binomial;

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use binomial::{binomial_tail, ln_binomial, log_sum_exp, Tail};

use crate::data::{CategoryIndex, Dictionary};
use crate::error::{Error, Result};
use crate::neighbors::NeighborSet;
use crate::scalar::Scalar;

/// Below this max log-tail the surprise mean is taken in log space.
pub const LINEAR_MEAN_FLOOR: f64 = -700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Higher is more descriptive.
    Conductance,
    /// Lower is more descriptive.
    Surprise,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Conductance => "conductance",
            Criterion::Surprise => "surprise",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conductance" => Ok(Criterion::Conductance),
            "surprise" | "sl" | "surprise-level" => Ok(Criterion::Surprise),
            other => Err(Error::InvalidArgument(format!("unknown criterion {other:?}"))),
        }
    }
}

/// How the chance that a random neighbor shares the category is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipProbability {
    /// `|cat| / N`.
    #[default]
    Proportional,
    /// `(|cat| - 1) / (N - 1)`, excluding the observer itself.
    ExcludingSelf,
}

/// What counts as one close-neighbor relationship for conductance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationCounting {
    /// Unordered pairs `{X, Y}` where either lists the other; a pair touching
    /// the category counts once, including outsiders that list a member.
    #[default]
    Pairs,
    /// Directed entries of members' own neighbor lists.
    Directed,
}

impl FromStr for MembershipProbability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proportional" => Ok(Self::Proportional),
            "excluding_self" | "excluding-self" => Ok(Self::ExcludingSelf),
            other => Err(Error::InvalidArgument(format!("unknown membership probability {other:?}"))),
        }
    }
}

impl FromStr for RelationCounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairs" => Ok(Self::Pairs),
            "directed" => Ok(Self::Directed),
            other => Err(Error::InvalidArgument(format!("unknown relation counting {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub min_size: usize,
    pub probability: MembershipProbability,
    pub counting: RelationCounting,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            min_size: 2,
            probability: MembershipProbability::Proportional,
            counting: RelationCounting::Pairs,
        }
    }
}

/// A neighbor set with its reverse lists, for pair-based counting.
pub struct RelationView<'a, T> {
    nb: &'a NeighborSet<T>,
    incoming: Vec<Vec<usize>>,
}

impl<'a, T: Scalar> RelationView<'a, T> {
    pub fn new(nb: &'a NeighborSet<T>) -> Self {
        let mut incoming = vec![Vec::new(); nb.n_entities()];
        for (a, list) in nb.lists().iter().enumerate() {
            for &(b, _) in list {
                incoming[b].push(a);
            }
        }
        Self { nb, incoming }
    }

    pub fn neighbor_set(&self) -> &'a NeighborSet<T> {
        self.nb
    }

    /// Entities related to `a` in either direction, ascending, deduplicated.
    fn related(&self, a: usize) -> Vec<usize> {
        let mut all: Vec<usize> = self.nb.neighbors(a).iter().map(|p| p.0).collect();
        all.extend_from_slice(&self.incoming[a]);
        all.sort_unstable();
        all.dedup();
        all
    }

    /// `(inside, total)` relationships of `cat` under `counting`.
    pub fn relation_counts(&self, cat: usize, cats: &CategoryIndex, counting: RelationCounting) -> (u64, u64) {
        let mut inside = 0u64;
        let mut other = 0u64;
        for &a in cats.members(cat) {
            match counting {
                RelationCounting::Directed => {
                    for &(b, _) in self.nb.neighbors(a) {
                        if cats.contains(cat, b) {
                            inside += 1;
                        } else {
                            other += 1;
                        }
                    }
                }
                RelationCounting::Pairs => {
                    for b in self.related(a) {
                        if cats.contains(cat, b) {
                            inside += 1;
                        } else {
                            other += 1;
                        }
                    }
                }
            }
        }
        if counting == RelationCounting::Pairs {
            // Each inside pair was seen from both of its members.
            inside /= 2;
        }
        (inside, inside + other)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: usize,
    /// `None` when no member has any close neighbor.
    pub conductance: Option<f64>,
    pub surprise: f64,
    /// Natural log of the mean tail probability, `<= 0`.
    pub log_surprise: f64,
    pub n_members: usize,
    pub n_observers_used: usize,
    pub inside_relations: u64,
    pub member_relations: u64,
}

/// Mean surprise over observers with at least one close neighbor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surprise {
    pub linear: f64,
    pub log: f64,
    pub observers: usize,
}

/// Share of the category's close-neighbor relationships that stay inside
/// it. `None` for singletons or when no relationship touches a member.
pub fn conductance<T: Scalar>(
    cat: usize,
    view: &RelationView<'_, T>,
    cats: &CategoryIndex,
    counting: RelationCounting,
) -> Option<f64> {
    if cats.members(cat).len() < 2 {
        return None;
    }
    let (inside, total) = view.relation_counts(cat, cats, counting);
    (total > 0).then(|| inside as f64 / total as f64)
}

pub fn p_cat(n_members: usize, universe: usize) -> f64 {
    n_members as f64 / universe as f64
}

fn membership_probability(mode: MembershipProbability, n_members: usize, universe: usize) -> f64 {
    match mode {
        MembershipProbability::Proportional => p_cat(n_members, universe),
        MembershipProbability::ExcludingSelf if universe > 1 => {
            n_members.saturating_sub(1) as f64 / (universe - 1) as f64
        }
        MembershipProbability::ExcludingSelf => 1.0,
    }
}

/// Arithmetic mean of tail probabilities given their logs, in linear space
/// when nothing underflows and by log-sum-exp otherwise.
pub fn mean_of_logs(logs: &[f64]) -> (f64, f64) {
    if logs.is_empty() {
        return (1.0, 0.0);
    }
    let k = logs.len() as f64;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > LINEAR_MEAN_FLOOR {
        let mean = logs.iter().map(|l| l.exp()).sum::<f64>() / k;
        (mean, mean.ln().min(0.0))
    } else {
        let log = (log_sum_exp(logs.iter().copied()) - k.ln()).min(0.0);
        (log.exp(), log)
    }
}

/// Surprise level of `cat`: for each member `A` with `C_A >= 1` close
/// neighbors of which `G_A` are members, the binomial tail
/// `P(X >= G_A | C_A, p)`, averaged over those members. `None` for
/// singletons.
pub fn surprise_level<T: Scalar>(
    cat: usize,
    nb: &NeighborSet<T>,
    cats: &CategoryIndex,
    probability: MembershipProbability,
) -> Option<Surprise> {
    let members = cats.members(cat);
    if members.len() < 2 {
        return None;
    }
    let p = membership_probability(probability, members.len(), nb.n_entities());
    let logs: Vec<f64> = members
        .iter()
        .filter_map(|&a| {
            let list = nb.neighbors(a);
            if list.is_empty() {
                return None;
            }
            let g = list.iter().filter(|(b, _)| cats.contains(cat, *b)).count();
            let tail = binomial_tail(list.len() as u64, g as u64, p).expect("g <= c and p in [0, 1]");
            Some(tail.log)
        })
        .collect();
    let (linear, log) = mean_of_logs(&logs);
    Some(Surprise {
        linear,
        log,
        observers: logs.len(),
    })
}

/// Both scores for one category with at least 2 members.
pub fn score_category<T: Scalar>(
    cat: usize,
    view: &RelationView<'_, T>,
    cats: &CategoryIndex,
    opts: &ScoreOptions,
) -> Option<CategoryScore> {
    let s = surprise_level(cat, view.nb, cats, opts.probability)?;
    let (inside, total) = view.relation_counts(cat, cats, opts.counting);
    Some(CategoryScore {
        category: cat,
        conductance: (total > 0).then(|| inside as f64 / total as f64),
        surprise: s.linear,
        log_surprise: s.log,
        n_members: cats.members(cat).len(),
        n_observers_used: s.observers,
        inside_relations: inside,
        member_relations: total,
    })
}

fn check_universe<T: Scalar>(nb: &NeighborSet<T>, cats: &CategoryIndex) -> Result<()> {
    if nb.n_entities() != cats.n_entities() {
        return Err(Error::Incompatible(format!(
            "neighbor set covers {} entities, category index {}",
            nb.n_entities(),
            cats.n_entities()
        )));
    }
    Ok(())
}

/// Scores every category with at least `min_size` members, in category
/// order. Returns the scores and the number of categories skipped.
pub fn score_categories<T: Scalar>(
    nb: &NeighborSet<T>,
    cats: &CategoryIndex,
    opts: &ScoreOptions,
) -> Result<(Vec<CategoryScore>, usize)> {
    check_universe(nb, cats)?;
    let min = opts.min_size.max(2);
    let view = RelationView::new(nb);
    let scores: Vec<CategoryScore> = (0..cats.n_categories())
        .into_par_iter()
        .filter(|&c| cats.members(c).len() >= min)
        .filter_map(|c| score_category(c, &view, cats, opts))
        .collect();
    let skipped = cats.n_categories() - scores.len();
    Ok((scores, skipped))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRanking {
    pub criterion: Criterion,
    /// Most descriptive first.
    pub entries: Vec<CategoryScore>,
    pub skipped: usize,
}

fn criterion_order(criterion: Criterion, a: &CategoryScore, b: &CategoryScore) -> Ordering {
    let primary = match criterion {
        // Undefined conductance sorts after every defined value.
        Criterion::Conductance => match (a.conductance, b.conductance) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        },
        Criterion::Surprise => a.log_surprise.total_cmp(&b.log_surprise),
    };
    primary
        .then(b.n_members.cmp(&a.n_members))
        .then(a.category.cmp(&b.category))
}

impl CoherenceRanking {
    pub fn from_scores(mut scores: Vec<CategoryScore>, criterion: Criterion, skipped: usize) -> Self {
        scores.sort_by(|a, b| criterion_order(criterion, a, b));
        Self {
            criterion,
            entries: scores,
            skipped,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Category indices, most descriptive first.
    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.category).collect()
    }

    pub fn criterion_value(&self, e: &CategoryScore) -> Option<f64> {
        match self.criterion {
            Criterion::Conductance => e.conductance,
            Criterion::Surprise => Some(e.log_surprise),
        }
    }

    /// CSV with columns
    /// `rank,category,criterion_value,conductance,log_surprise,n_members,n_observers_used`.
    /// For the surprise criterion the value is the natural-log surprise.
    pub fn write_csv(&self, path: &Path, names: &Dictionary) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "rank",
            "category",
            "criterion_value",
            "conductance",
            "log_surprise",
            "n_members",
            "n_observers_used",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (r, e) in self.entries.iter().enumerate() {
            w.write_record([
                (r + 1).to_string(),
                names.name(e.category).to_owned(),
                opt(self.criterion_value(e)),
                opt(e.conductance),
                e.log_surprise.to_string(),
                e.n_members.to_string(),
                e.n_observers_used.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Category names of a ranking CSV in rank order.
pub fn read_ranking_order(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "category")
        .ok_or_else(|| Error::parse(path, 1, "missing `category` column"))?;
    let rank_col = headers.iter().position(|h| h == "rank");
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let rank = match rank_col {
            Some(c) => rec[c]
                .parse::<usize>()
                .map_err(|_| Error::parse(path, i + 2, format!("bad rank {:?}", &rec[c])))?,
            None => i + 1,
        };
        rows.push((rank, rec[col].to_owned()));
    }
    rows.sort_by_key(|r| r.0);
    Ok(rows.into_iter().map(|r| r.1).collect())
}

/// Reads a ranking CSV back, interning category names into `names`. The
/// criterion is the one whose column matches `criterion_value`; relation
/// counts are not stored and read as zero.
pub fn read_ranking(path: &Path, names: &mut Dictionary) -> Result<CoherenceRanking> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing `{name}` column")))
    };
    let (c_rank, c_cat, c_value) = (col("rank")?, col("category")?, col("criterion_value")?);
    let (c_cond, c_log) = (col("conductance")?, col("log_surprise")?);
    let (c_members, c_obs) = (col("n_members")?, col("n_observers_used")?);
    let mut rows = Vec::new();
    let mut matches_conductance = true;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |c: usize| -> Result<f64> {
            rec[c].parse().map_err(|_| Error::parse(path, line, format!("bad number {:?}", &rec[c])))
        };
        let count = |c: usize| -> Result<usize> {
            rec[c].parse().map_err(|_| Error::parse(path, line, format!("bad count {:?}", &rec[c])))
        };
        let conductance = if rec[c_cond].is_empty() { None } else { Some(num(c_cond)?) };
        matches_conductance &= rec[c_value] == rec[c_cond];
        let log_surprise = num(c_log)?;
        rows.push((
            count(c_rank)?,
            CategoryScore {
                category: names.intern(&rec[c_cat]),
                conductance,
                surprise: log_surprise.exp(),
                log_surprise,
                n_members: count(c_members)?,
                n_observers_used: count(c_obs)?,
                inside_relations: 0,
                member_relations: 0,
            },
        ));
    }
    rows.sort_by_key(|r| r.0);
    let criterion = if matches_conductance && !rows.is_empty() {
        Criterion::Conductance
    } else {
        Criterion::Surprise
    };
    Ok(CoherenceRanking {
        criterion,
        entries: rows.into_iter().map(|r| r.1).collect(),
        skipped: 0,
    })
}

/// Scores and orders categories under `criterion`.
pub fn rank_categories<T: Scalar>(
    nb: &NeighborSet<T>,
    cats: &CategoryIndex,
    criterion: Criterion,
    opts: &ScoreOptions,
) -> Result<CoherenceRanking> {
    let (scores, skipped) = score_categories(nb, cats, opts)?;
    if scores.is_empty() {
        return Err(Error::Empty(format!(
            "no category has at least {} members",
            opts.min_size.max(2)
        )));
    }
    Ok(CoherenceRanking::from_scores(scores, criterion, skipped))
}
