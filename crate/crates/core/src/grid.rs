//! Grid search over feature source, metric, closeness and criterion.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{score_categories, CoherenceRanking, Criterion, ScoreOptions};
use crate::data::{CategoryIndex, FeatureMatrix, VoteDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, CheatingScore, EvaluationReport, Fallback};
use crate::metrics::{DistanceKernel, Metric, MetricKind};
use crate::neighbors::{calibrate_thresholds, knn_by_count, neighbors_by_distance, CalibrationOptions, NeighborSet};
use crate::scalar::Scalar;

pub const DEFAULT_SIZES: [usize; 5] = [5, 10, 25, 50, 100];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Ingested,
    TrainedEmbedding,
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSource::Ingested => "ingested",
            FeatureSource::TrainedEmbedding => "embedding",
        })
    }
}

impl FromStr for FeatureSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ingested" => Ok(Self::Ingested),
            "embedding" | "trained_embedding" => Ok(Self::TrainedEmbedding),
            _ => Err(Error::InvalidArgument(format!("unknown feature source {s:?}"))),
        }
    }
}

/// Neighbor definition family; sizes come from the menu.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosenessStrategy {
    Count,
    Distance,
}

impl fmt::Display for ClosenessStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClosenessStrategy::Count => "count",
            ClosenessStrategy::Distance => "distance",
        })
    }
}

impl FromStr for ClosenessStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" | "knn" => Ok(Self::Count),
            "distance" | "threshold" => Ok(Self::Distance),
            _ => Err(Error::InvalidArgument(format!("unknown closeness strategy {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "size", rename_all = "snake_case")]
pub enum ClosenessChoice {
    /// `K` nearest neighbors.
    Count(usize),
    /// Distance threshold giving `K` neighbors on average.
    DistanceAvg(usize),
}

impl ClosenessChoice {
    pub fn strategy(self) -> ClosenessStrategy {
        match self {
            ClosenessChoice::Count(_) => ClosenessStrategy::Count,
            ClosenessChoice::DistanceAvg(_) => ClosenessStrategy::Distance,
        }
    }

    pub fn size(self) -> usize {
        match self {
            ClosenessChoice::Count(k) | ClosenessChoice::DistanceAvg(k) => k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MenuConfig {
    pub feature: FeatureSource,
    pub metric: MetricKind,
    pub closeness: ClosenessChoice,
    pub criterion: Criterion,
}

impl MenuConfig {
    /// File-name friendly label, e.g. `embedding-cosine-count10-surprise`.
    pub fn label(&self) -> String {
        format!(
            "{}-{}-{}{}-{}",
            self.feature,
            self.metric,
            self.closeness.strategy(),
            self.closeness.size(),
            self.criterion
        )
    }
}

/// Choice lists whose product is the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    pub metrics: Vec<MetricKind>,
    pub strategies: Vec<ClosenessStrategy>,
    pub sizes: Vec<usize>,
    pub criteria: Vec<Criterion>,
}

impl Default for Menu {
    fn default() -> Self {
        Self {
            metrics: MetricKind::ALL.to_vec(),
            strategies: vec![ClosenessStrategy::Count, ClosenessStrategy::Distance],
            sizes: DEFAULT_SIZES.to_vec(),
            criteria: vec![Criterion::Conductance, Criterion::Surprise],
        }
    }
}

/// One feature matrix entering the grid.
pub struct FeatureInput<'a, T> {
    pub source: FeatureSource,
    pub features: &'a FeatureMatrix<T>,
}

/// Every valid configuration, in menu order. KL and JS are dropped for
/// point features.
pub fn valid_configs<T: Scalar>(menu: &Menu, inputs: &[FeatureInput<'_, T>]) -> Vec<MenuConfig> {
    let mut out = Vec::new();
    for input in inputs {
        for &metric in &menu.metrics {
            if !metric.accepts(input.features.kind()) {
                continue;
            }
            for &strategy in &menu.strategies {
                for &size in &menu.sizes {
                    let closeness = match strategy {
                        ClosenessStrategy::Count => ClosenessChoice::Count(size),
                        ClosenessStrategy::Distance => ClosenessChoice::DistanceAvg(size),
                    };
                    for &criterion in &menu.criteria {
                        out.push(MenuConfig {
                            feature: input.source,
                            metric,
                            closeness,
                            criterion,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
pub struct GridVotes<'a> {
    pub votes: &'a VoteDataset,
    pub cheating: &'a CheatingScore,
    pub fallback: Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub config: MenuConfig,
    /// Distance threshold; `None` for count closeness.
    pub threshold: Option<f64>,
    pub mean_degree: f64,
    pub n_ranked: usize,
    pub skipped: usize,
    pub evaluation: Option<EvaluationReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub rankings: Vec<CoherenceRanking>,
}

/// Runs every valid configuration. Neighbor sets are computed once per
/// feature and metric at the largest size and narrowed for smaller sizes;
/// category scores are shared between criteria.
pub fn run_grid<T: Scalar>(
    inputs: &[FeatureInput<'_, T>],
    categories: &CategoryIndex,
    menu: &Menu,
    score: &ScoreOptions,
    calibration: CalibrationOptions,
    votes: Option<GridVotes<'_>>,
) -> Result<GridResult> {
    let configs = valid_configs(menu, inputs);
    if configs.is_empty() {
        return Err(Error::InvalidArgument("grid menu has no valid configuration".into()));
    }
    if menu.sizes.contains(&0) {
        return Err(Error::InvalidArgument("neighbor sizes must be at least 1".into()));
    }
    let mut groups: Vec<(usize, MetricKind, ClosenessStrategy)> = Vec::new();
    for c in &configs {
        let input = inputs.iter().position(|i| i.source == c.feature).unwrap_or(0);
        let g = (input, c.metric, c.closeness.strategy());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let per_group: Vec<Vec<(GridRow, CoherenceRanking)>> = groups
        .par_iter()
        .map(|&(input, metric, strategy)| {
            let input = &inputs[input];
            let kernel = DistanceKernel::new(Metric::from(metric), input.features)?;
            let sets = neighbor_sets(&kernel, strategy, &menu.sizes, calibration)?;
            let mut out = Vec::new();
            for (size, nb) in sets {
                let (scores, skipped) = score_categories(&nb, categories, score)?;
                let threshold = match &nb.meta().closeness {
                    crate::neighbors::Closeness::Distance { threshold, .. } => Some(*threshold),
                    crate::neighbors::Closeness::Count { .. } => None,
                };
                for &criterion in &menu.criteria {
                    let closeness = match strategy {
                        ClosenessStrategy::Count => ClosenessChoice::Count(size),
                        ClosenessStrategy::Distance => ClosenessChoice::DistanceAvg(size),
                    };
                    let config = MenuConfig {
                        feature: input.source,
                        metric,
                        closeness,
                        criterion,
                    };
                    let ranking = CoherenceRanking::from_scores(scores.clone(), criterion, skipped);
                    let evaluation = match votes {
                        Some(v) if !ranking.is_empty() => {
                            Some(evaluate(v.votes, &ranking.order(), v.fallback, v.cheating)?)
                        }
                        _ => None,
                    };
                    out.push((
                        GridRow {
                            config,
                            threshold,
                            mean_degree: nb.mean_degree(),
                            n_ranked: ranking.len(),
                            skipped,
                            evaluation,
                        },
                        ranking,
                    ));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut pairs: Vec<(GridRow, CoherenceRanking)> = per_group.into_iter().flatten().collect();
    let position = |c: &MenuConfig| configs.iter().position(|x| x == c).unwrap_or(usize::MAX);
    pairs.sort_by_key(|p| position(&p.0.config));
    let (rows, rankings) = pairs.into_iter().unzip();
    Ok(GridResult { rows, rankings })
}

/// Neighbor sets for every size, derived from one computation at the
/// largest size.
fn neighbor_sets<T: Scalar>(
    kernel: &DistanceKernel<'_, T>,
    strategy: ClosenessStrategy,
    sizes: &[usize],
    calibration: CalibrationOptions,
) -> Result<Vec<(usize, NeighborSet<T>)>> {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let max = *sorted.last().expect("sizes nonempty");
    match strategy {
        ClosenessStrategy::Count => {
            let full = knn_by_count(kernel, max)?;
            sorted.iter().map(|&k| Ok((k, full.truncated(k)?))).collect()
        }
        ClosenessStrategy::Distance => {
            let targets: Vec<f64> = sorted.iter().map(|&k| k as f64).collect();
            let cals = calibrate_thresholds(kernel, &targets, calibration)?;
            let last = cals.last().expect("one calibration per size").clone();
            let full = neighbors_by_distance(kernel, T::of(last.threshold), Some(last))?;
            sorted
                .iter()
                .zip(cals)
                .map(|(&k, cal)| Ok((k, full.within(T::of(cal.threshold), Some(cal))?)))
                .collect()
        }
    }
}

impl GridResult {
    /// Summary CSV with one row per configuration. Evaluation columns are
    /// blank when no votes were supplied.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let m = self
            .rows
            .iter()
            .filter_map(|r| r.evaluation.as_ref().map(|e| e.agreement_histogram.len()))
            .max()
            .unwrap_or(0);
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = [
            "feature",
            "metric",
            "closeness",
            "size",
            "criterion",
            "threshold",
            "mean_degree",
            "n_ranked",
            "skipped",
            "rough_accuracy",
            "improved_accuracy",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=m).map(|i| format!("agreement_{i}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let c = &r.config;
            let mut rec = vec![
                c.feature.to_string(),
                c.metric.to_string(),
                c.closeness.strategy().to_string(),
                c.closeness.size().to_string(),
                c.criterion.to_string(),
                r.threshold.map(|t| t.to_string()).unwrap_or_default(),
                r.mean_degree.to_string(),
                r.n_ranked.to_string(),
                r.skipped.to_string(),
            ];
            match &r.evaluation {
                Some(e) => {
                    rec.push(e.rough_accuracy.to_string());
                    rec.push(e.improved_accuracy.to_string());
                    rec.extend((0..m).map(|i| e.agreement_histogram.get(i).copied().unwrap_or(0.0).to_string()));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 2 + m)),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
