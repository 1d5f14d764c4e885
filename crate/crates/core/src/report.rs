//! Descriptive tables: categories per entity, distance quantiles and
//! top-N category listings.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coherence::{CoherenceRanking, Criterion};
use crate::data::{CategoryIndex, Dictionary};
use crate::error::{Error, Result};
use crate::metrics::DistanceKernel;
use crate::neighbors::{calibrate_thresholds, CalibrationOptions};
use crate::scalar::Scalar;

pub const DEFAULT_QUANTILE_TARGETS: [f64; 5] = [5.0, 10.0, 25.0, 50.0, 100.0];

/// Fixed-width histogram; bucket `i` covers `[i * width, (i + 1) * width)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bucket_width: usize,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn of(values: impl Iterator<Item = usize>, bucket_width: usize) -> Self {
        let mut counts = Vec::new();
        for v in values {
            let b = v / bucket_width;
            if b >= counts.len() {
                counts.resize(b + 1, 0);
            }
            counts[b] += 1;
        }
        Self { bucket_width, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipStats {
    pub n_entities: usize,
    pub mean: f64,
    pub histogram: Histogram,
}

impl MembershipStats {
    fn of(cats: &CategoryIndex, entities: impl Iterator<Item = usize> + Clone, bucket_width: usize) -> Self {
        let sizes = entities.map(|e| cats.memberships(e).len());
        let n = sizes.clone().count();
        let sum: usize = sizes.clone().sum();
        Self {
            n_entities: n,
            mean: if n == 0 { 0.0 } else { sum as f64 / n as f64 },
            histogram: Histogram::of(sizes, bucket_width),
        }
    }
}

/// Categories-per-entity distribution over all entities and an optional
/// subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub overall: MembershipStats,
    pub subset: Option<MembershipStats>,
    pub notes: Vec<String>,
}

pub fn category_stats(cats: &CategoryIndex, subset: Option<&[usize]>, bucket_width: usize) -> Result<CategoryStats> {
    if bucket_width == 0 {
        return Err(Error::InvalidArgument("bucket width must be at least 1".into()));
    }
    if let Some(&e) = subset.and_then(|s| s.iter().find(|&&e| e >= cats.n_entities())) {
        return Err(Error::InvalidArgument(format!("subset entity #{e} out of range")));
    }
    let overall = MembershipStats::of(cats, 0..cats.n_entities(), bucket_width);
    let mut notes = Vec::new();
    let subset = match subset {
        Some([]) => {
            notes.push("subset is empty; subset statistics omitted".to_owned());
            None
        }
        Some(s) => Some(MembershipStats::of(cats, s.iter().copied(), bucket_width)),
        None => None,
    };
    Ok(CategoryStats { overall, subset, notes })
}

impl CategoryStats {
    /// Plot-ready CSV: `bucket_start,overall[,subset]`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let h = &self.overall.histogram;
        let len = h.counts.len().max(self.subset.as_ref().map_or(0, |s| s.histogram.counts.len()));
        match &self.subset {
            Some(_) => w.write_record(["bucket_start", "overall", "subset"])?,
            None => w.write_record(["bucket_start", "overall"])?,
        }
        for b in 0..len {
            let mut rec = vec![(b * h.bucket_width).to_string(), h.counts.get(b).copied().unwrap_or(0).to_string()];
            if let Some(s) = &self.subset {
                rec.push(s.histogram.counts.get(b).copied().unwrap_or(0).to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |label: &str, s: &MembershipStats| {
            let _ = writeln!(
                out,
                "{label}: {} entities, mean {:.4} categories per entity",
                s.n_entities, s.mean
            );
        };
        section("overall", &self.overall);
        if let Some(s) = &self.subset {
            section("subset", s);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub target: f64,
    pub threshold: f64,
    pub exact: bool,
}

/// Calibrated distance threshold per target neighbor count, ascending by
/// target.
pub fn distance_quantiles<T: Scalar>(
    kernel: &DistanceKernel<'_, T>,
    targets: &[f64],
    opts: CalibrationOptions,
) -> Result<Vec<QuantileRow>> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no quantile targets".into()));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let cal = calibrate_thresholds(kernel, &sorted, opts)?;
    Ok(cal
        .into_iter()
        .map(|c| QuantileRow {
            target: c.target,
            threshold: c.threshold,
            exact: c.exact,
        })
        .collect())
}

pub fn write_quantiles_csv(rows: &[QuantileRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["target", "threshold", "exact"])?;
    for r in rows {
        w.write_record([r.target.to_string(), r.threshold.to_string(), r.exact.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn quantiles_text(rows: &[QuantileRow]) -> String {
    let mut out = format!("{:>8}  {:>12}\n", "target", "distance");
    for r in rows {
        let _ = writeln!(out, "{:>8}  {:>12.4}", r.target, r.threshold);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopRow {
    pub rank: usize,
    pub category: String,
    pub log_surprise: f64,
    pub conductance: Option<f64>,
    pub n_members: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopTable {
    pub criterion: Criterion,
    pub rows: Vec<TopRow>,
    pub note: Option<String>,
}

/// First `n` rows of a ranking; the full ranking (with a note) when `n`
/// exceeds its length.
pub fn top_table(ranking: &CoherenceRanking, names: &Dictionary, n: usize) -> Result<TopTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("top N must be at least 1".into()));
    }
    let note = (n > ranking.len())
        .then(|| format!("requested top {n} but the ranking has {} categories", ranking.len()));
    let rows = ranking
        .entries
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, e)| TopRow {
            rank: i + 1,
            category: names.name(e.category).to_owned(),
            log_surprise: e.log_surprise,
            conductance: e.conductance,
            n_members: e.n_members,
        })
        .collect();
    Ok(TopTable {
        criterion: ranking.criterion,
        rows,
        note,
    })
}

impl TopTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["rank", "category", "ln_surprise", "conductance", "n_members"])?;
        for r in &self.rows {
            w.write_record([
                r.rank.to_string(),
                r.category.clone(),
                r.log_surprise.to_string(),
                r.conductance.map(|c| c.to_string()).unwrap_or_default(),
                r.n_members.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.category.chars().count()).max().unwrap_or(0).max(8);
        let mut out = format!(
            "{:>5}  {:<width$}  {:>14}  {:>11}  {:>7}\n",
            "rank", "category", "ln(surprise)", "conductance", "members"
        );
        for r in &self.rows {
            let cond = r.conductance.map(|c| format!("{c:.4}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:>5}  {:<width$}  {:>14.4}  {:>11}  {:>7}",
                r.rank, r.category, r.log_surprise, cond, r.n_members
            );
        }
        if let Some(n) = &self.note {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
