//! Directed close-neighbor relations: exact k nearest by count, or every
//! entity within a distance threshold calibrated to a target mean degree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{create, finish, load_json, open_lines, save_json, Dictionary};
use crate::error::{Error, Result};
use crate::metrics::{DistanceKernel, MetricKind};
use crate::scalar::{cmp_scalar, Scalar};

/// Above this many entities, thresholds are estimated from sampled pairs.
pub const DEFAULT_EXACT_LIMIT: usize = 20_000;
pub const DEFAULT_SAMPLE_PAIRS: usize = 10_000_000;

/// How a neighbor set was defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum Closeness {
    Count { k: usize },
    Distance {
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        calibration: Option<Calibration>,
    },
}

/// Outcome of threshold calibration for one target mean degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target: f64,
    pub threshold: f64,
    /// 1-based rank among directed pair distances, `ceil(target * n)`.
    pub directed_rank: u64,
    pub exact: bool,
    /// Number of sampled pairs, 0 when exact.
    pub sample_pairs: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborMeta {
    pub metric: MetricKind,
    pub closeness: Closeness,
    pub n_entities: usize,
    /// Mean degree counts directed pairs.
    pub directed: bool,
    /// `k` exceeded `n - 1` and lists were clamped.
    pub clamped: bool,
}

/// Per-entity neighbor lists sorted ascending by `(distance, index)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSet<T> {
    lists: Vec<Vec<(usize, T)>>,
    meta: NeighborMeta,
}

impl<T: Scalar> NeighborSet<T> {
    /// Wraps explicit lists, sorting them and rejecting self-references.
    pub fn from_lists(mut lists: Vec<Vec<(usize, T)>>, meta: NeighborMeta) -> Result<Self> {
        let n = lists.len();
        for (i, list) in lists.iter_mut().enumerate() {
            if let Some(&(j, _)) = list.iter().find(|(j, _)| *j == i || *j >= n) {
                return Err(Error::InvalidArgument(format!("entity {i} lists invalid neighbor {j}")));
            }
            list.sort_by(|a, b| by_distance_then_index(*a, *b));
        }
        Ok(Self { lists, meta })
    }

    pub fn n_entities(&self) -> usize {
        self.lists.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, T)] {
        &self.lists[i]
    }

    pub fn lists(&self) -> &[Vec<(usize, T)>] {
        &self.lists
    }

    pub fn meta(&self) -> &NeighborMeta {
        &self.meta
    }

    pub fn n_relations(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn mean_degree(&self) -> f64 {
        self.n_relations() as f64 / self.n_entities().max(1) as f64
    }

    /// The k-nearest set for a smaller `k`, from an exact count set.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        match self.meta.closeness {
            Closeness::Count { k: have } if k <= have => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "cannot derive k = {k} from {:?}",
                    self.meta.closeness
                )))
            }
        }
        let lists = self.lists.iter().map(|l| l[..k.min(l.len())].to_vec()).collect();
        let clamped = k > self.n_entities().saturating_sub(1);
        Ok(Self {
            lists,
            meta: NeighborMeta {
                closeness: Closeness::Count { k },
                clamped,
                ..self.meta.clone()
            },
        })
    }

    /// The threshold set for a smaller `threshold`, from a threshold set.
    pub fn within(&self, threshold: T, calibration: Option<Calibration>) -> Result<Self> {
        match self.meta.closeness {
            Closeness::Distance { threshold: have, .. } if threshold.as_f64() <= have => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "cannot derive threshold {threshold} from {:?}",
                    self.meta.closeness
                )))
            }
        }
        let lists = self
            .lists
            .iter()
            .map(|l| l.iter().copied().take_while(|&(_, d)| d <= threshold).collect())
            .collect();
        Ok(Self {
            lists,
            meta: NeighborMeta {
                closeness: Closeness::Distance {
                    threshold: threshold.as_f64(),
                    calibration,
                },
                ..self.meta.clone()
            },
        })
    }

    /// Writes `entity<TAB>neighbor:distance,...` plus a `.meta.json` sidecar.
    pub fn write_tsv(&self, path: &Path, ids: &Dictionary) -> Result<()> {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        for (i, list) in self.lists.iter().enumerate() {
            write!(w, "{}\t", escape(ids.name(i))).map_err(io)?;
            for (p, &(j, d)) in list.iter().enumerate() {
                if p > 0 {
                    w.write_all(b",").map_err(io)?;
                }
                write!(w, "{}:{}", escape(ids.name(j)), d).map_err(io)?;
            }
            w.write_all(b"\n").map_err(io)?;
        }
        finish(path, w)?;
        save_json(&meta_path(path), &self.meta)
    }

    /// Reads a neighbor TSV; the entity universe is the line order. Metadata
    /// is read from the sidecar when present.
    pub fn read_tsv(path: &Path) -> Result<(Dictionary, Self)> {
        let mut ids = Dictionary::new();
        let mut raw: Vec<Vec<(String, T)>> = Vec::new();
        for line in open_lines(path)? {
            let (no, line) = line?;
            if line.is_empty() {
                continue;
            }
            let (entity, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, no, "expected `entity<TAB>neighbors`"))?;
            let i = ids.intern(&unescape(entity));
            if i != raw.len() {
                return Err(Error::parse(path, no, format!("entity {entity:?} listed twice")));
            }
            let mut list = Vec::new();
            for item in rest.split(',').filter(|s| !s.is_empty()) {
                let (nb, d) = item
                    .rsplit_once(':')
                    .ok_or_else(|| Error::parse(path, no, format!("expected `neighbor:distance`, got {item:?}")))?;
                let d: f64 = d
                    .parse()
                    .map_err(|_| Error::parse(path, no, format!("bad distance {d:?}")))?;
                list.push((unescape(nb), T::of(d)));
            }
            raw.push(list);
        }
        let mut lists = Vec::with_capacity(raw.len());
        for list in raw {
            let mut resolved = Vec::with_capacity(list.len());
            for (nb, d) in list {
                let j = ids.get(&nb).ok_or_else(|| {
                    Error::Incompatible(format!("{}: neighbor {nb:?} has no line of its own", path.display()))
                })?;
                resolved.push((j, d));
            }
            lists.push(resolved);
        }
        let mp = meta_path(path);
        let meta = if mp.exists() {
            load_json(&mp)?
        } else {
            NeighborMeta {
                metric: MetricKind::L2,
                closeness: Closeness::Count {
                    k: lists.iter().map(Vec::len).max().unwrap_or(0),
                },
                n_entities: lists.len(),
                directed: true,
                clamped: false,
            }
        };
        Ok((ids, Self::from_lists(lists, meta)?))
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '%' => out.push_str("%25"),
            '\t' => out.push_str("%09"),
            '\n' => out.push_str("%0A"),
            ',' => out.push_str("%2C"),
            ':' => out.push_str("%3A"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    if !s.contains('%') {
        return s.to_owned();
    }
    s.replace("%2C", ",")
        .replace("%3A", ":")
        .replace("%09", "\t")
        .replace("%0A", "\n")
        .replace("%25", "%")
}

fn by_distance_then_index<T: Scalar>(a: (usize, T), b: (usize, T)) -> Ordering {
    cmp_scalar(a.1, b.1).then(a.0.cmp(&b.0))
}

#[derive(Clone, Copy)]
struct Candidate<T>(usize, T);

impl<T: Scalar> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Candidate<T> {}
impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        by_distance_then_index((self.0, self.1), (other.0, other.1))
    }
}

/// Exact k nearest neighbors of every entity, ties broken toward the lower
/// index. Runs query-parallel on the current rayon pool; output does not
/// depend on the number of workers.
pub fn knn_by_count<T: Scalar>(kernel: &DistanceKernel<'_, T>, k: usize) -> Result<NeighborSet<T>> {
    let n = kernel.len();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("k-nearest neighbors need at least 2 entities".into()));
    }
    let clamped = k > n - 1;
    if clamped {
        log::warn!("k = {k} but only {} other entities; lists hold all of them", n - 1);
    }
    let keep = k.min(n - 1);
    let lists = (0..n)
        .into_par_iter()
        .with_min_len(16)
        .map(|i| {
            let mut heap: BinaryHeap<Candidate<T>> = BinaryHeap::with_capacity(keep + 1);
            for j in (0..n).filter(|&j| j != i) {
                let c = Candidate(j, kernel.dist(i, j));
                if heap.len() < keep {
                    heap.push(c);
                } else if c < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(c);
                }
            }
            heap.into_sorted_vec().into_iter().map(|c| (c.0, c.1)).collect()
        })
        .collect();
    Ok(NeighborSet {
        lists,
        meta: NeighborMeta {
            metric: kernel.metric().kind,
            closeness: Closeness::Count { k },
            n_entities: n,
            directed: true,
            clamped,
        },
    })
}

/// Every other entity within `threshold` (inclusive). Under symmetric metrics
/// the relation is symmetric.
pub fn neighbors_by_distance<T: Scalar>(
    kernel: &DistanceKernel<'_, T>,
    threshold: T,
    calibration: Option<Calibration>,
) -> Result<NeighborSet<T>> {
    if !(threshold >= T::zero()) {
        return Err(Error::InvalidArgument(format!("threshold must be >= 0, got {threshold}")));
    }
    let n = kernel.len();
    let lists = (0..n)
        .into_par_iter()
        .with_min_len(16)
        .map(|i| {
            let mut list: Vec<(usize, T)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, kernel.dist(i, j)))
                .filter(|&(_, d)| d <= threshold)
                .collect();
            list.sort_by(|a, b| by_distance_then_index(*a, *b));
            list
        })
        .collect();
    Ok(NeighborSet {
        lists,
        meta: NeighborMeta {
            metric: kernel.metric().kind,
            closeness: Closeness::Distance {
                threshold: threshold.as_f64(),
                calibration,
            },
            n_entities: n,
            directed: true,
            clamped: false,
        },
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CalibrationOptions {
    pub exact_limit: usize,
    pub sample_pairs: usize,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            exact_limit: DEFAULT_EXACT_LIMIT,
            sample_pairs: DEFAULT_SAMPLE_PAIRS,
            seed: 0,
        }
    }
}

/// Distance threshold keeping on average `target` directed close neighbors
/// per entity: the `ceil(target * n)`-th smallest directed pair distance.
pub fn calibrate_threshold<T: Scalar>(
    kernel: &DistanceKernel<'_, T>,
    target: f64,
    opts: CalibrationOptions,
) -> Result<Calibration> {
    Ok(calibrate_thresholds(kernel, &[target], opts)?.remove(0))
}

/// [`calibrate_threshold`] for several targets, sharing distance passes.
pub fn calibrate_thresholds<T: Scalar>(
    kernel: &DistanceKernel<'_, T>,
    targets: &[f64],
    opts: CalibrationOptions,
) -> Result<Vec<Calibration>> {
    let n = kernel.len();
    if n < 2 {
        return Err(Error::InvalidArgument("calibration needs at least 2 entities".into()));
    }
    let mut ranks = Vec::with_capacity(targets.len());
    for &t in targets {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("target mean degree must be > 0, got {t}")));
        }
        if t >= (n - 1) as f64 {
            return Err(Error::InvalidArgument(format!(
                "target mean degree {t} must be below n - 1 = {}",
                n - 1
            )));
        }
        ranks.push((t * n as f64).ceil() as u64);
    }
    let exact = n <= opts.exact_limit;
    let thresholds: Vec<T> = if exact {
        let pairs = PairStream {
            kernel,
            directed: !kernel.metric().kind.is_symmetric(),
        };
        // Each unordered distance appears twice among directed pairs.
        let adjusted: Vec<u64> = if pairs.directed {
            ranks.clone()
        } else {
            ranks.iter().map(|r| r.div_ceil(2)).collect()
        };
        select_ranks(&pairs, &adjusted)
    } else {
        sampled_quantiles(kernel, &ranks, opts)
    };
    Ok(targets
        .iter()
        .zip(ranks)
        .zip(thresholds)
        .map(|((&target, directed_rank), d)| Calibration {
            target,
            threshold: d.as_f64(),
            directed_rank,
            exact,
            sample_pairs: if exact { 0 } else { opts.sample_pairs },
            seed: opts.seed,
        })
        .collect())
}

fn sampled_quantiles<T: Scalar>(kernel: &DistanceKernel<'_, T>, ranks: &[u64], opts: CalibrationOptions) -> Vec<T> {
    let n = kernel.len();
    let total = (n as f64) * (n as f64 - 1.0);
    let s = opts.sample_pairs.max(1);
    const CHUNK: usize = 1 << 16;
    let mut sample: Vec<T> = (0..s.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(s - c * CHUNK);
            (0..len)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    kernel.dist(i, j)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    sample.par_sort_unstable_by(|a, b| cmp_scalar(*a, *b));
    ranks
        .iter()
        .map(|&r| {
            let q = r as f64 / total;
            let idx = ((q * s as f64).ceil() as usize).clamp(1, s) - 1;
            sample[idx]
        })
        .collect()
}

/// All pair distances of a kernel: unordered `i < j` for symmetric metrics,
/// ordered `i != j` otherwise.
struct PairStream<'k, 'a, T> {
    kernel: &'k DistanceKernel<'a, T>,
    directed: bool,
}

impl<T: Scalar> PairStream<'_, '_, T> {
    fn fold<A: Send>(
        &self,
        init: impl Fn() -> A + Sync + Send,
        step: impl Fn(&mut A, T) + Sync + Send,
        merge: impl Fn(A, A) -> A + Sync + Send,
    ) -> A {
        let n = self.kernel.len();
        (0..n)
            .into_par_iter()
            .fold(&init, |mut acc, i| {
                let start = if self.directed { 0 } else { i + 1 };
                for j in start..n {
                    if j != i {
                        step(&mut acc, self.kernel.dist(i, j));
                    }
                }
                acc
            })
            .reduce(&init, &merge)
    }
}

const BINS: usize = 4096;
const COLLECT_CAP: u64 = 1 << 22;

#[derive(Clone)]
struct Bin<T> {
    count: u64,
    min: T,
    max: T,
}

/// Values `lo <= v <= hi` of the pair stream, `below` of them strictly smaller.
struct Window<T> {
    rank: u64,
    lo: T,
    hi: T,
    below: u64,
    len: u64,
    answer: Option<T>,
}

enum Probe<T> {
    Hist(Vec<Bin<T>>),
    Collect(Vec<T>),
    Idle,
}

fn bin_of<T: Scalar>(v: T, lo: T, hi: T) -> usize {
    let f = (v.as_f64() - lo.as_f64()) / (hi.as_f64() - lo.as_f64()) * BINS as f64;
    (f as usize).min(BINS - 1)
}

/// Exact order statistics (1-based ranks) of the pair stream without
/// materializing it: histogram refinement until a window is small enough to
/// collect and select from. Bin membership is monotone in the value, so each
/// bin is exactly the closed range `[bin.min, bin.max]`.
fn select_ranks<T: Scalar>(pairs: &PairStream<'_, '_, T>, ranks: &[u64]) -> Vec<T> {
    let (count, lo, hi) = pairs.fold(
        || (0u64, T::infinity(), T::neg_infinity()),
        |acc, v| {
            acc.0 += 1;
            acc.1 = acc.1.min(v);
            acc.2 = acc.2.max(v);
        },
        |a, b| (a.0 + b.0, a.1.min(b.1), a.2.max(b.2)),
    );
    let mut windows: Vec<Window<T>> = ranks
        .iter()
        .map(|&r| Window {
            rank: r.clamp(1, count),
            lo,
            hi,
            below: 0,
            len: count,
            answer: None,
        })
        .collect();
    loop {
        for w in windows.iter_mut().filter(|w| w.answer.is_none() && w.lo >= w.hi) {
            w.answer = Some(w.lo);
        }
        if windows.iter().all(|w| w.answer.is_some()) {
            break;
        }
        let probes = || -> Vec<Probe<T>> {
            windows
                .iter()
                .map(|w| match (w.answer, w.len <= COLLECT_CAP) {
                    (Some(_), _) => Probe::Idle,
                    (None, true) => Probe::Collect(Vec::new()),
                    (None, false) => Probe::Hist(vec![
                        Bin {
                            count: 0,
                            min: T::infinity(),
                            max: T::neg_infinity()
                        };
                        BINS
                    ]),
                })
                .collect()
        };
        let bounds: Vec<(T, T)> = windows.iter().map(|w| (w.lo, w.hi)).collect();
        let result = pairs.fold(
            probes,
            |acc, v| {
                for (p, &(lo, hi)) in acc.iter_mut().zip(&bounds) {
                    if v < lo || v > hi {
                        continue;
                    }
                    match p {
                        Probe::Hist(bins) => {
                            let b = &mut bins[bin_of(v, lo, hi)];
                            b.count += 1;
                            b.min = b.min.min(v);
                            b.max = b.max.max(v);
                        }
                        Probe::Collect(vals) => vals.push(v),
                        Probe::Idle => {}
                    }
                }
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    match (x, y) {
                        (Probe::Hist(xs), Probe::Hist(ys)) => {
                            for (bx, by) in xs.iter_mut().zip(ys) {
                                bx.count += by.count;
                                bx.min = bx.min.min(by.min);
                                bx.max = bx.max.max(by.max);
                            }
                        }
                        (Probe::Collect(xs), Probe::Collect(ys)) => xs.extend(ys),
                        _ => {}
                    }
                }
                a
            },
        );
        for (w, probe) in windows.iter_mut().zip(result) {
            match probe {
                Probe::Collect(mut vals) => {
                    let k = (w.rank - w.below - 1) as usize;
                    let (_, v, _) = vals.select_nth_unstable_by(k, |a, b| cmp_scalar(*a, *b));
                    w.answer = Some(*v);
                }
                Probe::Hist(bins) => {
                    let need = w.rank - w.below;
                    let mut cum = 0;
                    for b in bins {
                        if cum + b.count >= need {
                            w.lo = b.min;
                            w.hi = b.max;
                            w.below += cum;
                            w.len = b.count;
                            break;
                        }
                        cum += b.count;
                    }
                }
                Probe::Idle => {}
            }
        }
    }
    windows.into_iter().map(|w| w.answer.expect("resolved")).collect()
}
