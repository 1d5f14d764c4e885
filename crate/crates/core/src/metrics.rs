//! Distances between feature rows. Every metric returns a nonnegative value
//! where smaller means closer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default floor applied to the second argument of KL.
pub const KL_EPSILON: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    L1,
    L2,
    Cosine,
    /// `KL(x || y)`, query first.
    KL,
    JS,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::L1,
        MetricKind::L2,
        MetricKind::Cosine,
        MetricKind::KL,
        MetricKind::JS,
    ];

    /// KL and JS are defined only on probability rows.
    pub fn requires_distribution(self) -> bool {
        matches!(self, MetricKind::KL | MetricKind::JS)
    }

    pub fn is_symmetric(self) -> bool {
        self != MetricKind::KL
    }

    pub fn accepts(self, kind: FeatureKind) -> bool {
        kind == FeatureKind::Distribution || !self.requires_distribution()
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::L1 => "l1",
            MetricKind::L2 => "l2",
            MetricKind::Cosine => "cosine",
            MetricKind::KL => "kl",
            MetricKind::JS => "js",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(MetricKind::L1),
            "l2" => Ok(MetricKind::L2),
            "cosine" | "cos" => Ok(MetricKind::Cosine),
            "kl" => Ok(MetricKind::KL),
            "js" => Ok(MetricKind::JS),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub kind: MetricKind,
    /// KL smoothing floor.
    pub epsilon: f64,
}

impl From<MetricKind> for Metric {
    fn from(kind: MetricKind) -> Self {
        Metric {
            kind,
            epsilon: KL_EPSILON,
        }
    }
}

impl Metric {
    /// Distance between two rows, checking lengths and degenerate inputs.
    /// Distribution requirements of KL/JS are the caller's responsibility
    /// here; [`DistanceKernel`] enforces them against the feature kind.
    pub fn distance<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "length mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        Ok(match self.kind {
            MetricKind::L1 => l1(x, y),
            MetricKind::L2 => l2(x, y),
            MetricKind::Cosine => {
                let (nx, ny) = (norm(x), norm(y));
                if nx == T::zero() || ny == T::zero() {
                    return Err(Error::InvalidArgument("cosine distance of a zero vector".into()));
                }
                cosine(x, y, nx, ny)
            }
            MetricKind::KL => kl(x, y, T::of(self.epsilon)),
            MetricKind::JS => js(x, y),
        })
    }
}

pub fn l1<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs())
}

pub fn l2<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| {
            let d = a - b;
            acc + d * d
        })
        .sqrt()
}

pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn norm<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

/// `1 - cos(x, y)` given precomputed nonzero norms, clamped to `[0, 2]`.
pub fn cosine<T: Scalar>(x: &[T], y: &[T], nx: T, ny: T) -> T {
    let two = T::one() + T::one();
    (T::one() - dot(x, y) / (nx * ny)).max(T::zero()).min(two)
}

/// `sum x_i ln(x_i / max(y_i, eps))`, with `0 ln 0 = 0`.
pub fn kl<T: Scalar>(x: &[T], y: &[T], eps: T) -> T {
    x.iter()
        .zip(y)
        .filter(|(&a, _)| a > T::zero())
        .fold(T::zero(), |acc, (&a, &b)| acc + a * (a / b.max(eps)).ln())
        .max(T::zero())
}

/// Jensen-Shannon divergence, natural log, in `[0, ln 2]`.
pub fn js<T: Scalar>(x: &[T], y: &[T]) -> T {
    let half = T::of(0.5);
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let m = (a + b) * half;
        let term = |p: T| if p > T::zero() { p * (p / m).ln() } else { T::zero() };
        // One addition per component keeps js(x, y) == js(y, x) bitwise.
        acc = acc + (term(a) + term(b));
    }
    (acc * half).max(T::zero()).min(T::of(std::f64::consts::LN_2))
}

/// A metric bound to one feature matrix, with per-row norms cached for
/// cosine. Construction validates metric/feature compatibility once so that
/// pairwise evaluation is infallible.
pub struct DistanceKernel<'a, T> {
    metric: Metric,
    features: &'a FeatureMatrix<T>,
    norms: Vec<T>,
}

impl<'a, T: Scalar> DistanceKernel<'a, T> {
    pub fn new(metric: impl Into<Metric>, features: &'a FeatureMatrix<T>) -> Result<Self> {
        let metric = metric.into();
        if !metric.kind.accepts(features.kind()) {
            return Err(Error::Incompatible(format!(
                "{} requires distribution features, got {}",
                metric.kind,
                features.kind()
            )));
        }
        let norms = if metric.kind == MetricKind::Cosine {
            let norms: Vec<T> = features.rows().map(norm).collect();
            if let Some(i) = norms.iter().position(|&n| n == T::zero()) {
                return Err(Error::InvalidArgument(format!(
                    "cosine distance undefined: row {i} is the zero vector"
                )));
            }
            norms
        } else {
            Vec::new()
        };
        Ok(Self {
            metric,
            features,
            norms,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn features(&self) -> &'a FeatureMatrix<T> {
        self.features
    }

    pub fn len(&self) -> usize {
        self.features.n_entities()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance from row `i` to row `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> T {
        let (x, y) = (self.features.row(i), self.features.row(j));
        match self.metric.kind {
            MetricKind::L1 => l1(x, y),
            MetricKind::L2 => l2(x, y),
            MetricKind::Cosine => cosine(x, y, self.norms[i], self.norms[j]),
            MetricKind::KL => kl(x, y, T::of(self.metric.epsilon)),
            MetricKind::JS => js(x, y),
        }
    }
}
