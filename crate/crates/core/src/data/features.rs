use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{create, finish, open_lines, Dictionary};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pre-normalization bound on `|sum(row) - 1|` for distribution rows.
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Unconstrained point embedding.
    Point,
    /// Probability distribution over `dim` outcomes.
    Distribution,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Point => "point",
            FeatureKind::Distribution => "distribution",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "point" => Ok(FeatureKind::Point),
            "distribution" => Ok(FeatureKind::Distribution),
            other => Err(Error::InvalidArgument(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Row-major matrix with one feature vector per entity.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    kind: FeatureKind,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Validates `data` (row-major, `dim` columns). Distribution rows are
    /// checked for nonnegativity and renormalized when their sum lies within
    /// [`DISTRIBUTION_SUM_TOLERANCE`] of 1.
    pub fn new(kind: FeatureKind, dim: usize, mut data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        for (i, row) in data.chunks_mut(dim).enumerate() {
            normalize_row(kind, row).map_err(|m| Error::InvalidArgument(format!("row {i}: {m}")))?;
        }
        Ok(Self { kind, dim, data })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_entities(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.data.chunks(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Converts to another scalar precision (re-validated).
    pub fn cast<U: Scalar>(&self) -> Result<FeatureMatrix<U>> {
        FeatureMatrix::new(
            self.kind,
            self.dim,
            self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        )
    }

    /// Reorders rows so that row `i` is the one named `ids.name(i)`.
    fn aligned_to(self, row_ids: &[String], ids: &Dictionary) -> Result<Self> {
        let mut slot = vec![None; ids.len()];
        let mut unknown = Vec::new();
        for (r, name) in row_ids.iter().enumerate() {
            match ids.get(name) {
                Some(i) if slot[i].is_some() => {
                    return Err(Error::InvalidArgument(format!("entity {name:?} has two feature rows")))
                }
                Some(i) => slot[i] = Some(r),
                None => unknown.push(name.clone()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Incompatible(format!(
                "{} feature rows name entities outside the universe (first: {:?})",
                unknown.len(),
                unknown[0]
            )));
        }
        let missing: Vec<String> = slot
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| ids.name(i).to_owned())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingEntities(missing));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for r in slot.into_iter().flatten() {
            data.extend_from_slice(self.row(r));
        }
        Ok(Self { data, ..self })
    }
}

fn normalize_row<T: Scalar>(kind: FeatureKind, row: &mut [T]) -> std::result::Result<(), String> {
    if let Some(v) = row.iter().find(|v| !v.is_finite()) {
        return Err(format!("non-finite component {v}"));
    }
    if kind == FeatureKind::Distribution {
        if let Some(v) = row.iter().find(|v| **v < T::zero()) {
            return Err(format!("negative component {v} in a distribution row"));
        }
        let sum: f64 = row.iter().map(|v| v.as_f64()).sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(format!("distribution row sums to {sum}"));
        }
        for v in row.iter_mut() {
            *v = T::of(v.as_f64() / sum);
        }
    }
    Ok(())
}

/// Feature rows in file order, with their entity ids.
#[derive(Clone, Debug, PartialEq)]
pub struct RawFeatures<T> {
    pub ids: Vec<String>,
    pub matrix: FeatureMatrix<T>,
}

impl<T: Scalar> RawFeatures<T> {
    pub fn dictionary(&self) -> Dictionary {
        self.ids.iter().collect()
    }
}

fn parse_header(path: &Path, no: usize, line: &str) -> Result<(usize, usize, FeatureKind)> {
    let bad = || Error::parse(path, no, format!("expected header `n dim kind`, got {line:?}"));
    let mut it = line.split_whitespace();
    let n = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let dim = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let kind = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if it.next().is_some() {
        return Err(bad());
    }
    Ok((n, dim, kind))
}

/// Reads the text format: header `n dim kind`, then `entity<TAB>v1 v2 ...`.
pub fn read_features_text<T: Scalar>(path: &Path) -> Result<RawFeatures<T>> {
    let mut header = None;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for line in open_lines(path)? {
        let (no, line) = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((_, dim, kind)) = header else {
            header = Some(parse_header(path, no, &line)?);
            continue;
        };
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, no, "expected `entity<TAB>values`"))?;
        let start = data.len();
        for tok in values.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, no, format!("bad number {tok:?}")))?;
            data.push(T::of(v));
        }
        if data.len() - start != dim {
            return Err(Error::parse(
                path,
                no,
                format!("row has {} values, header declares {dim}", data.len() - start),
            ));
        }
        normalize_row(kind, &mut data[start..]).map_err(|m| Error::parse(path, no, m))?;
        ids.push(id.to_owned());
    }
    let (n, dim, kind) = header.ok_or_else(|| Error::Empty(format!("{} has no header", path.display())))?;
    if ids.len() != n {
        return Err(Error::Incompatible(format!(
            "{}: header declares {n} rows, found {}",
            path.display(),
            ids.len()
        )));
    }
    Ok(RawFeatures {
        ids,
        matrix: FeatureMatrix::new(kind, dim, data)?,
    })
}

pub fn save_features_text<T: Scalar>(path: &Path, ids: &[String], m: &FeatureMatrix<T>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {} {}", m.n_entities(), m.dim(), m.kind()).map_err(io)?;
    for (id, row) in ids.iter().zip(m.rows()) {
        write!(w, "{id}\t").map_err(io)?;
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                w.write_all(b" ").map_err(io)?;
            }
            write!(w, "{v}").map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    finish(path, w)
}

/// Sidecar index of a binary feature file: header line then one id per row.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".idx");
    PathBuf::from(s)
}

/// Writes little-endian `f32` rows plus the `.idx` sidecar.
pub fn save_features_binary<T: Scalar>(path: &Path, ids: &[String], m: &FeatureMatrix<T>) -> Result<()> {
    let mut w = create(path)?;
    for v in m.as_slice() {
        let f = v.to_f32().unwrap_or(f32::NAN);
        w.write_all(&f.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)?;
    let idx = sidecar_path(path);
    let mut w = create(&idx)?;
    writeln!(w, "{} {} {}", m.n_entities(), m.dim(), m.kind()).map_err(|e| Error::io(&idx, e))?;
    for id in ids {
        writeln!(w, "{id}").map_err(|e| Error::io(&idx, e))?;
    }
    finish(&idx, w)
}

pub fn load_features_binary<T: Scalar>(path: &Path) -> Result<RawFeatures<T>> {
    let idx = sidecar_path(path);
    let mut lines = open_lines(&idx)?;
    let (no, first) = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Empty(format!("{} is empty", idx.display())))?;
    let (n, dim, kind) = parse_header(&idx, no, &first)?;
    let ids = lines.map(|l| l.map(|(_, s)| s)).collect::<Result<Vec<_>>>()?;
    if ids.len() != n {
        return Err(Error::Incompatible(format!(
            "{}: header declares {n} ids, found {}",
            idx.display(),
            ids.len()
        )));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != n * dim * 4 {
        return Err(Error::Incompatible(format!(
            "{}: {} bytes, expected {} for {n}x{dim} f32",
            path.display(),
            bytes.len(),
            n * dim * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| T::of(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
        .collect();
    Ok(RawFeatures {
        ids,
        matrix: FeatureMatrix::new(kind, dim, data)?,
    })
}

/// Reads a feature file with its rows in file order; `.bin` selects the
/// binary format, anything else the text format.
pub fn read_features<T: Scalar>(path: &Path) -> Result<RawFeatures<T>> {
    if path.extension().is_some_and(|e| e == "bin") {
        load_features_binary(path)
    } else {
        read_features_text(path)
    }
}

/// Loads features aligned to the entity universe `ids`: every entity must
/// have exactly one row and no row may name an unknown entity.
pub fn load_features<T: Scalar>(
    path: &Path,
    kind: FeatureKind,
    ids: &Dictionary,
) -> Result<FeatureMatrix<T>> {
    let raw = read_features::<T>(path)?;
    if raw.matrix.kind() != kind {
        return Err(Error::Incompatible(format!(
            "{} declares {} features, {kind} requested",
            path.display(),
            raw.matrix.kind()
        )));
    }
    raw.matrix.aligned_to(&raw.ids, ids)
}
