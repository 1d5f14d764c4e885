//! Domain types and file ingestion for every pipeline stage.

mod categories;
mod features;
mod graph;
mod votes;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use categories::{load_categories, read_category_entities, CategoryIndex, CategoryLoadReport};
pub use features::{
    load_features, load_features_binary, read_features, read_features_text, save_features_binary,
    save_features_text, sidecar_path, FeatureKind, FeatureMatrix, RawFeatures,
    DISTRIBUTION_SUM_TOLERANCE,
};
pub use graph::{load_graph, EntityGraph, GraphLoadOptions, GraphLoadReport};
pub use votes::{load_votes, load_votes_interning, Answer, Question, VoteDataset};

/// Bijection between external string ids and dense indices `0..len`.
///
/// Indices are assigned in first-insertion order.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Dictionary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `name`, inserting it if absent.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl PartialEq for Dictionary {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl Eq for Dictionary {}

impl From<Vec<String>> for Dictionary {
    fn from(names: Vec<String>) -> Self {
        let mut d = Dictionary::new();
        for n in &names {
            d.intern(n);
        }
        d
    }
}

impl From<Dictionary> for Vec<String> {
    fn from(d: Dictionary) -> Self {
        d.names
    }
}

impl<S: AsRef<str>> FromIterator<S> for Dictionary {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut d = Dictionary::new();
        for n in iter {
            d.intern(n.as_ref());
        }
        d
    }
}

pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, line)| {
            line.map(|l| (i + 1, l.trim_end_matches('\r').to_owned()))
                .map_err(|e| Error::io(path, e))
        }))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn finish(path: &Path, mut w: impl Write) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes any serializable artifact as pretty JSON.
pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
