//! Loading pipeline inputs from raw files or persisted intermediates.

use std::path::Path;

use catrank::data::{
    load_categories, load_graph, load_json, read_category_entities, read_features, CategoryIndex, Dictionary, EntityGraph,
    FeatureMatrix, GraphLoadOptions,
};
use catrank::Error;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

/// Category assignments with the entity names they refer to.
#[derive(Debug, Serialize, Deserialize)]
pub struct StoredCategories {
    pub entities: Dictionary,
    pub index: CategoryIndex,
}

pub fn graph(path: &Path, symmetrize: bool) -> CliResult<EntityGraph> {
    if is_json(path) {
        let g: EntityGraph = load_json(path)?;
        if symmetrize {
            let edges: Vec<(usize, usize)> = (0..g.n_entities())
                .flat_map(|v| g.neighbors(v).iter().map(move |&u| (v, u)))
                .collect();
            let g = EntityGraph::from_index_edges(g.ids().clone(), edges, GraphLoadOptions { symmetrize })?;
            return Ok(g);
        }
        return Ok(g);
    }
    let (g, report) = load_graph(path, GraphLoadOptions { symmetrize })?;
    info!(
        "{}: {} entities, {} edges ({} self-loops dropped, {} duplicates)",
        path.display(),
        report.entities,
        report.edges,
        report.self_loops_dropped,
        report.duplicate_edges
    );
    Ok(g)
}

/// Categories over the entity universe `entities`. Assignments naming
/// other entities are skipped.
pub fn categories(path: &Path, entities: &Dictionary) -> CliResult<CategoryIndex> {
    if is_json(path) {
        let stored: StoredCategories = load_json(path)?;
        let mut pairs = Vec::new();
        let mut skipped = 0usize;
        for c in 0..stored.index.n_categories() {
            for &e in stored.index.members(c) {
                match entities.get(stored.entities.name(e)) {
                    Some(t) => pairs.push((t, c)),
                    None => skipped += 1,
                }
            }
        }
        if skipped > 0 {
            warn!("{}: {skipped} assignments name entities outside the universe", path.display());
        }
        if pairs.is_empty() {
            return Err(Error::Empty(format!("{}: no assignment matches the entity universe", path.display())).into());
        }
        return Ok(CategoryIndex::from_assignments(entities.len(), stored.index.names().clone(), pairs)?);
    }
    Ok(load_categories(path, entities)?.0)
}

/// Entity names a category file refers to, in first-appearance order.
pub fn category_entities(path: &Path) -> CliResult<Dictionary> {
    if is_json(path) {
        let stored: StoredCategories = load_json(path)?;
        return Ok(stored.entities);
    }
    Ok(read_category_entities(path)?)
}

/// Features with their own entity universe.
pub fn features(path: &Path) -> CliResult<(Dictionary, FeatureMatrix<f64>)> {
    let raw = read_features::<f64>(path)?;
    let ids = raw.dictionary();
    if ids.len() != raw.ids.len() {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 0,
            message: "entity ids repeat".into(),
        }
        .into());
    }
    Ok((ids, raw.matrix))
}

/// One name per nonblank line.
pub fn name_list(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}
