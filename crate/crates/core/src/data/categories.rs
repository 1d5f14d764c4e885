use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, finish, open_lines, Dictionary};
use crate::error::{Error, Result};

/// Category → members and entity → categories, kept as mutually inverse
/// sorted, duplicate-free lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryIndex {
    names: Dictionary,
    members: Vec<Vec<usize>>,
    memberships: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryLoadReport {
    pub assignments: usize,
    pub categories: usize,
    pub skipped_unknown_entities: usize,
    pub duplicate_assignments: usize,
}

impl CategoryIndex {
    /// Builds the index from `(entity, category)` index pairs over a universe
    /// of `n_entities`. Duplicate pairs collapse to one membership.
    pub fn from_assignments(
        n_entities: usize,
        names: Dictionary,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut members = vec![Vec::new(); names.len()];
        let mut memberships = vec![Vec::new(); n_entities];
        for (e, c) in pairs {
            if e >= n_entities || c >= names.len() {
                return Err(Error::InvalidArgument(format!(
                    "assignment ({e}, {c}) out of range"
                )));
            }
            members[c].push(e);
            memberships[e].push(c);
        }
        for list in members.iter_mut().chain(memberships.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            names,
            members,
            memberships,
        })
    }

    pub fn n_categories(&self) -> usize {
        self.members.len()
    }

    pub fn n_entities(&self) -> usize {
        self.memberships.len()
    }

    pub fn names(&self) -> &Dictionary {
        &self.names
    }

    pub fn members(&self, cat: usize) -> &[usize] {
        &self.members[cat]
    }

    pub fn memberships(&self, entity: usize) -> &[usize] {
        &self.memberships[entity]
    }

    pub fn contains(&self, cat: usize, entity: usize) -> bool {
        self.members[cat].binary_search(&entity).is_ok()
    }

    /// Writes `entity<TAB>category` lines in category order, which reloads to
    /// an identical index over the same entity dictionary.
    pub fn write_tsv(&self, path: &Path, entities: &Dictionary) -> Result<()> {
        let mut w = create(path)?;
        for (c, list) in self.members.iter().enumerate() {
            for &e in list {
                writeln!(w, "{}\t{}", entities.name(e), self.names.name(c))
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        finish(path, w)
    }
}

/// Reads `entity<TAB>category` assignments. Entities unknown to `entities`
/// are skipped and counted.
pub fn load_categories(
    path: &Path,
    entities: &Dictionary,
) -> Result<(CategoryIndex, CategoryLoadReport)> {
    let mut names = Dictionary::new();
    let mut pairs = Vec::new();
    let mut report = CategoryLoadReport::default();
    for line in open_lines(path)? {
        let (no, line) = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (entity, cat) = match line.split_once('\t') {
            Some((e, c)) if !e.is_empty() && !c.is_empty() && !c.contains('\t') => (e, c),
            _ => {
                return Err(Error::parse(
                    path,
                    no,
                    format!("expected `entity<TAB>category`, got {line:?}"),
                ))
            }
        };
        match entities.get(entity) {
            Some(e) => pairs.push((e, names.intern(cat))),
            None => report.skipped_unknown_entities += 1,
        }
    }
    if pairs.is_empty() {
        return Err(Error::Empty(format!(
            "{} has no assignments for known entities",
            path.display()
        )));
    }
    let listed = pairs.len();
    let index = CategoryIndex::from_assignments(entities.len(), names, pairs)?;
    report.assignments = index.members.iter().map(Vec::len).sum();
    report.duplicate_assignments = listed - report.assignments;
    report.categories = index.n_categories();
    if report.skipped_unknown_entities > 0 {
        log::warn!(
            "{}: skipped {} assignments for unknown entities",
            path.display(),
            report.skipped_unknown_entities
        );
    }
    Ok((index, report))
}

/// Entity names of a category file in first-appearance order, for use as
/// the universe when no graph is at hand.
pub fn read_category_entities(path: &Path) -> Result<Dictionary> {
    let mut ids = Dictionary::new();
    for line in open_lines(path)? {
        let (no, line) = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((e, _)) if !e.is_empty() => {
                ids.intern(e);
            }
            _ => return Err(Error::parse(path, no, format!("expected `entity<TAB>category`, got {line:?}"))),
        }
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(content: &str, entities: &[&str]) -> Result<(CategoryIndex, CategoryLoadReport)> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        let dict: Dictionary = entities.iter().collect();
        load_categories(f.path(), &dict)
    }

    #[test]
    fn members_and_memberships() {
        let (idx, _) = load("A\tcat1\nB\tcat1\nA\tcat2\n", &["A", "B"]).unwrap();
        assert_eq!(idx.members(0), &[0, 1]);
        assert_eq!(idx.members(1), &[0]);
        assert_eq!(idx.memberships(0), &[0, 1]);
    }

    #[test]
    fn unknown_entity_skipped_with_count() {
        let (idx, r) = load("A\tcat1\nZ\tcat1\n", &["A", "B"]).unwrap();
        assert_eq!(r.skipped_unknown_entities, 1);
        assert_eq!(idx.members(0), &[0]);
    }

    #[test]
    fn duplicate_line_single_membership() {
        let (idx, r) = load("A\tcat1\nA\tcat1\n", &["A"]).unwrap();
        assert_eq!(idx.members(0), &[0]);
        assert_eq!(r.duplicate_assignments, 1);
    }

    #[test]
    fn no_retained_assignments_is_error() {
        assert!(matches!(load("Z\tcat1\n", &["A"]), Err(Error::Empty(_))));
    }

    #[test]
    fn tsv_round_trip() {
        let (idx, _) = load("B\tx\nA\ty\nA\tx\n", &["A", "B"]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        let dict: Dictionary = ["A", "B"].into_iter().collect();
        idx.write_tsv(f.path(), &dict).unwrap();
        let (back, _) = load_categories(f.path(), &dict).unwrap();
        assert_eq!(back, idx);
    }

    proptest! {
        #[test]
        fn inverse_maps_are_consistent(pairs in prop::collection::vec((0usize..15, 0usize..6), 1..60)) {
            let names: Dictionary = (0..6).map(|c| format!("c{c}")).collect();
            let idx = CategoryIndex::from_assignments(15, names, pairs).unwrap();
            for c in 0..idx.n_categories() {
                prop_assert!(idx.members(c).windows(2).all(|w| w[0] < w[1]));
            }
            for e in 0..15 {
                for c in 0..6 {
                    prop_assert_eq!(idx.members(c).contains(&e), idx.memberships(e).contains(&c));
                }
            }
        }
    }
}
