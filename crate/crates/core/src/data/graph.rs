use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, finish, open_lines, Dictionary};
use crate::error::{Error, Result};

/// Directed adjacency over dense entity indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityGraph {
    ids: Dictionary,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GraphLoadOptions {
    /// Add the reverse of every edge.
    pub symmetrize: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphLoadReport {
    pub entities: usize,
    pub edges: usize,
    pub self_loops_dropped: usize,
    pub duplicate_edges: usize,
}

impl EntityGraph {
    /// Builds a graph from named edges, dropping self-loops and duplicates.
    /// Every name that appears (including in a self-loop) becomes an entity.
    pub fn from_edges<'a>(
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
        opts: GraphLoadOptions,
    ) -> (Self, GraphLoadReport) {
        let mut ids = Dictionary::new();
        let mut pairs = Vec::new();
        let mut report = GraphLoadReport::default();
        for (s, d) in edges {
            let s = ids.intern(s);
            let d = ids.intern(d);
            if s == d {
                report.self_loops_dropped += 1;
            } else {
                pairs.push((s, d));
            }
        }
        let (graph, duplicates) = Self::assemble(ids, pairs, opts);
        report.duplicate_edges = duplicates;
        report.entities = graph.n_entities();
        report.edges = graph.n_edges();
        (graph, report)
    }

    /// Builds a graph over an existing id space from index pairs.
    pub fn from_index_edges(
        ids: Dictionary,
        edges: impl IntoIterator<Item = (usize, usize)>,
        opts: GraphLoadOptions,
    ) -> Result<Self> {
        let n = ids.len();
        let mut pairs = Vec::new();
        for (s, d) in edges {
            if s >= n || d >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({s}, {d}) outside entity range 0..{n}"
                )));
            }
            if s != d {
                pairs.push((s, d));
            }
        }
        Ok(Self::assemble(ids, pairs, opts).0)
    }

    fn assemble(
        ids: Dictionary,
        pairs: Vec<(usize, usize)>,
        opts: GraphLoadOptions,
    ) -> (Self, usize) {
        let mut adjacency = vec![Vec::new(); ids.len()];
        let mut listed = 0;
        for (s, d) in pairs {
            adjacency[s].push(d);
            listed += 1;
            if opts.symmetrize {
                adjacency[d].push(s);
            }
        }
        let mut kept = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            kept += list.len();
        }
        // Reverse edges added by symmetrization are not duplicates of input lines.
        let duplicates = if opts.symmetrize { 0 } else { listed - kept };
        (Self { ids, adjacency }, duplicates)
    }

    pub fn n_entities(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn ids(&self) -> &Dictionary {
        &self.ids
    }

    /// Sorted out-neighbors of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Writes the edge list as TSV. Entities without out-edges that are not
    /// reachable as a destination are lost, use JSON persistence for exact
    /// round-trips.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        for (s, list) in self.adjacency.iter().enumerate() {
            for &d in list {
                writeln!(w, "{}\t{}", self.ids.name(s), self.ids.name(d))
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        finish(path, w)
    }
}

/// Reads a `src<TAB>dst` edge list. Blank lines and `#` comments are skipped.
pub fn load_graph(path: &Path, opts: GraphLoadOptions) -> Result<(EntityGraph, GraphLoadReport)> {
    let mut edges = Vec::new();
    for line in open_lines(path)? {
        let (no, line) = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(d), None) if !s.is_empty() && !d.is_empty() => {
                edges.push((s.to_owned(), d.to_owned()))
            }
            _ => {
                return Err(Error::parse(
                    path,
                    no,
                    format!("expected `src<TAB>dst`, got {line:?}"),
                ))
            }
        }
    }
    let (graph, report) =
        EntityGraph::from_edges(edges.iter().map(|(s, d)| (s.as_str(), d.as_str())), opts);
    if graph.n_entities() == 0 {
        return Err(Error::Empty(format!("{} contains no edges", path.display())));
    }
    log::info!(
        "loaded graph {}: {} entities, {} edges, {} self-loops dropped, {} duplicates",
        path.display(),
        report.entities,
        report.edges,
        report.self_loops_dropped,
        report.duplicate_edges
    );
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn self_loop_dropped_and_counted() {
        let f = write_tmp("A\tB\nB\tA\nA\tA\n");
        let (g, r) = load_graph(f.path(), GraphLoadOptions::default()).unwrap();
        assert_eq!(g.n_entities(), 2);
        assert_eq!(g.n_edges(), 2);
        assert_eq!(r.self_loops_dropped, 1);
    }

    #[test]
    fn duplicate_edges_deduplicated() {
        let f = write_tmp("# comment\nA\tB\n\nA\tB\n");
        let (g, r) = load_graph(f.path(), GraphLoadOptions::default()).unwrap();
        assert_eq!(g.n_entities(), 2);
        assert_eq!(g.n_edges(), 1);
        assert_eq!(r.duplicate_edges, 1);
    }

    #[test]
    fn missing_tab_is_a_parse_error_with_line() {
        let f = write_tmp("A\tB\nA\n");
        match load_graph(f.path(), GraphLoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("# nothing\n");
        assert!(matches!(
            load_graph(f.path(), GraphLoadOptions::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn symmetrize_adds_reverse_edges() {
        let (g, _) = EntityGraph::from_edges([("A", "B"), ("B", "C")], GraphLoadOptions { symmetrize: true });
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.n_edges(), 4);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (g, _) = EntityGraph::from_edges([("A", "B"), ("C", "C"), ("B", "A")], GraphLoadOptions::default());
        let s = serde_json::to_string(&g).unwrap();
        let back: EntityGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.n_entities(), 3);
    }
}
