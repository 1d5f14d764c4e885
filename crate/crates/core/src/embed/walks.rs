use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{create, finish, open_lines, Dictionary, EntityGraph};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_vertex: usize,
    pub walk_length: usize,
    /// Skip-gram context radius.
    pub window: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_vertex: 10,
            walk_length: 40,
            window: 5,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::InvalidArgument("walk_length must be at least 2".into()));
        }
        if self.window < 1 {
            return Err(Error::InvalidArgument("window must be at least 1".into()));
        }
        if self.walks_per_vertex < 1 {
            return Err(Error::InvalidArgument("walks_per_vertex must be at least 1".into()));
        }
        Ok(())
    }
}

/// Truncated random walks over entity indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub walks: usize,
    pub tokens: usize,
    pub mean_length: f64,
    pub truncated_at_sink: usize,
}

impl WalkCorpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// Occurrence count of every entity in `0..n_entities`.
    pub fn frequencies(&self, n_entities: usize) -> Vec<u64> {
        let mut f = vec![0u64; n_entities];
        for &v in self.walks.iter().flatten() {
            f[v] += 1;
        }
        f
    }

    pub fn stats(&self, walk_length: usize) -> CorpusStats {
        let tokens = self.n_tokens();
        CorpusStats {
            walks: self.len(),
            tokens,
            mean_length: tokens as f64 / self.len().max(1) as f64,
            truncated_at_sink: self.walks.iter().filter(|w| w.len() < walk_length).count(),
        }
    }

    /// One walk per line, entity ids separated by spaces.
    pub fn write_text(&self, path: &Path, ids: &Dictionary) -> Result<()> {
        let mut w = create(path)?;
        for walk in &self.walks {
            let line: Vec<String> = walk.iter().map(|&v| escape(ids.name(v))).collect();
            writeln!(w, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        finish(path, w)
    }

    pub fn read_text(path: &Path, ids: &Dictionary) -> Result<Self> {
        let mut walks = Vec::new();
        for line in open_lines(path)? {
            let (no, line) = line?;
            if line.is_empty() {
                continue;
            }
            let walk = line
                .split(' ')
                .map(|tok| {
                    let name = unescape(tok);
                    ids.get(&name)
                        .ok_or_else(|| Error::parse(path, no, format!("unknown entity {name:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            walks.push(walk);
        }
        Ok(Self { walks })
    }
}

fn escape(s: &str) -> String {
    s.replace('%', "%25").replace(' ', "%20").replace('\n', "%0A")
}

fn unescape(s: &str) -> String {
    s.replace("%20", " ").replace("%0A", "\n").replace("%25", "%")
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `walks_per_vertex` rounds; each round visits every vertex once in a
/// seeded shuffled order and starts one walk there. Every step moves to a
/// uniformly chosen out-neighbor; a walk reaching a sink stops early.
///
/// Each walk draws from its own seeded stream, so the corpus is identical
/// regardless of how many rayon workers run it.
pub fn generate_walks(graph: &EntityGraph, cfg: &WalkConfig) -> Result<WalkCorpus> {
    cfg.validate()?;
    let n = graph.n_entities();
    if n == 0 {
        return Err(Error::Empty("graph has no entities".into()));
    }
    let mut walks = Vec::with_capacity(n * cfg.walks_per_vertex);
    let mut order: Vec<usize> = (0..n).collect();
    for round in 0..cfg.walks_per_vertex {
        let mut shuffler = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffler.set_stream(round as u64);
        order.shuffle(&mut shuffler);
        let round_walks: Vec<Vec<usize>> = order
            .par_iter()
            .enumerate()
            .map(|(pos, &start)| {
                let walk_seed = mix(cfg.seed ^ mix((round * n + pos) as u64));
                walk_from(graph, start, cfg.walk_length, &mut ChaCha8Rng::seed_from_u64(walk_seed))
            })
            .collect();
        walks.extend(round_walks);
    }
    Ok(WalkCorpus { walks })
}

pub fn walk_from(graph: &EntityGraph, start: usize, length: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut walk = Vec::with_capacity(length);
    walk.push(start);
    let mut cur = start;
    while walk.len() < length {
        let nbrs = graph.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        cur = nbrs[rng.random_range(0..nbrs.len())];
        walk.push(cur);
    }
    walk
}
