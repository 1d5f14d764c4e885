//! Random-walk entity embeddings: truncated walks over the graph, then
//! skip-gram training over the walk corpus.

mod huffman;
mod skipgram;
mod walks;

use serde::{Deserialize, Serialize};

pub use huffman::{build_huffman, HuffmanTree};
pub use skipgram::{train_skipgram, Objective, PairGradient, SkipGramConfig, SkipGramModel};
pub use walks::{generate_walks, walk_from, CorpusStats, WalkConfig, WalkCorpus};

use crate::data::{EntityGraph, FeatureKind, FeatureMatrix};
use crate::error::Result;
use crate::scalar::Scalar;

/// Hyperparameters and corpus statistics of a trained embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub walks: WalkConfig,
    pub model: SkipGramConfig,
    pub corpus: CorpusStats,
    pub n_entities: usize,
}

/// Walks, codes and trains; returns the input vectors as point features.
/// The skip-gram window is taken from `walk_cfg`.
pub fn embed<T: Scalar>(
    graph: &EntityGraph,
    walk_cfg: &WalkConfig,
    model_cfg: &SkipGramConfig,
) -> Result<(FeatureMatrix<T>, EmbeddingMeta)> {
    let corpus = generate_walks(graph, walk_cfg)?;
    embed_corpus(&corpus, graph.n_entities(), walk_cfg, model_cfg)
}

pub fn embed_corpus<T: Scalar>(
    corpus: &WalkCorpus,
    n_entities: usize,
    walk_cfg: &WalkConfig,
    model_cfg: &SkipGramConfig,
) -> Result<(FeatureMatrix<T>, EmbeddingMeta)> {
    let model_cfg = SkipGramConfig {
        window: walk_cfg.window,
        ..*model_cfg
    };
    let model = train_skipgram::<T>(corpus, n_entities, &model_cfg)?;
    let dim = model.dim();
    let features = FeatureMatrix::new(FeatureKind::Point, dim, model.into_input_vectors())?;
    Ok((
        features,
        EmbeddingMeta {
            walks: *walk_cfg,
            model: model_cfg,
            corpus: corpus.stats(walk_cfg.walk_length),
            n_entities,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GraphLoadOptions;

    fn triangle() -> EntityGraph {
        EntityGraph::from_edges(
            [("A", "B"), ("B", "C"), ("C", "A")],
            GraphLoadOptions { symmetrize: true },
        )
        .0
    }

    #[test]
    fn default_dimension_is_128() {
        let (f, meta) = embed::<f32>(&triangle(), &WalkConfig::default(), &SkipGramConfig::default()).unwrap();
        assert_eq!(f.dim(), 128);
        assert_eq!(f.n_entities(), 3);
        assert_eq!(meta.corpus.walks, 30);
    }

    #[test]
    fn single_worker_is_deterministic() {
        let g = triangle();
        let a = embed::<f32>(&g, &WalkConfig::default(), &SkipGramConfig::default()).unwrap().0;
        let b = embed::<f32>(&g, &WalkConfig::default(), &SkipGramConfig::default()).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn single_entity_cannot_be_coded() {
        let g = EntityGraph::from_edges([("A", "A")], GraphLoadOptions::default()).0;
        assert!(embed::<f32>(&g, &WalkConfig::default(), &SkipGramConfig::default()).is_err());
    }

    #[test]
    fn racy_workers_still_produce_finite_vectors() {
        let g = triangle();
        let cfg = SkipGramConfig { workers: 3, dim: 8, ..Default::default() };
        let f = embed::<f32>(&g, &WalkConfig::default(), &cfg).unwrap().0;
        assert!(f.as_slice().iter().all(|v| v.is_finite()));
    }
}
