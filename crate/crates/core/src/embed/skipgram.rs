use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::huffman::{build_huffman, HuffmanTree};
use super::walks::WalkCorpus;
use crate::error::{Error, Result};
use crate::metrics::dot;
use crate::scalar::{AtomicCell, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Objective {
    HierarchicalSoftmax,
    /// Word2vec-style negative sampling with a unigram^0.75 noise table.
    NegativeSampling { negatives: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub objective: Objective,
    /// 1 trains deterministically; more workers update shared parameters
    /// without synchronization.
    pub workers: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 5,
            epochs: 1,
            initial_lr: 0.025,
            final_lr: 0.0001,
            objective: Objective::HierarchicalSoftmax,
            workers: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum OutputLayer<T> {
    Hierarchical { tree: HuffmanTree, nodes: Vec<T> },
    Negative { vectors: Vec<T>, table: Vec<usize>, negatives: usize },
}

/// Skip-gram model: one input vector per entity plus the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramModel<T> {
    dim: usize,
    n_entities: usize,
    input: Vec<T>,
    output: OutputLayer<T>,
}

/// Gradient of one `(center, context)` pair loss.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient<T> {
    pub input: Vec<T>,
    /// `(internal node, gradient)` along the context's code path.
    pub nodes: Vec<(usize, Vec<T>)>,
}

fn sigmoid<T: Scalar>(f: T) -> T {
    T::one() / (T::one() + (-f).exp())
}

/// `ln sigmoid(f)` without overflow for large `|f|`.
fn ln_sigmoid<T: Scalar>(f: T) -> T {
    if f >= T::zero() {
        -(-f).exp().ln_1p()
    } else {
        f - f.exp().ln_1p()
    }
}

fn branch_sign<T: Scalar>(bit: bool) -> T {
    if bit {
        -T::one()
    } else {
        T::one()
    }
}

const NOISE_TABLE: usize = 1 << 20;

fn noise_table(freqs: &[u64]) -> Vec<usize> {
    let weights: Vec<f64> = freqs.iter().map(|&f| (f as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let size = NOISE_TABLE.min(freqs.len() * 64).max(freqs.len());
    let mut table = Vec::with_capacity(size);
    let mut cum = 0.0;
    let mut w = 0;
    for slot in 0..size {
        let point = (slot as f64 + 0.5) / size as f64;
        while w + 1 < weights.len() && (cum + weights[w]) / total < point {
            cum += weights[w];
            w += 1;
        }
        table.push(w);
    }
    table
}

impl<T: Scalar> SkipGramModel<T> {
    /// Fresh model: input vectors uniform in `[-0.5/dim, 0.5/dim]`, output
    /// parameters zero.
    pub fn initialize(freqs: &[u64], dim: usize, objective: Objective, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let n = freqs.len();
        let tree = build_huffman(freqs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let input = (0..n * dim).map(|_| T::of(rng.random_range(-half..half))).collect();
        let output = match objective {
            Objective::HierarchicalSoftmax => OutputLayer::Hierarchical {
                nodes: vec![T::zero(); tree.n_internal() * dim],
                tree,
            },
            Objective::NegativeSampling { negatives } => {
                if negatives == 0 {
                    return Err(Error::InvalidArgument("negative sampling needs at least 1 negative".into()));
                }
                OutputLayer::Negative {
                    vectors: vec![T::zero(); n * dim],
                    table: noise_table(freqs),
                    negatives,
                }
            }
        };
        Ok(Self {
            dim,
            n_entities: n,
            input,
            output,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn input_vector(&self, v: usize) -> &[T] {
        &self.input[v * self.dim..(v + 1) * self.dim]
    }

    pub fn input_vectors(&self) -> &[T] {
        &self.input
    }

    pub fn into_input_vectors(self) -> Vec<T> {
        self.input
    }

    pub fn tree(&self) -> Option<&HuffmanTree> {
        match &self.output {
            OutputLayer::Hierarchical { tree, .. } => Some(tree),
            OutputLayer::Negative { .. } => None,
        }
    }

    /// Mutable `(input, output)` parameter slices.
    pub fn parameters_mut(&mut self) -> (&mut [T], &mut [T]) {
        let out = match &mut self.output {
            OutputLayer::Hierarchical { nodes, .. } => nodes,
            OutputLayer::Negative { vectors, .. } => vectors,
        };
        (&mut self.input, out)
    }

    fn hierarchical(&self) -> Result<(&HuffmanTree, &[T])> {
        match &self.output {
            OutputLayer::Hierarchical { tree, nodes } => Ok((tree, nodes)),
            OutputLayer::Negative { .. } => Err(Error::Incompatible(
                "negative-sampling models define no normalized distribution".into(),
            )),
        }
    }

    /// Hierarchical-softmax probability of `context` given `center`.
    pub fn probability(&self, context: usize, center: usize) -> Result<T> {
        Ok(self.pair_loss(center, context)?.neg().exp())
    }

    /// `-ln P(context | center)`: sum over the context's code path of
    /// `-ln sigmoid(s * u_node . h)`, `s = +1` for bit 0 and `-1` for bit 1.
    pub fn pair_loss(&self, center: usize, context: usize) -> Result<T> {
        let (tree, nodes) = self.hierarchical()?;
        let h = self.input_vector(center);
        let mut loss = T::zero();
        for &(node, bit) in tree.path(context) {
            let u = &nodes[node * self.dim..(node + 1) * self.dim];
            loss = loss - ln_sigmoid(branch_sign::<T>(bit) * dot(h, u));
        }
        Ok(loss)
    }

    /// Analytic gradient of [`pair_loss`](Self::pair_loss).
    pub fn pair_gradient(&self, center: usize, context: usize) -> Result<PairGradient<T>> {
        let (tree, nodes) = self.hierarchical()?;
        let h = self.input_vector(center);
        let mut input = vec![T::zero(); self.dim];
        let mut node_grads = Vec::new();
        for &(node, bit) in tree.path(context) {
            let u = &nodes[node * self.dim..(node + 1) * self.dim];
            // d/df of -ln sigmoid(s f) is sigmoid(f) - (1 - bit).
            let label = if bit { T::zero() } else { T::one() };
            let g = sigmoid(dot(h, u)) - label;
            for (gi, &ui) in input.iter_mut().zip(u) {
                *gi = *gi + g * ui;
            }
            node_grads.push((node, h.iter().map(|&hi| g * hi).collect()));
        }
        Ok(PairGradient {
            input,
            nodes: node_grads,
        })
    }
}

/// Parameters shared by training workers.
struct SharedParams<'m, T: Scalar> {
    dim: usize,
    input: Vec<T::Atomic>,
    output: Vec<T::Atomic>,
    layer: &'m OutputLayer<T>,
}

impl<T: Scalar> SharedParams<'_, T> {
    fn load_row(cells: &[T::Atomic], row: usize, dim: usize, into: &mut [T]) {
        for (dst, c) in into.iter_mut().zip(&cells[row * dim..(row + 1) * dim]) {
            *dst = c.get();
        }
    }

    /// One update for `(center, context)` at learning rate `lr`.
    fn step(&self, center: usize, context: usize, lr: T, rng: &mut ChaCha8Rng, buf: &mut Buffers<T>) {
        let dim = self.dim;
        Self::load_row(&self.input, center, dim, &mut buf.h);
        buf.err.iter_mut().for_each(|e| *e = T::zero());
        let update = |row: usize, label: T, buf: &mut Buffers<T>| {
            Self::load_row(&self.output, row, dim, &mut buf.u);
            let g = (label - sigmoid(dot(&buf.h, &buf.u))) * lr;
            let cells = &self.output[row * dim..(row + 1) * dim];
            for k in 0..dim {
                buf.err[k] = buf.err[k] + g * buf.u[k];
                cells[k].set(buf.u[k] + g * buf.h[k]);
            }
        };
        match self.layer {
            OutputLayer::Hierarchical { tree, .. } => {
                for &(node, bit) in tree.path(context) {
                    update(node, if bit { T::zero() } else { T::one() }, buf);
                }
            }
            OutputLayer::Negative { table, negatives, .. } => {
                update(context, T::one(), buf);
                for _ in 0..*negatives {
                    let target = table[rng.random_range(0..table.len())];
                    if target != context {
                        update(target, T::zero(), buf);
                    }
                }
            }
        }
        let cells = &self.input[center * dim..(center + 1) * dim];
        for k in 0..dim {
            cells[k].set(buf.h[k] + buf.err[k]);
        }
    }
}

struct Buffers<T> {
    h: Vec<T>,
    u: Vec<T>,
    err: Vec<T>,
}

impl<T: Scalar> Buffers<T> {
    fn new(dim: usize) -> Self {
        Self {
            h: vec![T::zero(); dim],
            u: vec![T::zero(); dim],
            err: vec![T::zero(); dim],
        }
    }
}

fn pairs_in(walk: &[usize], window: usize) -> u64 {
    let len = walk.len();
    (0..len)
        .map(|i| (i.saturating_sub(window)..(i + window + 1).min(len)).len() as u64 - 1)
        .sum()
}

/// Trains skip-gram over `corpus`: every walk position predicts each context
/// within `window` along that context's output path (HS) or against sampled
/// noise (NS). The learning rate decays linearly from `initial_lr` to
/// `final_lr` over all trained pairs.
pub fn train_skipgram<T: Scalar>(
    corpus: &WalkCorpus,
    n_entities: usize,
    cfg: &SkipGramConfig,
) -> Result<SkipGramModel<T>> {
    if corpus.is_empty() {
        return Err(Error::Empty("walk corpus is empty".into()));
    }
    if cfg.window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let mut model = SkipGramModel::<T>::initialize(
        &corpus.frequencies(n_entities),
        cfg.dim,
        cfg.objective,
        cfg.seed,
    )?;
    let epochs = cfg.epochs.max(1);
    let per_epoch: u64 = corpus.walks.iter().map(|w| pairs_in(w, cfg.window)).sum();
    let total = (per_epoch * epochs as u64).max(1);
    let dim = cfg.dim;
    let (input, output) = {
        let (i, o) = model.parameters_mut();
        (
            i.iter().map(|&v| T::Atomic::with(v)).collect::<Vec<_>>(),
            o.iter().map(|&v| T::Atomic::with(v)).collect::<Vec<_>>(),
        )
    };
    let layer = model.output.clone();
    let shared = SharedParams {
        dim,
        input,
        output,
        layer: &layer,
    };
    let done = AtomicU64::new(0);
    let lr_at = |d: u64| {
        let frac = (d as f64 / total as f64).min(1.0);
        T::of(cfg.initial_lr + (cfg.final_lr - cfg.initial_lr) * frac)
    };
    let workers = cfg.workers.max(1).min(corpus.len());
    let run = |walks: &[Vec<usize>], worker: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
        rng.set_stream(worker as u64 + 1);
        let mut buf = Buffers::new(dim);
        for _ in 0..epochs {
            for walk in walks {
                for (i, &center) in walk.iter().enumerate() {
                    let lo = i.saturating_sub(cfg.window);
                    let hi = (i + cfg.window + 1).min(walk.len());
                    for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                        if j == i {
                            continue;
                        }
                        let d = done.fetch_add(1, Ordering::Relaxed);
                        shared.step(center, context, lr_at(d), &mut rng, &mut buf);
                    }
                }
            }
        }
    };
    if workers == 1 {
        run(&corpus.walks, 0);
    } else {
        let chunk = corpus.len().div_ceil(workers);
        std::thread::scope(|s| {
            for (w, part) in corpus.walks.chunks(chunk).enumerate() {
                let run = &run;
                s.spawn(move || run(part, w));
            }
        });
    }
    let (i, o) = model.parameters_mut();
    for (dst, c) in i.iter_mut().zip(&shared.input) {
        *dst = c.get();
    }
    for (dst, c) in o.iter_mut().zip(&shared.output) {
        *dst = c.get();
    }
    Ok(model)
}
