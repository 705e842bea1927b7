use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use log::{debug, info};

use super::huffman::HuffmanTree;
use super::model::{branch_sign, sigmoid, EmbeddingModel};
use super::FieldEmbeddings;
use crate::corpus::{context_pairs, Corpus, Vocabulary};
use crate::error::{Error, Result};

/// Final learning rate as a fraction of the initial one.
const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Context window on each side of the center word.
    pub window: usize,
    pub dim: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub seed: u64,
    /// 1 trains single-threaded and deterministically; more threads apply
    /// unsynchronized updates to shared parameters and are not reproducible.
    pub threads: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            window: 5,
            dim: 100,
            epochs: 5,
            initial_learning_rate: 0.025,
            seed: 1,
            threads: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.dim == 0 || self.threads == 0 {
            return Err(Error::Config(
                "window, dim and threads must be positive".into(),
            ));
        }
        if !(self.initial_learning_rate >= 0.0 && self.initial_learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.initial_learning_rate
            )));
        }
        Ok(())
    }
}

/// Linear decay from `lr0` at step 0 to `1e-4 * lr0` at the last step.
fn learning_rate(lr0: f64, step: u64, total: u64) -> f64 {
    if total <= 1 {
        return lr0;
    }
    let progress = step as f64 / (total - 1) as f64;
    lr0 * (1.0 - (1.0 - MIN_LR_FRACTION) * progress)
}

fn encode_pairs(corpus: &Corpus, vocab: &Vocabulary, window: usize) -> Vec<(u32, u32)> {
    context_pairs(corpus, vocab, window)
        .map(|(c, o)| (c as u32, o as u32))
        .collect()
}

/// The skip-gram objective `J = sum -ln Pr(context | center)` over every
/// context pair in the corpus.
pub fn objective(model: &EmbeddingModel, corpus: &Corpus, window: usize) -> f64 {
    context_pairs(corpus, model.vocab(), window)
        .map(|(c, o)| -model.log_probability(c, o))
        .sum()
}

fn base_counts(corpus: &Corpus, vocab: &Vocabulary) -> Vec<u64> {
    vocab
        .words()
        .iter()
        .map(|w| corpus.word_counts.get(w).copied().unwrap_or(0).max(1))
        .collect()
}

/// Trains on one corpus, starting from `init` or from a fresh model whose
/// Huffman tree is built from this corpus's counts.
pub fn train(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &TrainingConfig,
    init: Option<EmbeddingModel>,
) -> Result<EmbeddingModel> {
    train_observed(corpus, vocab, config, init, |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, model)` after every epoch.
/// Multi-threaded training only reports the final epoch.
pub fn train_observed(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &TrainingConfig,
    init: Option<EmbeddingModel>,
    mut on_epoch: impl FnMut(usize, &EmbeddingModel),
) -> Result<EmbeddingModel> {
    config.validate()?;
    let mut model = match init {
        Some(m) => {
            if m.vocab() != vocab || m.dim() != config.dim {
                return Err(Error::Config(
                    "initial model vocabulary or dimension does not match".into(),
                ));
            }
            m
        }
        None => {
            let tree = HuffmanTree::build(&base_counts(corpus, vocab))?;
            EmbeddingModel::initialize(vocab.clone(), tree, config.dim, config.seed)?
        }
    };

    let pairs = encode_pairs(corpus, vocab, config.window);
    let total = pairs.len() as u64 * config.epochs as u64;
    info!(
        "training {:?}: {} pairs x {} epochs",
        corpus.field_label,
        pairs.len(),
        config.epochs
    );
    if total == 0 {
        return Ok(model);
    }
    if config.threads > 1 {
        train_parallel(&mut model, &pairs, config, total)?;
        on_epoch(config.epochs - 1, &model);
    } else {
        let mut scratch = vec![0.0; config.dim];
        let mut step = 0u64;
        for epoch in 0..config.epochs {
            for &(c, o) in &pairs {
                let lr = learning_rate(config.initial_learning_rate, step, total);
                model
                    .sgd_step(c as usize, o as usize, lr, &mut scratch)
                    .ok_or(Error::TrainingDiverged { step })?;
                step += 1;
            }
            debug!("epoch {epoch} done");
            on_epoch(epoch, &model);
        }
    }
    Ok(model)
}

fn load(cells: &[AtomicU64], i: usize) -> f64 {
    f64::from_bits(cells[i].load(Ordering::Relaxed))
}

fn store(cells: &[AtomicU64], i: usize, x: f64) {
    cells[i].store(x.to_bits(), Ordering::Relaxed)
}

/// Lock-free training: every thread walks its own share of the pairs and
/// reads/writes the shared parameters without synchronization.
fn train_parallel(
    model: &mut EmbeddingModel,
    pairs: &[(u32, u32)],
    config: &TrainingConfig,
    total: u64,
) -> Result<()> {
    let d = config.dim;
    let to_cells = |xs: &[f64]| -> Vec<AtomicU64> { xs.iter().map(|x| AtomicU64::new(x.to_bits())).collect() };
    let input = to_cells(model.input_vectors());
    let nodes = to_cells(model.node_vectors());
    let step = AtomicU64::new(0);
    let diverged = AtomicBool::new(false);
    let tree = model.tree().clone();
    let chunk = pairs.len().div_ceil(config.threads);

    std::thread::scope(|s| {
        for share in pairs.chunks(chunk) {
            let (input, nodes, step, diverged, tree) = (&input, &nodes, &step, &diverged, &tree);
            s.spawn(move || {
                let mut scratch = vec![0.0; d];
                let mut v = vec![0.0; d];
                for _ in 0..config.epochs {
                    for &(c, o) in share {
                        if diverged.load(Ordering::Relaxed) {
                            return;
                        }
                        let t = step.fetch_add(1, Ordering::Relaxed);
                        let lr = learning_rate(config.initial_learning_rate, t, total);
                        let vs = c as usize * d;
                        for i in 0..d {
                            v[i] = load(input, vs + i);
                        }
                        scratch.fill(0.0);
                        let o = o as usize;
                        for (&node, &bit) in tree.path(o).iter().zip(tree.code(o)) {
                            let ns = node as usize * d;
                            let z = branch_sign(bit) * (0..d).map(|i| load(nodes, ns + i) * v[i]).sum::<f64>();
                            if !z.is_finite() {
                                diverged.store(true, Ordering::Relaxed);
                                return;
                            }
                            let g = lr * branch_sign(bit) * (1.0 - sigmoid(z));
                            for i in 0..d {
                                let u = load(nodes, ns + i);
                                scratch[i] += g * u;
                                store(nodes, ns + i, u + g * v[i]);
                            }
                        }
                        for i in 0..d {
                            let x = load(input, vs + i) + scratch[i];
                            store(input, vs + i, x);
                        }
                    }
                }
            });
        }
    });

    for (dst, cell) in model.input_vectors_mut().iter_mut().zip(&input) {
        *dst = f64::from_bits(cell.load(Ordering::Relaxed));
    }
    for (dst, cell) in model.node_vectors_mut().iter_mut().zip(&nodes) {
        *dst = f64::from_bits(cell.load(Ordering::Relaxed));
    }
    if diverged.load(Ordering::Relaxed) || !model.is_finite() {
        return Err(Error::TrainingDiverged {
            step: step.load(Ordering::Relaxed),
        });
    }
    Ok(())
}

/// Trains on each corpus in order, fine-tuning the previous model, and
/// snapshots the normalized input vectors after each one.
///
/// The Huffman tree comes from the first corpus (or `init`) and is kept for
/// every later corpus; node vectors carry over along with input vectors.
pub fn train_sequence(
    corpora: &[Corpus],
    vocab: &Vocabulary,
    config: &TrainingConfig,
) -> Result<Vec<FieldEmbeddings>> {
    Ok(train_sequence_from(corpora, vocab, config, None)?.0)
}

/// As [`train_sequence`], optionally starting from an existing model, and
/// also returning the final model state.
pub fn train_sequence_from(
    corpora: &[Corpus],
    vocab: &Vocabulary,
    config: &TrainingConfig,
    init: Option<EmbeddingModel>,
) -> Result<(Vec<FieldEmbeddings>, EmbeddingModel)> {
    let configs = vec![config.clone(); corpora.len()];
    train_sequence_with(corpora, vocab, &configs, init)
}

/// As [`train_sequence_from`] with a separate configuration per corpus.
pub fn train_sequence_with(
    corpora: &[Corpus],
    vocab: &Vocabulary,
    configs: &[TrainingConfig],
    init: Option<EmbeddingModel>,
) -> Result<(Vec<FieldEmbeddings>, EmbeddingModel)> {
    if corpora.is_empty() {
        return Err(Error::Config("no corpora to train on".into()));
    }
    if configs.len() != corpora.len() {
        return Err(Error::Config("one training config per corpus required".into()));
    }
    let mut model = init;
    let mut snapshots = Vec::with_capacity(corpora.len());
    for (corpus, config) in corpora.iter().zip(configs) {
        let trained = train(corpus, vocab, config, model.take())?;
        snapshots.push(super::snapshot(&trained, &corpus.field_label)?);
        model = Some(trained);
    }
    Ok((snapshots, model.expect("at least one corpus")))
}
