use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::huffman::HuffmanTree;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Skip-gram model with a hierarchical softmax output layer.
///
/// `input` holds one row per vocabulary word (the word vectors that get
/// snapshotted), `nodes` one row per internal Huffman node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    input: Vec<f64>,
    nodes: Vec<f64>,
    tree: HuffmanTree,
    vocab: Vocabulary,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `ln(sigmoid(x))` without overflow for large `|x|`.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `+1` for the `false` branch, `-1` for the `true` branch.
#[inline]
pub(crate) fn branch_sign(bit: bool) -> f64 {
    if bit {
        -1.0
    } else {
        1.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradients of `-ln Pr(context | center)` for one pair.
#[derive(Debug, Clone)]
pub struct PairGradient {
    pub loss: f64,
    /// Gradient with respect to the center word's input vector.
    pub input: Vec<f64>,
    /// Gradient with respect to each node vector on the context word's path.
    pub nodes: Vec<(u32, Vec<f64>)>,
}

impl EmbeddingModel {
    /// Input vectors drawn from `uniform(-0.5/d, 0.5/d)`; node vectors zero.
    pub fn initialize(vocab: Vocabulary, tree: HuffmanTree, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if tree.len() != vocab.len() {
            return Err(Error::Config(format!(
                "tree has {} leaves for a vocabulary of {}",
                tree.len(),
                vocab.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let input = (0..vocab.len() * dim)
            .map(|_| rng.gen_range(-half..half))
            .collect();
        let nodes = vec![0.0; tree.internal_nodes() * dim];
        Ok(EmbeddingModel {
            dim,
            input,
            nodes,
            tree,
            vocab,
        })
    }

    /// Assembles a model from raw parameter matrices (row-major).
    pub fn from_parts(
        vocab: Vocabulary,
        tree: HuffmanTree,
        dim: usize,
        input: Vec<f64>,
        nodes: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0
            || tree.len() != vocab.len()
            || input.len() != vocab.len() * dim
            || nodes.len() != tree.internal_nodes() * dim
        {
            return Err(Error::Config("inconsistent model dimensions".into()));
        }
        Ok(EmbeddingModel {
            dim,
            input,
            nodes,
            tree,
            vocab,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn tree(&self) -> &HuffmanTree {
        &self.tree
    }

    pub fn input_vectors(&self) -> &[f64] {
        &self.input
    }

    pub fn node_vectors(&self) -> &[f64] {
        &self.nodes
    }

    pub fn input_vectors_mut(&mut self) -> &mut [f64] {
        &mut self.input
    }

    pub fn node_vectors_mut(&mut self) -> &mut [f64] {
        &mut self.nodes
    }

    pub fn input_vector(&self, word: usize) -> &[f64] {
        &self.input[word * self.dim..(word + 1) * self.dim]
    }

    pub fn node_vector(&self, node: u32) -> &[f64] {
        let n = node as usize;
        &self.nodes[n * self.dim..(n + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.nodes).all(|x| x.is_finite())
    }

    fn word_index(&self, word: &str) -> Result<usize> {
        self.vocab
            .index_of(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))
    }

    /// `Pr(context | center)` by word.
    pub fn context_probability(&self, center: &str, context: &str) -> Result<f64> {
        let c = self.word_index(center)?;
        let o = self.word_index(context)?;
        Ok(self.probability(c, o))
    }

    /// `Pr(context | center)` by vocabulary index: the product of branch
    /// sigmoids along the context word's tree path.
    pub fn probability(&self, center: usize, context: usize) -> f64 {
        self.log_probability(center, context).exp()
    }

    pub fn log_probability(&self, center: usize, context: usize) -> f64 {
        let v = self.input_vector(center);
        self.tree
            .path(context)
            .iter()
            .zip(self.tree.code(context))
            .map(|(&node, &bit)| log_sigmoid(branch_sign(bit) * dot(self.node_vector(node), v)))
            .sum()
    }

    /// Loss and analytic gradient of `-ln Pr(context | center)`.
    pub fn pair_gradient(&self, center: usize, context: usize) -> PairGradient {
        let v = self.input_vector(center);
        let mut loss = 0.0;
        let mut input = vec![0.0; self.dim];
        let mut nodes = Vec::with_capacity(self.tree.path(context).len());
        for (&node, &bit) in self.tree.path(context).iter().zip(self.tree.code(context)) {
            let u = self.node_vector(node);
            let s = branch_sign(bit);
            let z = s * dot(u, v);
            loss -= log_sigmoid(z);
            // d/dz [-ln sigmoid(z)] = -(1 - sigmoid(z))
            let coeff = -s * (1.0 - sigmoid(z));
            for (g, &ui) in input.iter_mut().zip(u) {
                *g += coeff * ui;
            }
            nodes.push((node, v.iter().map(|&vi| coeff * vi).collect()));
        }
        PairGradient { loss, input, nodes }
    }

    /// One SGD step on `-ln Pr(context | center)`. `scratch` must hold `dim`
    /// values. Returns the number of node vectors updated, or `None` if a
    /// non-finite value appeared.
    pub fn sgd_step(&mut self, center: usize, context: usize, lr: f64, scratch: &mut [f64]) -> Option<usize> {
        let d = self.dim;
        scratch.fill(0.0);
        let path = self.tree.path(context);
        let code = self.tree.code(context);
        let v_start = center * d;
        for (&node, &bit) in path.iter().zip(code) {
            let n_start = node as usize * d;
            let (v, u) = (
                &self.input[v_start..v_start + d],
                &mut self.nodes[n_start..n_start + d],
            );
            let s = branch_sign(bit);
            let z = s * dot(u, v);
            if !z.is_finite() {
                return None;
            }
            let step = lr * s * (1.0 - sigmoid(z));
            for i in 0..d {
                scratch[i] += step * u[i];
                u[i] += step * v[i];
            }
        }
        let v = &mut self.input[v_start..v_start + d];
        for (vi, &e) in v.iter_mut().zip(scratch.iter()) {
            *vi += e;
        }
        if scratch.iter().all(|x| x.is_finite()) {
            Some(path.len())
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    pub(crate) fn vocab_of(counts: &[u64]) -> Vocabulary {
        let entries = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (format!("w{i:03}"), vec![c, c]))
            .collect();
        Vocabulary::from_parts(vec!["a".into(), "b".into()], entries, 1).unwrap()
    }

    pub(crate) fn random_model(counts: &[u64], dim: usize, seed: u64, scale: f64) -> EmbeddingModel {
        let vocab = vocab_of(counts);
        let tree = HuffmanTree::build(counts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = (0..counts.len() * dim).map(|_| rng.gen_range(-scale..scale)).collect();
        let nodes = (0..(counts.len() - 1) * dim).map(|_| rng.gen_range(-scale..scale)).collect();
        EmbeddingModel::from_parts(vocab, tree, dim, input, nodes).unwrap()
    }

    #[test]
    fn zero_model_probability_is_half_per_level() {
        let counts = [9, 5, 2, 1, 1];
        let vocab = vocab_of(&counts);
        let tree = HuffmanTree::build(&counts).unwrap();
        let m = EmbeddingModel::from_parts(vocab, tree, 3, vec![0.0; 15], vec![0.0; 12]).unwrap();
        for o in 0..5 {
            let len = m.tree().code(o).len() as i32;
            assert!((m.probability(0, o) - 0.5f64.powi(len)).abs() < 1e-15);
        }
    }

    #[test]
    fn three_word_matches_materialized_leaf_distribution() {
        let m = random_model(&[4, 2, 1], 5, 7, 0.8);
        for c in 0..3 {
            let v = m.input_vector(c);
            // Materialize every leaf's path product directly from the code bits.
            let leaf: Vec<f64> = (0..3)
                .map(|o| {
                    m.tree()
                        .path(o)
                        .iter()
                        .zip(m.tree().code(o))
                        .map(|(&n, &b)| {
                            let x: f64 = m.node_vector(n).iter().zip(v).map(|(a, b)| a * b).sum();
                            if b {
                                1.0 - 1.0 / (1.0 + (-x).exp())
                            } else {
                                1.0 / (1.0 + (-x).exp())
                            }
                        })
                        .product()
                })
                .collect();
            let total: f64 = leaf.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for o in 0..3 {
                assert!((m.probability(c, o) - leaf[o] / total).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unknown_word() {
        let m = random_model(&[3, 2, 1], 2, 1, 0.1);
        match m.context_probability("w000", "nope") {
            Err(Error::OutOfVocabulary(w)) => assert_eq!(w, "nope"),
            other => panic!("{other:?}"),
        }
        let p = m.context_probability("w000", "w001").unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn sgd_step_follows_negative_gradient() {
        let m = random_model(&[5, 4, 3, 2, 1], 4, 3, 0.5);
        let g = m.pair_gradient(1, 4);
        let mut stepped = m.clone();
        let mut scratch = vec![0.0; 4];
        let lr = 0.01;
        let touched = stepped.sgd_step(1, 4, lr, &mut scratch).unwrap();
        assert_eq!(touched, m.tree().path(4).len());
        for i in 0..4 {
            let expected = m.input_vector(1)[i] - lr * g.input[i];
            assert!((stepped.input_vector(1)[i] - expected).abs() < 1e-15);
        }
        for (node, grad) in &g.nodes {
            for i in 0..4 {
                let expected = m.node_vector(*node)[i] - lr * grad[i];
                assert!((stepped.node_vector(*node)[i] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn probabilities_sum_to_one(
                counts in proptest::collection::vec(1u64..1000, 2..=64),
                seed in any::<u64>(),
            ) {
                let m = random_model(&counts, 6, seed, 1.0);
                for c in [0, counts.len() - 1] {
                    let total: f64 = (0..counts.len()).map(|o| m.probability(c, o)).sum();
                    prop_assert!((total - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
