//! Skip-gram training with hierarchical softmax, sequential fine-tuning over
//! field corpora, and normalized per-field snapshots.

mod huffman;
mod io;
mod model;
mod train;

pub use huffman::HuffmanTree;
pub use io::{load_embeddings, load_model, read_embeddings, save_embeddings, save_model, write_embeddings};
pub use model::{EmbeddingModel, PairGradient};
pub use train::{
    objective, train, train_observed, train_sequence, train_sequence_from, train_sequence_with, TrainingConfig,
};

use crate::error::{Error, Result};

/// Maximum deviation of a stored vector's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Unit-length word vectors for one field, in vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEmbeddings {
    field_label: String,
    dim: usize,
    words: Vec<String>,
    data: Vec<f32>,
}

impl FieldEmbeddings {
    /// Wraps already normalized vectors. Words must be strictly increasing.
    pub fn new(field_label: impl Into<String>, words: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        let e = Self::unchecked(field_label.into(), words, dim, data)?;
        for (i, w) in e.words.iter().enumerate() {
            let norm = l2(e.vector(i));
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Format(format!("vector for {w:?} has norm {norm}")));
            }
        }
        Ok(e)
    }

    /// Normalizes each row of `rows` (row-major, `dim` columns).
    pub fn normalized(field_label: impl Into<String>, words: Vec<String>, dim: usize, rows: &[f64]) -> Result<Self> {
        if dim == 0 || rows.len() != words.len() * dim {
            return Err(Error::Format("row count does not match word count".into()));
        }
        let mut data = Vec::with_capacity(rows.len());
        for (w, row) in words.iter().zip(rows.chunks_exact(dim)) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::DegenerateVector(w.clone()));
            }
            data.extend(row.iter().map(|x| (x / norm) as f32));
        }
        Self::unchecked(field_label.into(), words, dim, data)
    }

    fn unchecked(field_label: String, words: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() != words.len() * dim {
            return Err(Error::Format(format!(
                "{} values for {} words of dimension {dim}",
                data.len(),
                words.len()
            )));
        }
        if let Some(pair) = words.windows(2).find(|p| p[0] >= p[1]) {
            return Err(Error::Format(format!(
                "words not strictly increasing at {:?}",
                pair[1]
            )));
        }
        Ok(FieldEmbeddings {
            field_label,
            dim,
            words,
            data,
        })
    }

    pub fn field_label(&self) -> &str {
        &self.field_label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// All vectors, row-major.
    pub fn vectors(&self) -> &[f32] {
        &self.data
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.words.binary_search_by(|w| w.as_str().cmp(word)).ok()
    }

    pub fn vector(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| self.vector(i))
    }
}

fn l2(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Copies the model's input vectors, L2-normalized. The model itself keeps
/// its unnormalized state for further fine-tuning.
pub fn snapshot(model: &EmbeddingModel, field_label: &str) -> Result<FieldEmbeddings> {
    FieldEmbeddings::normalized(
        field_label,
        model.vocab().words().to_vec(),
        model.dim(),
        model.input_vectors(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn model_with(rows: Vec<f64>, dim: usize) -> EmbeddingModel {
        let n = rows.len() / dim;
        let entries = (0..n).map(|i| (format!("w{i}"), vec![1, 1])).collect();
        let vocab = Vocabulary::from_parts(vec!["a".into(), "b".into()], entries, 1).unwrap();
        let tree = HuffmanTree::build(&vec![1; n]).unwrap();
        EmbeddingModel::from_parts(vocab, tree, dim, rows, vec![0.0; (n - 1) * dim]).unwrap()
    }

    #[test]
    fn normalizes_three_four() {
        let m = model_with(vec![3.0, 4.0, 1.0, 0.0], 2);
        let s = snapshot(&m, "f").unwrap();
        assert_eq!(s.get("w0").unwrap(), &[0.6f32, 0.8]);
        assert_eq!(s.get("w1").unwrap(), &[1.0f32, 0.0]);
        // live model untouched
        assert_eq!(m.input_vector(0), &[3.0, 4.0]);
    }

    #[test]
    fn unit_vector_unchanged() {
        let m = model_with(vec![3.0, 4.0, 0.0, 2.0], 2);
        let once = snapshot(&m, "f").unwrap();
        let rows: Vec<f64> = once.vectors().iter().map(|&x| f64::from(x)).collect();
        let twice = snapshot(&model_with(rows.clone(), 2), "f").unwrap();
        for (a, b) in once.vectors().iter().zip(twice.vectors()) {
            assert!((f64::from(*a) - f64::from(*b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let m = model_with(vec![1.0, 0.0, 0.0, 0.0], 2);
        match snapshot(&m, "f") {
            Err(Error::DegenerateVector(w)) => assert_eq!(w, "w1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unsorted_or_unnormalized() {
        assert!(FieldEmbeddings::new("f", vec!["b".into(), "a".into()], 1, vec![1.0, 1.0]).is_err());
        assert!(FieldEmbeddings::new("f", vec!["a".into()], 2, vec![1.0, 1.0]).is_err());
        assert!(FieldEmbeddings::new("f", vec!["a".into()], 2, vec![0.0, 1.0]).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn snapshot_norms(rows in proptest::collection::vec(-100.0f64..100.0, 12)) {
                prop_assume!(rows.chunks(3).all(|r| r.iter().any(|x| x.abs() > 1e-3)));
                let s = snapshot(&model_with(rows, 3), "f").unwrap();
                for i in 0..s.len() {
                    prop_assert!((l2(s.vector(i)) - 1.0).abs() <= NORM_TOLERANCE);
                }
            }
        }
    }
}
