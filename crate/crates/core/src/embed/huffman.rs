use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Binary Huffman coding of the vocabulary used as the hierarchical-softmax
/// tree.
///
/// Leaves are vocabulary indices. Internal nodes are numbered `0..len-1` in
/// merge order, so the root is always the last internal node. For every word,
/// `path` lists the internal nodes from the root down to the leaf's parent
/// and `code` the branch taken at each of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    counts: Vec<u64>,
    codes: Vec<Vec<bool>>,
    paths: Vec<Vec<u32>>,
}

impl HuffmanTree {
    /// Builds the tree from per-word counts given in vocabulary order.
    ///
    /// The two lowest-count nodes are merged first; equal counts are broken
    /// by the smallest vocabulary index contained in each subtree. The first
    /// node taken becomes the `false` branch.
    pub fn build(counts: &[u64]) -> Result<Self> {
        let n = counts.len();
        if n < 2 {
            return Err(Error::VocabularyTooSmall(n));
        }
        // Node ids: leaves 0..n, internal nodes n..2n-1.
        let mut parent = vec![0usize; 2 * n - 1];
        let mut branch = vec![false; 2 * n - 1];
        let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| Reverse((c, i, i)))
            .collect();
        for internal in n..2 * n - 1 {
            let Reverse((c0, min0, id0)) = heap.pop().expect("heap holds at least two nodes");
            let Reverse((c1, min1, id1)) = heap.pop().expect("heap holds at least two nodes");
            parent[id0] = internal;
            parent[id1] = internal;
            branch[id1] = true;
            heap.push(Reverse((c0 + c1, min0.min(min1), internal)));
        }
        let root = 2 * n - 2;

        let mut codes = Vec::with_capacity(n);
        let mut paths = Vec::with_capacity(n);
        for leaf in 0..n {
            let mut code = Vec::new();
            let mut path = Vec::new();
            let mut node = leaf;
            while node != root {
                code.push(branch[node]);
                node = parent[node];
                path.push((node - n) as u32);
            }
            code.reverse();
            path.reverse();
            codes.push(code);
            paths.push(path);
        }
        Ok(HuffmanTree {
            counts: counts.to_vec(),
            codes,
            paths,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn internal_nodes(&self) -> usize {
        self.codes.len() - 1
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn code(&self, word: usize) -> &[bool] {
        &self.codes[word]
    }

    pub fn path(&self, word: usize) -> &[u32] {
        &self.paths[word]
    }

    pub fn max_code_len(&self) -> usize {
        self.codes.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Code length averaged under the count distribution.
    pub fn mean_code_len(&self) -> f64 {
        let total: u64 = self.counts.iter().sum();
        let weighted: f64 = self
            .counts
            .iter()
            .zip(&self.codes)
            .map(|(&c, code)| c as f64 * code.len() as f64)
            .sum();
        weighted / total as f64
    }
}
