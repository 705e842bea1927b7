//! Linguistic shift scores: step-wise Euclidean distance, nearest-neighbor
//! turnover, and their ensemble.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus::Vocabulary;
use crate::embed::FieldEmbeddings;
use crate::error::{Error, Result};

/// Default neighborhood size for the neighbor-turnover metric.
pub const DEFAULT_K_NN: usize = 20;

/// Ordered snapshots plus each word's count in each snapshot's field.
#[derive(Debug, Clone)]
pub struct EmbeddingSequence {
    snapshots: Vec<FieldEmbeddings>,
    /// `counts[word][snapshot]`
    counts: Vec<Vec<u64>>,
}

impl EmbeddingSequence {
    /// `counts[word][snapshot]`, words in snapshot order.
    pub fn new(snapshots: Vec<FieldEmbeddings>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if snapshots.len() < 2 {
            return Err(Error::Config(format!(
                "need at least two snapshots, got {}",
                snapshots.len()
            )));
        }
        let first = &snapshots[0];
        for s in &snapshots[1..] {
            if s.words() != first.words() || s.dim() != first.dim() {
                return Err(Error::Config(format!(
                    "snapshot {:?} does not share the vocabulary of {:?}",
                    s.field_label(),
                    first.field_label()
                )));
            }
        }
        if counts.len() != first.len() || counts.iter().any(|c| c.len() != snapshots.len()) {
            return Err(Error::Config("count table does not match snapshots".into()));
        }
        Ok(EmbeddingSequence { snapshots, counts })
    }

    /// Takes counts from the vocabulary, matching snapshots to fields by label.
    pub fn from_vocabulary(snapshots: Vec<FieldEmbeddings>, vocab: &Vocabulary) -> Result<Self> {
        let fields = snapshots
            .iter()
            .map(|s| {
                vocab.field_index(s.field_label()).ok_or_else(|| {
                    Error::Config(format!("no counts for field {:?}", s.field_label()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if snapshots.first().map(|s| s.words()) != Some(vocab.words()) {
            return Err(Error::Config("snapshot words differ from the vocabulary".into()));
        }
        let counts = (0..vocab.len())
            .map(|w| fields.iter().map(|&f| vocab.count(w, f)).collect())
            .collect();
        Self::new(snapshots, counts)
    }

    pub fn snapshots(&self) -> &[FieldEmbeddings] {
        &self.snapshots
    }

    pub fn words(&self) -> &[String] {
        self.snapshots[0].words()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn vocab_len(&self) -> usize {
        self.snapshots[0].len()
    }

    pub fn index_of(&self, word: &str) -> Result<usize> {
        self.snapshots[0]
            .index_of(word)
            .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))
    }

    pub fn count(&self, word: usize, snapshot: usize) -> u64 {
        self.counts[word][snapshot]
    }

    fn normalizer(&self, word: usize, snapshot: usize) -> Result<f64> {
        let count = self.counts[word][snapshot];
        if count < 2 {
            return Err(Error::UndefinedNormalizer {
                word: self.words()[word].clone(),
                count,
            });
        }
        Ok((count as f64).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnsembleMode {
    /// Plain sum of the two metrics.
    #[default]
    Sum,
    /// Reciprocal-rank fusion, `1/(60+rank_euc) + 1/(60+rank_nn)`.
    RankFusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftConfig {
    pub k_nn: usize,
    pub ensemble: EnsembleMode,
    pub threads: usize,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            k_nn: DEFAULT_K_NN,
            ensemble: EnsembleMode::Sum,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftScore {
    pub word: String,
    pub euclidean: f64,
    pub neighbor: f64,
    pub ensemble: f64,
}

fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn stepwise_euclidean_at(word: usize, seq: &EmbeddingSequence) -> Result<f64> {
    let mut total = 0.0;
    for f in 1..seq.len() {
        let step = euclidean(seq.snapshots[f].vector(word), seq.snapshots[f - 1].vector(word));
        total += step / seq.normalizer(word, f)?;
    }
    Ok(total)
}

/// Sum over consecutive snapshots of the word's displacement, each step
/// divided by the natural log of the word's count in the later field.
pub fn stepwise_euclidean(word: &str, seq: &EmbeddingSequence) -> Result<f64> {
    stepwise_euclidean_at(seq.index_of(word)?, seq)
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// Indices of the `k` words most cosine-similar to word `query`, most
/// similar first, ties broken by vocabulary (lexicographic) order.
pub fn neighbors_of(snapshot: &FieldEmbeddings, query: usize, k: usize) -> Vec<usize> {
    let q = snapshot.vector(query);
    let mut scored: Vec<(f64, usize)> = (0..snapshot.len())
        .filter(|&i| i != query)
        .map(|i| (cosine(q, snapshot.vector(i)), i))
        .collect();
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_rank);
        scored.truncate(k);
    }
    scored.sort_by(by_rank);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// The `k` nearest neighbors of `word` by cosine similarity.
pub fn nearest_neighbors(word: &str, snapshot: &FieldEmbeddings, k: usize) -> Result<Vec<String>> {
    let query = snapshot
        .index_of(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.to_owned()))?;
    check_k(k, snapshot.len())?;
    Ok(neighbors_of(snapshot, query, k)
        .into_iter()
        .map(|i| snapshot.words()[i].clone())
        .collect())
}

fn check_k(k: usize, vocab_len: usize) -> Result<()> {
    if k == 0 || k >= vocab_len {
        return Err(Error::Config(format!(
            "neighborhood size {k} must be in 1..{vocab_len}"
        )));
    }
    Ok(())
}

fn neighbor_turnover(word: usize, seq: &EmbeddingSequence, neighbors: &[Vec<usize>], k: usize) -> Result<f64> {
    let mut total = 0.0;
    for e in 1..seq.len() {
        let prev: HashSet<usize> = neighbors[e - 1].iter().copied().collect();
        let shared = neighbors[e].iter().filter(|i| prev.contains(i)).count();
        total += (k - shared) as f64 / seq.normalizer(word, e)?;
    }
    Ok(total)
}

/// Sum over consecutive snapshots of the number of K-nearest neighbors not
/// shared between them, each step divided by the log count in the later field.
pub fn neighbor_distance(word: &str, seq: &EmbeddingSequence, config: &ShiftConfig) -> Result<f64> {
    let w = seq.index_of(word)?;
    check_k(config.k_nn, seq.vocab_len())?;
    let neighbors: Vec<Vec<usize>> = seq
        .snapshots
        .iter()
        .map(|s| neighbors_of(s, w, config.k_nn))
        .collect();
    neighbor_turnover(w, seq, &neighbors, config.k_nn)
}

fn score_word(w: usize, seq: &EmbeddingSequence, k: usize) -> Result<(f64, f64)> {
    let neighbors: Vec<Vec<usize>> = seq.snapshots.iter().map(|s| neighbors_of(s, w, k)).collect();
    Ok((stepwise_euclidean_at(w, seq)?, neighbor_turnover(w, seq, &neighbors, k)?))
}

fn descending(a: &ShiftScore, b: &ShiftScore, key: fn(&ShiftScore) -> f64) -> Ordering {
    key(b)
        .partial_cmp(&key(a))
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.word.cmp(&b.word))
}

/// Scores every word and sorts by ensemble score, highest first, ties by word.
pub fn rank_shifts(seq: &EmbeddingSequence, config: &ShiftConfig) -> Result<Vec<ShiftScore>> {
    check_k(config.k_nn, seq.vocab_len())?;
    let n = seq.vocab_len();
    let raw: Vec<(f64, f64)> = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|w| score_word(w, seq, config.k_nn))
                .collect::<Result<_>>()
        })?
    } else {
        (0..n)
            .map(|w| score_word(w, seq, config.k_nn))
            .collect::<Result<_>>()?
    };

    let mut scores: Vec<ShiftScore> = seq
        .words()
        .iter()
        .zip(raw)
        .map(|(word, (euclidean, neighbor))| ShiftScore {
            word: word.clone(),
            euclidean,
            neighbor,
            ensemble: euclidean + neighbor,
        })
        .collect();

    if config.ensemble == EnsembleMode::RankFusion {
        let mut fused = vec![0.0; n];
        for key in [
            (|s: &ShiftScore| s.euclidean) as fn(&ShiftScore) -> f64,
            |s: &ShiftScore| s.neighbor,
        ] {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| descending(&scores[a], &scores[b], key));
            for (rank, i) in order.into_iter().enumerate() {
                fused[i] += 1.0 / (61 + rank) as f64;
            }
        }
        for (s, f) in scores.iter_mut().zip(fused) {
            s.ensemble = f;
        }
    }
    scores.sort_by(|a, b| descending(a, b, |s| s.ensemble));
    Ok(scores)
}

/// Formats like C's `%.{digits}g`.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `word<TAB>euclidean<TAB>neighbor<TAB>ensemble` lines in the given order.
pub fn scores_to_tsv(scores: &[ShiftScore]) -> String {
    let mut out = String::new();
    for s in scores {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            s.word,
            format_significant(s.euclidean, 6),
            format_significant(s.neighbor, 6),
            format_significant(s.ensemble, 6)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(label: &str, rows: &[&[f64]]) -> FieldEmbeddings {
        let words = (0..rows.len()).map(|i| format!("w{i:02}")).collect();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        FieldEmbeddings::normalized(label, words, rows[0].len(), &flat).unwrap()
    }

    fn snap_rows(label: &str, rows: &[Vec<f64>]) -> FieldEmbeddings {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        snap(label, &refs)
    }

    fn seq(snaps: Vec<FieldEmbeddings>, count: u64) -> EmbeddingSequence {
        let n = snaps[0].len();
        let e = snaps.len();
        EmbeddingSequence::new(snaps, vec![vec![count; e]; n]).unwrap()
    }

    /// Uses the integer count nearest `exp(log_count)` and returns its actual log.
    fn seq_with_log(snaps: Vec<FieldEmbeddings>, log_count: f64) -> (EmbeddingSequence, f64) {
        let count = log_count.exp().round() as u64;
        let actual = (count as f64).ln();
        (seq(snaps, count), actual)
    }

    #[test]
    fn identical_snapshots_score_zero() {
        let a = snap("a", &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let s = seq(vec![a.clone(), a.clone(), a], 10);
        let cfg = ShiftConfig { k_nn: 1, ..Default::default() };
        for r in rank_shifts(&s, &cfg).unwrap() {
            assert_eq!(r.ensemble, 0.0);
        }
    }

    #[test]
    fn antipodal_two_snapshots() {
        let a = snap("a", &[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = snap("b", &[&[-1.0, 0.0], &[0.0, 1.0]]);
        // Integer counts cannot hit e^2 exactly; evaluate 2 / ln(count).
        let (s, log) = seq_with_log(vec![a, b], 2.0);
        let got = stepwise_euclidean("w00", &s).unwrap();
        assert!((got - 2.0 / log).abs() < 1e-12);
        assert!((got - 1.0).abs() < 0.03);
    }

    #[test]
    fn three_steps_accumulate() {
        // A -> B -> C on the unit circle with chord lengths 0.3 and 0.4.
        let angle = |chord: f64| 2.0 * (chord / 2.0).asin();
        let t1 = angle(0.3);
        let t2 = t1 + angle(0.4);
        let a = snap("a", &[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = snap("b", &[&[t1.cos(), t1.sin()], &[0.0, 1.0]]);
        let c = snap("c", &[&[t2.cos(), t2.sin()], &[0.0, 1.0]]);
        let s = seq(vec![a, b, c], 3);
        let got = stepwise_euclidean("w00", &s).unwrap();
        assert!((got - 0.7 / 3f64.ln()).abs() < 1e-6, "{got}");
    }

    #[test]
    fn low_count_is_undefined() {
        let a = snap("a", &[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = seq(vec![a.clone(), a], 1);
        assert!(matches!(stepwise_euclidean("w00", &s), Err(Error::UndefinedNormalizer { count: 1, .. })));
    }

    #[test]
    fn exact_match_beats_orthogonal() {
        let words = vec!["a".to_string(), "b".into(), "c".into()];
        let s = FieldEmbeddings::normalized("f", words, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(nearest_neighbors("a", &s, 1).unwrap(), vec!["b"]);
        let mut all = nearest_neighbors("a", &s, 2).unwrap();
        all.sort();
        assert_eq!(all, vec!["b", "c"]);
        assert!(nearest_neighbors("a", &s, 3).is_err());
        assert!(nearest_neighbors("zz", &s, 1).is_err());
    }

    #[test]
    fn ties_are_lexicographic() {
        let s = snap("a", &[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, -1.0]]);
        assert_eq!(neighbors_of(&s, 0, 3), vec![1, 2, 3]);
    }

    #[test]
    fn neighbor_distance_extremes() {
        // 42 words: query plus two disjoint groups of 20, and a spare axis.
        let mut a_rows: Vec<Vec<f64>> = Vec::new();
        let mut b_rows: Vec<Vec<f64>> = Vec::new();
        a_rows.push(vec![1.0, 0.0, 0.0]);
        b_rows.push(vec![1.0, 0.0, 0.0]);
        for i in 0..20 {
            let eps = 0.001 * (i + 1) as f64;
            a_rows.push(vec![1.0, eps, 0.0]);
            b_rows.push(vec![0.0, 1.0, eps]);
        }
        for i in 0..20 {
            let eps = 0.001 * (i + 1) as f64;
            a_rows.push(vec![0.0, 1.0, eps]);
            b_rows.push(vec![1.0, eps, 0.0]);
        }
        let a = snap_rows("a", &a_rows);
        let b = snap_rows("b", &b_rows);
        let cfg = ShiftConfig::default();

        let (same, _) = seq_with_log(vec![a.clone(), a.clone()], 2.0);
        assert_eq!(neighbor_distance("w00", &same, &cfg).unwrap(), 0.0);

        let (moved, log) = seq_with_log(vec![a, b], 2.0);
        let got = neighbor_distance("w00", &moved, &cfg).unwrap();
        assert!((got - 20.0 / log).abs() < 1e-12);
        assert!(got <= cfg.k_nn as f64 / log);
    }

    #[test]
    fn flipped_word_ranks_first() {
        let base: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let t = i as f64 * 0.7;
                vec![t.cos(), t.sin(), 0.3 * (i as f64).sin()]
            })
            .collect();
        let mut flipped = base.clone();
        flipped[3] = flipped[3].iter().map(|x| -x).collect();
        let s = seq(vec![snap_rows("a", &base), snap_rows("b", &flipped)], 20);
        let cfg = ShiftConfig { k_nn: 3, ..Default::default() };
        let ranked = rank_shifts(&s, &cfg).unwrap();
        assert_eq!(ranked.len(), 8);
        assert_eq!(ranked[0].word, "w03");
        for r in &ranked {
            assert_eq!(r.ensemble, r.euclidean + r.neighbor);
        }
        let fused = rank_shifts(&s, &ShiftConfig { ensemble: EnsembleMode::RankFusion, ..cfg.clone() }).unwrap();
        assert_eq!(fused[0].word, "w03");
        let parallel = rank_shifts(&s, &ShiftConfig { threads: 3, ..cfg }).unwrap();
        assert_eq!(parallel, ranked);
    }

    #[test]
    fn sequence_validation() {
        let a = snap("a", &[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = snap("b", &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert!(EmbeddingSequence::new(vec![a.clone()], vec![vec![5]; 2]).is_err());
        assert!(EmbeddingSequence::new(vec![a.clone(), b], vec![vec![5; 2]; 2]).is_err());
        assert!(EmbeddingSequence::new(vec![a.clone(), a], vec![vec![5; 2]; 3]).is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.0, 6), "0");
        assert_eq!(format_significant(1.0, 6), "1");
        assert_eq!(format_significant(1.23456789, 6), "1.23457");
        assert_eq!(format_significant(123456.7, 6), "123457");
        assert_eq!(format_significant(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_significant(0.000123456789, 6), "0.000123457");
        assert_eq!(format_significant(0.0000123456789, 6), "1.23457e-05");
        assert_eq!(format_significant(10.5, 6), "10.5");
    }

    #[test]
    fn tsv_rows() {
        let s = ShiftScore { word: "heart".into(), euclidean: 0.5, neighbor: 2.0 / 3.0, ensemble: 0.5 + 2.0 / 3.0 };
        assert_eq!(scores_to_tsv(&[s]), "heart\t0.5\t0.666667\t1.16667\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn random_seq(seed: u64, words: usize, snaps: usize, dim: usize) -> EmbeddingSequence {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let names: Vec<String> = (0..words).map(|i| format!("w{i:02}")).collect();
            let snapshots = (0..snaps)
                .map(|e| {
                    let rows: Vec<f64> = (0..words * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    FieldEmbeddings::normalized(format!("f{e}"), names.clone(), dim, &rows).unwrap()
                })
                .collect();
            let counts = (0..words).map(|_| (0..snaps).map(|_| rng.gen_range(5..500)).collect()).collect();
            EmbeddingSequence::new(snapshots, counts).unwrap()
        }

        proptest! {
            #[test]
            fn bounded_and_stable(seed in any::<u64>(), snaps in 2usize..=4) {
                let s = random_seq(seed, 12, snaps, 4);
                let cfg = ShiftConfig { k_nn: 5, ..Default::default() };
                let min_log = (0..12).flat_map(|w| (0..snaps).map(move |e| (w, e)))
                    .map(|(w, e)| (s.count(w, e) as f64).ln())
                    .fold(f64::INFINITY, f64::min);
                for w in s.words().to_vec() {
                    let euc = stepwise_euclidean(&w, &s).unwrap();
                    prop_assert!(euc <= 2.0 * (snaps - 1) as f64 / min_log + 1e-9);

                    // A repeated final snapshot adds nothing.
                    let mut extended = s.snapshots().to_vec();
                    extended.push(extended.last().unwrap().clone());
                    let counts: Vec<Vec<u64>> = (0..12)
                        .map(|i| { let mut c: Vec<u64> = (0..snaps).map(|e| s.count(i, e)).collect(); c.push(7); c })
                        .collect();
                    let longer = EmbeddingSequence::new(extended, counts).unwrap();
                    prop_assert!((stepwise_euclidean(&w, &longer).unwrap() - euc).abs() < 1e-12);
                    prop_assert_eq!(
                        neighbor_distance(&w, &longer, &cfg).unwrap(),
                        neighbor_distance(&w, &s, &cfg).unwrap()
                    );
                }
            }

            #[test]
            fn unnormalized_steps_reverse_invariant(seed in any::<u64>()) {
                let s = random_seq(seed, 6, 4, 3);
                let mut rev = s.snapshots().to_vec();
                rev.reverse();
                let raw = |snaps: &[FieldEmbeddings]| -> f64 {
                    snaps.windows(2).map(|p| euclidean(p[0].vector(2), p[1].vector(2))).sum()
                };
                prop_assert!((raw(s.snapshots()) - raw(&rev)).abs() < 1e-12);
            }

            #[test]
            fn cosine_ranking_matches_euclidean(seed in any::<u64>()) {
                let s = random_seq(seed, 15, 2, 5);
                let snap = &s.snapshots()[0];
                let mut by_dist: Vec<(f64, usize)> = (1..15).map(|i| (euclidean(snap.vector(0), snap.vector(i)), i)).collect();
                by_dist.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let expected: Vec<usize> = by_dist.iter().take(6).map(|p| p.1).collect();
                prop_assert_eq!(neighbors_of(snap, 0, 6), expected);
            }
        }
    }
}
