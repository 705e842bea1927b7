//! Corpus ingestion: sentence splitting, punctuation stripping, tokenization,
//! word counting, and the common vocabulary shared by all fields.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

/// Default minimum per-field count for a word to enter the common vocabulary.
pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Raw text for a single field before preprocessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub field_label: String,
    pub text: String,
}

impl RawDocument {
    pub fn new(field_label: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let field_label = field_label.into();
        if field_label.is_empty() {
            return Err(Error::Config("field label must be non-empty".into()));
        }
        Ok(RawDocument {
            field_label,
            text: text.into(),
        })
    }

    /// Decodes UTF-8 bytes, reporting the offset of the first invalid byte.
    pub fn from_bytes(field_label: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Decode {
            offset: e.valid_up_to(),
        })?;
        Self::new(field_label, text)
    }
}

/// A preprocessed field corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub field_label: String,
    pub sentences: Vec<Vec<String>>,
    pub word_counts: BTreeMap<String, u64>,
}

impl Corpus {
    /// Builds a corpus from already tokenized sentences, recomputing counts.
    pub fn from_sentences(field_label: impl Into<String>, sentences: Vec<Vec<String>>) -> Self {
        let sentences: Vec<Vec<String>> = sentences.into_iter().filter(|s| !s.is_empty()).collect();
        let mut word_counts = BTreeMap::new();
        for token in sentences.iter().flatten() {
            *word_counts.entry(token.clone()).or_insert(0) += 1;
        }
        Corpus {
            field_label: field_label.into(),
            sentences,
            word_counts,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// One sentence per line, tokens separated by single spaces.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for sentence in &self.sentences {
            out.push_str(&sentence.join(" "));
            out.push('\n');
        }
        out
    }

    /// `word<TAB>count` lines in lexicographic order.
    pub fn counts_sidecar(&self) -> String {
        let mut out = String::new();
        for (word, count) in &self.word_counts {
            let _ = writeln!(out, "{word}\t{count}");
        }
        out
    }

    /// Parses the line format written by [`Corpus::to_lines`].
    pub fn from_lines(field_label: impl Into<String>, text: &str) -> Self {
        let sentences = text
            .lines()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect();
        Self::from_sentences(field_label, sentences)
    }
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").unwrap())
}

fn apostrophes() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // ' and the right single quotation mark join contractions ("don't" -> "dont").
    RE.get_or_init(|| Regex::new(r"(\w)['\u{2019}](\w)").unwrap())
}

/// Splits text into lowercase, punctuation-free token sentences.
///
/// Sentences end at `.`, `!`, `?` or a newline. Apostrophes inside a word are
/// dropped; any other punctuation character acts as a token separator.
pub fn preprocess(doc: &RawDocument) -> Corpus {
    let sentences = doc
        .text
        .split(['.', '!', '?', '\n'])
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect();
    Corpus::from_sentences(doc.field_label.clone(), sentences)
}

fn tokenize(fragment: &str) -> Vec<String> {
    let joined = apostrophes().replace_all(fragment, "$1$2");
    // A second pass catches overlapping matches such as "o'er't".
    let joined = apostrophes().replace_all(&joined, "$1$2");
    let stripped = punctuation().replace_all(&joined, " ");
    stripped
        .split_whitespace()
        .map(str::to_lowercase)
        .filter(|t| !t.is_empty())
        .collect()
}

/// The common vocabulary over all fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    field_labels: Vec<String>,
    /// `counts[word_index][field_index]`
    counts: Vec<Vec<u64>>,
    min_count: u64,
}

impl Vocabulary {
    /// Assembles a vocabulary from parts, checking its invariants.
    pub fn from_parts(
        field_labels: Vec<String>,
        entries: Vec<(String, Vec<u64>)>,
        min_count: u64,
    ) -> Result<Self> {
        check_labels(&field_labels)?;
        if min_count == 0 {
            return Err(Error::Config("min_count must be positive".into()));
        }
        let mut entries = entries;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Config(format!("duplicate word {:?}", pair[0].0)));
            }
        }
        for (word, counts) in &entries {
            if counts.len() != field_labels.len() {
                return Err(Error::Config(format!(
                    "word {word:?} has {} counts for {} fields",
                    counts.len(),
                    field_labels.len()
                )));
            }
            if counts.iter().any(|&c| c < min_count) {
                return Err(Error::Config(format!(
                    "word {word:?} below min_count {min_count} in some field"
                )));
            }
        }
        let (words, counts) = entries.into_iter().unzip();
        Ok(Vocabulary {
            words,
            field_labels,
            counts,
            min_count,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn field_labels(&self) -> &[String] {
        &self.field_labels
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.words
            .binary_search_by(|w| w.as_str().cmp(word))
            .ok()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index_of(word).is_some()
    }

    pub fn field_index(&self, label: &str) -> Option<usize> {
        self.field_labels.iter().position(|l| l == label)
    }

    /// Count of the word at `word_index` in field `field_index`.
    pub fn count(&self, word_index: usize, field_index: usize) -> u64 {
        self.counts[word_index][field_index]
    }

    /// Counts of every word in one field, in vocabulary order.
    pub fn field_counts(&self, field_index: usize) -> Vec<u64> {
        self.counts.iter().map(|c| c[field_index]).collect()
    }

    pub fn per_field_count(&self, word: &str, field_label: &str) -> Option<u64> {
        Some(self.counts[self.index_of(word)?][self.field_index(field_label)?])
    }

    /// Maps a sentence to vocabulary indices, `None` for out-of-vocabulary tokens.
    pub fn encode(&self, sentence: &[String]) -> Vec<Option<usize>> {
        sentence.iter().map(|t| self.index_of(t)).collect()
    }

    /// Tab-separated table: a header `word<TAB>label...` then one row per word.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("word");
        for label in &self.field_labels {
            out.push('\t');
            out.push_str(label);
        }
        out.push('\n');
        for (word, counts) in self.words.iter().zip(&self.counts) {
            out.push_str(word);
            for c in counts {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, min_count: u64) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty vocabulary file".into()))?;
        let mut cols = header.split('\t');
        if cols.next() != Some("word") {
            return Err(Error::Format("vocabulary header must start with 'word'".into()));
        }
        let labels: Vec<String> = cols.map(str::to_owned).collect();
        let mut entries = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let mut cols = line.split('\t');
            let word = cols.next().unwrap_or_default().to_owned();
            let counts = cols
                .map(|c| c.parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("vocabulary line {}: {e}", lineno + 2)))?;
            entries.push((word, counts));
        }
        Self::from_parts(labels, entries, min_count)
    }
}

fn check_labels(labels: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for label in labels {
        if label.is_empty() {
            return Err(Error::Config("field label must be non-empty".into()));
        }
        if !seen.insert(label.as_str()) {
            return Err(Error::Config(format!("duplicate field label {label:?}")));
        }
    }
    Ok(())
}

/// Intersects the corpora's word sets, keeping words with at least
/// `min_count` occurrences in every field.
pub fn build_vocabulary(corpora: &[Corpus], min_count: u64) -> Result<Vocabulary> {
    if corpora.len() < 2 {
        return Err(Error::Config(format!(
            "need at least two corpora, got {}",
            corpora.len()
        )));
    }
    let labels: Vec<String> = corpora.iter().map(|c| c.field_label.clone()).collect();
    check_labels(&labels)?;

    let entries = corpora[0]
        .word_counts
        .keys()
        .filter_map(|word| {
            let counts: Option<Vec<u64>> = corpora
                .iter()
                .map(|c| c.word_counts.get(word).copied().filter(|&n| n >= min_count))
                .collect();
            counts.map(|c| (word.clone(), c))
        })
        .collect();
    Vocabulary::from_parts(labels, entries, min_count)
}

/// Iterator over `(center, context)` vocabulary-index pairs of one corpus.
///
/// Out-of-vocabulary tokens never appear in a pair but still occupy window
/// positions. Windows are clipped at sentence boundaries.
pub struct ContextPairs<'a> {
    sentences: Vec<Vec<Option<usize>>>,
    window: usize,
    sentence: usize,
    center: usize,
    offset: isize,
    _vocab: std::marker::PhantomData<&'a Vocabulary>,
}

impl Iterator for ContextPairs<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        let n = self.window as isize;
        loop {
            let sentence = self.sentences.get(self.sentence)?;
            if self.center >= sentence.len() {
                self.sentence += 1;
                self.center = 0;
                self.offset = -n;
                continue;
            }
            let Some(center) = sentence[self.center] else {
                self.center += 1;
                self.offset = -n;
                continue;
            };
            if self.offset > n {
                self.center += 1;
                self.offset = -n;
                continue;
            }
            let offset = self.offset;
            self.offset += 1;
            if offset == 0 {
                continue;
            }
            let j = self.center as isize + offset;
            if j < 0 || j as usize >= sentence.len() {
                continue;
            }
            if let Some(context) = sentence[j as usize] {
                return Some((center, context));
            }
        }
    }
}

pub fn context_pairs<'a>(corpus: &Corpus, vocab: &'a Vocabulary, window: usize) -> ContextPairs<'a> {
    assert!(window >= 1, "window must be at least 1");
    ContextPairs {
        sentences: corpus.sentences.iter().map(|s| vocab.encode(s)).collect(),
        window,
        sentence: 0,
        center: 0,
        offset: -(window as isize),
        _vocab: std::marker::PhantomData,
    }
}
