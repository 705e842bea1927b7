//! Deterministic synthetic field corpora for demos and tests.
//!
//! Each field mixes the same themed word lists with different weights, and
//! "heart" keeps company with a different theme in each field: anatomy in
//! the encyclopedia field, emotion in fiction, faith in the religious field
//! and government in politics.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::RawDocument;

/// The word whose context changes from field to field.
pub const SHIFTING_WORD: &str = "heart";

const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "is", "was", "it", "that", "with", "for", "on", "as", "by",
    "his", "her", "their", "this", "from", "at", "be", "or", "an", "which", "they", "he", "she",
    "we", "all", "one", "not", "but", "were", "are", "its", "had", "has", "there", "so",
];

const THEMES: [&[&str]; 8] = [
    // anatomy
    &[
        "blood", "artery", "organ", "pump", "muscle", "vein", "valve", "chamber", "pulse", "beat",
        "body", "lung", "tissue", "oxygen", "surgery", "patient", "cell", "rate", "cardiac",
        "function",
    ],
    // emotion
    &[
        "love", "sorrow", "joy", "tears", "longing", "tender", "lover", "kiss", "smile", "grief",
        "desire", "gentle", "embrace", "broken", "warm", "dear", "passion", "feeling", "lonely",
        "hope",
    ],
    // faith
    &[
        "soul", "god", "spirit", "prayer", "faith", "lord", "holy", "grace", "sin", "mercy",
        "blessed", "heaven", "worship", "divine", "praise", "temple", "psalm", "righteous", "glory",
        "eternal",
    ],
    // government
    &[
        "nation", "government", "policy", "vote", "party", "election", "reform", "citizen", "law",
        "state", "power", "congress", "democracy", "campaign", "leader", "people", "freedom",
        "rights", "tax", "union",
    ],
    // nature
    &[
        "river", "tree", "mountain", "forest", "rain", "wind", "stone", "field", "sky", "sun",
        "winter", "garden", "flower", "sea", "bird", "night", "morning", "light", "earth", "water",
    ],
    // household
    &[
        "house", "door", "table", "bread", "street", "window", "road", "friend", "child", "mother",
        "father", "letter", "room", "town", "work", "money", "market", "horse", "dinner", "coat",
    ],
    // war
    &[
        "army", "battle", "soldier", "sword", "enemy", "victory", "fight", "war", "general",
        "troops", "attack", "defeat", "siege", "weapon", "camp", "command", "fortress", "march",
        "wound", "courage",
    ],
    // scholarship
    &[
        "study", "theory", "research", "data", "energy", "system", "model", "measure",
        "experiment", "history", "century", "species", "region", "population", "structure",
        "method", "process", "culture", "language", "area",
    ],
];

struct FieldSpec {
    label: &'static str,
    theme_weights: [u32; 8],
    heart_theme: usize,
}

const FIELDS: [FieldSpec; 4] = [
    FieldSpec { label: "wikipedia", theme_weights: [20, 5, 5, 10, 15, 5, 10, 30], heart_theme: 0 },
    FieldSpec { label: "fiction", theme_weights: [5, 30, 5, 5, 15, 25, 10, 5], heart_theme: 1 },
    FieldSpec { label: "religious", theme_weights: [5, 10, 40, 5, 15, 10, 10, 5], heart_theme: 2 },
    FieldSpec { label: "politics", theme_weights: [5, 5, 5, 40, 10, 10, 15, 10], heart_theme: 3 },
];

/// Approximate token count of each generated field.
pub const DEFAULT_TOKENS: usize = 50_000;

/// Labels of the sample fields, in training order.
pub fn field_labels() -> Vec<&'static str> {
    FIELDS.iter().map(|f| f.label).collect()
}

fn sentence(rng: &mut ChaCha8Rng, field: &FieldSpec, themes: &WeightedIndex<u32>) -> Vec<&'static str> {
    let theme = themes.sample(rng);
    let len = rng.gen_range(8..=16);
    let mut words: Vec<&'static str> = (0..len)
        .map(|_| {
            if rng.gen_bool(0.35) {
                FUNCTION_WORDS.choose(rng).copied().unwrap_or("the")
            } else if rng.gen_bool(0.85) {
                THEMES[theme].choose(rng).copied().unwrap_or("the")
            } else {
                let other = rng.gen_range(0..THEMES.len());
                THEMES[other].choose(rng).copied().unwrap_or("the")
            }
        })
        .collect();
    if theme == field.heart_theme && rng.gen_bool(0.5) {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, SHIFTING_WORD);
    }
    words
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Generates raw text for one field: paragraphs of punctuated sentences, one
/// paragraph per line.
fn field_text(field: &FieldSpec, index: usize, tokens: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(index as u64));
    let themes = WeightedIndex::new(field.theme_weights).expect("positive theme weights");
    let mut out = String::new();
    let mut produced = 0;
    while produced < tokens {
        for s in 0..5 {
            let words = sentence(&mut rng, field, &themes);
            produced += words.len();
            if s > 0 {
                out.push(' ');
            }
            out.push_str(&capitalize(words[0]));
            for (i, w) in words.iter().enumerate().skip(1) {
                out.push_str(if i == words.len() / 2 && rng.gen_bool(0.3) { ", " } else { " " });
                out.push_str(w);
            }
            out.push_str(if rng.gen_bool(0.1) { "!" } else { "." });
        }
        out.push('\n');
    }
    out
}

/// The four sample fields with roughly `tokens` tokens each.
pub fn sample_documents(tokens: usize, seed: u64) -> Vec<RawDocument> {
    FIELDS
        .iter()
        .enumerate()
        .map(|(i, f)| RawDocument::new(f.label, field_text(f, i, tokens, seed)).expect("generated text is valid"))
        .collect()
}

/// Two small fields for quick training checks: about 12k tokens each, every
/// sentence drawn from the first eight words of a single theme.
pub fn toy_documents() -> Vec<RawDocument> {
    (0..2)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(7 + i as u64);
            let mut text = String::new();
            for _ in 0..1_500 {
                let theme = &THEMES[rng.gen_range(0..6)][..8];
                let len = rng.gen_range(6..=10);
                let words: Vec<&str> = (0..len).map(|_| *theme.choose(&mut rng).unwrap_or(&"the")).collect();
                text.push_str(&words.join(" "));
                text.push_str(".\n");
            }
            RawDocument::new(FIELDS[i].label, text).expect("generated text is valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, preprocess};

    #[test]
    fn deterministic_and_sized() {
        let a = sample_documents(5_000, 3);
        let b = sample_documents(5_000, 3);
        assert_eq!(a, b);
        assert_ne!(a[0], sample_documents(5_000, 4)[0]);
        for doc in &a {
            let n = preprocess(doc).token_count();
            assert!((5_000..5_200).contains(&n), "{n}");
        }
    }

    #[test]
    fn shifting_word_survives_intersection() {
        let corpora: Vec<_> = sample_documents(20_000, 1).iter().map(preprocess).collect();
        let vocab = build_vocabulary(&corpora, 5).unwrap();
        assert!(vocab.contains(SHIFTING_WORD));
        assert!(vocab.len() > 150);
    }

    #[test]
    fn toy_is_small() {
        let docs = toy_documents();
        assert_eq!(docs.len(), 2);
        let corpus = preprocess(&docs[0]);
        assert!((10_000..14_000).contains(&corpus.token_count()));
        assert_eq!(corpus.word_counts.len(), 48);
    }
}
