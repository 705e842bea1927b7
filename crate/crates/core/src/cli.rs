//! Command-line pipeline: preprocess, train, score and plot, each stage
//! reading only what the previous stage wrote under the output directory.
//!
//! Layout of the output directory:
//!
//! ```text
//! corpus/<label>.txt         one sentence per line
//! corpus/<label>.counts.tsv  word counts
//! vocab.tsv                  shared vocabulary with per-field counts
//! emb/<NN>_<label>.emb       normalized snapshot after field NN
//! model.bin                  final model state
//! scores.tsv                 ranked shift scores
//! plots/<word>_scatter.svg
//! plots/<word>_storyline.svg
//! plots/<word>_storyline.txt cluster order per segment
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use crate::corpus::{build_vocabulary, preprocess, Corpus, RawDocument, Vocabulary, DEFAULT_MIN_COUNT};
use crate::embed::{load_embeddings, load_model, save_embeddings, save_model, train_sequence_from, TrainingConfig};
use crate::error::Error;
use crate::sample;
use crate::scatter::{build_scene, render_scatter, ScatterStyle, DEFAULT_PER_SEGMENT_K};
use crate::shift::{rank_shifts, scores_to_tsv, EmbeddingSequence, EnsembleMode, ShiftConfig, ShiftScore};
use crate::storyline::{build_timeline, layout, render_storyline, timeline_text, StorylineConfig, StorylineStyle};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_QUERY: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

/// Vocabulary suggestions listed for an unknown word.
const SUGGESTIONS: usize = 5;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::OutOfVocabulary(_) | Error::DegenerateGeometry(_) => EXIT_QUERY,
            Error::TrainingDiverged { .. } => EXIT_DIVERGED,
            _ => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSource {
    pub label: String,
    pub path: PathBuf,
}

/// Everything a pipeline run needs. Built from a flat `key = value` file:
///
/// ```text
/// # fields are trained in the order listed
/// field = wikipedia corpora/wikipedia.txt
/// field = fiction corpora/fiction.txt
/// out = out
/// dim = 32
/// ```
///
/// Relative paths resolve against the config file's directory. Other keys:
/// `seed`, `threads`, `window`, `epochs`, `learning_rate`, `min_count`,
/// `knn`, `ensemble` (`sum` or `rank-fusion`), `storyline_m`, `storyline_k`,
/// `scatter_k` and `init_model`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fields: Vec<FieldSource>,
    pub training: TrainingConfig,
    pub min_count: u64,
    pub shift: ShiftConfig,
    pub storyline: StorylineConfig,
    pub scatter_k: usize,
    pub out: PathBuf,
    /// Model checkpoint to fine-tune instead of starting fresh.
    pub init_model: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fields: Vec::new(),
            training: TrainingConfig::default(),
            min_count: DEFAULT_MIN_COUNT,
            shift: ShiftConfig::default(),
            storyline: StorylineConfig::default(),
            scatter_k: DEFAULT_PER_SEGMENT_K,
            out: PathBuf::from("out"),
            init_model: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> CliResult<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::input(format!("config line {line}: bad value for {key}: {e}")))
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl PipelineConfig {
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg = PipelineConfig::default();
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_owned()
            } else {
                base.join(p)
            }
        };
        cfg.out = resolve("out");
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("config line {n}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "field" => {
                    let (label, path) = value
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| CliError::input(format!("config line {n}: expected field = LABEL PATH")))?;
                    cfg.fields.push(FieldSource {
                        label: label.to_owned(),
                        path: resolve(path.trim()),
                    });
                }
                "out" => cfg.out = resolve(value),
                "init_model" => cfg.init_model = Some(resolve(value)),
                "seed" => cfg.training.seed = parse_value(key, value, n)?,
                "threads" => {
                    let t = parse_value(key, value, n)?;
                    cfg.training.threads = t;
                    cfg.shift.threads = t;
                }
                "window" => cfg.training.window = parse_value(key, value, n)?,
                "dim" => cfg.training.dim = parse_value(key, value, n)?,
                "epochs" => cfg.training.epochs = parse_value(key, value, n)?,
                "learning_rate" => cfg.training.initial_learning_rate = parse_value(key, value, n)?,
                "min_count" => cfg.min_count = parse_value(key, value, n)?,
                "knn" => cfg.shift.k_nn = parse_value(key, value, n)?,
                "ensemble" => {
                    cfg.shift.ensemble = match value {
                        "sum" => EnsembleMode::Sum,
                        "rank-fusion" => EnsembleMode::RankFusion,
                        _ => {
                            return Err(CliError::input(format!(
                                "config line {n}: ensemble must be sum or rank-fusion"
                            )))
                        }
                    }
                }
                "storyline_m" => cfg.storyline.m = parse_value(key, value, n)?,
                "storyline_k" => cfg.storyline.k = parse_value(key, value, n)?,
                "scatter_k" => cfg.scatter_k = parse_value(key, value, n)?,
                _ => return Err(CliError::input(format!("config line {n}: unknown key {key:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::from(Error::io(path, e)))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Checks the static constraints. Input paths are checked when read.
    pub fn validate(&self) -> CliResult<()> {
        if self.fields.len() < 2 {
            return Err(CliError::input(format!("need at least two fields, got {}", self.fields.len())));
        }
        for (i, f) in self.fields.iter().enumerate() {
            if !valid_label(&f.label) {
                return Err(CliError::input(format!(
                    "field label {:?} may only contain letters, digits, '-', '_' and '.'",
                    f.label
                )));
            }
            if self.fields[..i].iter().any(|g| g.label == f.label) {
                return Err(CliError::input(format!("duplicate field label {:?}", f.label)));
            }
        }
        self.training.validate()?;
        if self.shift.k_nn == 0 || self.shift.threads == 0 {
            return Err(CliError::input("knn and threads must be positive"));
        }
        Ok(())
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, threads: Option<usize>, out: Option<PathBuf>) -> CliResult<Self> {
        if let Some(s) = seed {
            self.training.seed = s;
        }
        if let Some(t) = threads {
            self.training.threads = t;
            self.shift.threads = t;
        }
        if let Some(o) = out {
            self.out = o;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn corpus_path(&self, label: &str) -> PathBuf {
        self.out.join("corpus").join(format!("{label}.txt"))
    }

    pub fn counts_path(&self, label: &str) -> PathBuf {
        self.out.join("corpus").join(format!("{label}.counts.tsv"))
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.out.join("vocab.tsv")
    }

    pub fn embedding_path(&self, index: usize) -> PathBuf {
        self.out.join("emb").join(format!("{index:02}_{}.emb", self.fields[index].label))
    }

    pub fn model_path(&self) -> PathBuf {
        self.out.join("model.bin")
    }

    pub fn scores_path(&self) -> PathBuf {
        self.out.join("scores.tsv")
    }

    pub fn plot_path(&self, word: &str, suffix: &str) -> PathBuf {
        let stem: String = word
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { '_' })
            .collect();
        self.out.join("plots").join(format!("{stem}_{suffix}"))
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e).into())
}

fn read_text(path: &Path) -> CliResult<String> {
    let bytes = read(path)?;
    String::from_utf8(bytes).map_err(|e| {
        CliError::input(format!(
            "{}: invalid UTF-8 at byte offset {}",
            path.display(),
            e.utf8_error().valid_up_to()
        ))
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn load_vocabulary(cfg: &PipelineConfig) -> CliResult<Vocabulary> {
    let vocab = Vocabulary::from_tsv(&read_text(&cfg.vocab_path())?, cfg.min_count)?;
    let labels: Vec<&str> = cfg.fields.iter().map(|f| f.label.as_str()).collect();
    if vocab.field_labels() != labels.as_slice() {
        return Err(CliError::input(format!(
            "{} lists fields {:?}, config has {:?}",
            cfg.vocab_path().display(),
            vocab.field_labels(),
            labels
        )));
    }
    Ok(vocab)
}

fn load_sequence(cfg: &PipelineConfig) -> CliResult<(Vocabulary, EmbeddingSequence)> {
    let vocab = load_vocabulary(cfg)?;
    let snapshots = (0..cfg.fields.len())
        .map(|i| load_embeddings(&cfg.embedding_path(i)))
        .collect::<crate::Result<Vec<_>>>()?;
    let seq = EmbeddingSequence::from_vocabulary(snapshots, &vocab)?;
    Ok((vocab, seq))
}

/// Tokenizes every field, writes the corpus files and the shared vocabulary.
pub fn cmd_preprocess(cfg: &PipelineConfig) -> CliResult<Vocabulary> {
    let mut corpora = Vec::with_capacity(cfg.fields.len());
    for field in &cfg.fields {
        let bytes = read(&field.path)?;
        let doc = RawDocument::from_bytes(field.label.as_str(), &bytes).map_err(|e| {
            CliError::input(format!("{}: {e}", field.path.display()))
        })?;
        let corpus = preprocess(&doc);
        info!("{}: {} tokens", field.label, corpus.token_count());
        write(&cfg.corpus_path(&field.label), corpus.to_lines())?;
        write(&cfg.counts_path(&field.label), corpus.counts_sidecar())?;
        corpora.push(corpus);
    }
    let vocab = build_vocabulary(&corpora, cfg.min_count)?;
    write(&cfg.vocab_path(), vocab.to_tsv())?;
    Ok(vocab)
}

/// Trains over the fields in order and writes one snapshot per field plus
/// the final model.
pub fn cmd_train(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let vocab = load_vocabulary(cfg)?;
    let corpora = cfg
        .fields
        .iter()
        .map(|f| Ok(Corpus::from_lines(f.label.as_str(), &read_text(&cfg.corpus_path(&f.label))?)))
        .collect::<CliResult<Vec<_>>>()?;
    let init = cfg
        .init_model
        .as_deref()
        .map(|p| load_model(p, &vocab))
        .transpose()?;
    let (snapshots, model) = train_sequence_from(&corpora, &vocab, &cfg.training, init)?;
    let mut written = Vec::with_capacity(snapshots.len());
    for (i, snap) in snapshots.iter().enumerate() {
        let path = cfg.embedding_path(i);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        save_embeddings(snap, &path)?;
        written.push(path);
    }
    save_model(&model, &cfg.model_path())?;
    Ok(written)
}

/// Scores and ranks every vocabulary word and writes the TSV.
pub fn cmd_score(cfg: &PipelineConfig) -> CliResult<Vec<ShiftScore>> {
    let (_, seq) = load_sequence(cfg)?;
    let scores = rank_shifts(&seq, &cfg.shift)?;
    write(&cfg.scores_path(), scores_to_tsv(&scores))?;
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Scatter,
    Storyline,
}

/// Vocabulary words closest to `word` by edit distance.
pub fn suggestions(word: &str, vocab: &[String], n: usize) -> Vec<String> {
    let mut ranked: Vec<(usize, &String)> = vocab.iter().map(|w| (strsim::levenshtein(word, w), w)).collect();
    ranked.sort();
    ranked.into_iter().take(n).map(|(_, w)| w.clone()).collect()
}

/// Draws one figure for `word`. Returns the files written.
pub fn cmd_plot(cfg: &PipelineConfig, word: &str, kind: PlotKind) -> CliResult<Vec<PathBuf>> {
    let (vocab, seq) = load_sequence(cfg)?;
    if !vocab.contains(word) {
        return Err(CliError {
            code: EXIT_QUERY,
            message: format!(
                "word {word:?} is not in the vocabulary; nearest matches: {}",
                suggestions(word, vocab.words(), SUGGESTIONS).join(", ")
            ),
        });
    }
    match kind {
        PlotKind::Scatter => {
            let scene = build_scene(word, &seq, cfg.scatter_k)?;
            let path = cfg.plot_path(word, "scatter.svg");
            write(&path, render_scatter(&scene, &ScatterStyle::default()))?;
            Ok(vec![path])
        }
        PlotKind::Storyline => {
            let timeline = build_timeline(word, &seq, &cfg.storyline)?;
            let lay = layout(&timeline, &cfg.storyline);
            let svg_path = cfg.plot_path(word, "storyline.svg");
            let txt_path = cfg.plot_path(word, "storyline.txt");
            write(&svg_path, render_storyline(&timeline, &lay, &StorylineStyle::default()))?;
            write(&txt_path, timeline_text(&timeline, &lay))?;
            Ok(vec![svg_path, txt_path])
        }
    }
}

/// Writes the synthetic sample fields and a ready-to-run config into `dir`.
/// Returns the config path.
pub fn cmd_sample(dir: &Path, tokens: usize, seed: u64) -> CliResult<PathBuf> {
    let mut config = String::from("# synthetic sample fields, trained in this order\n");
    for doc in sample::sample_documents(tokens, seed) {
        let name = format!("corpora/{}.txt", doc.field_label);
        write(&dir.join(&name), &doc.text)?;
        config.push_str(&format!("field = {} {name}\n", doc.field_label));
    }
    config.push_str("out = out\nseed = 1\nthreads = 1\ndim = 32\n");
    let path = dir.join("pipeline.conf");
    write(&path, config)?;
    Ok(path)
}

#[derive(Debug, Parser)]
#[command(name = "lingshift", version, about = "Field-specific embeddings and linguistic shift")]
pub struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 is deterministic.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize the field corpora and build the shared vocabulary.
    Preprocess,
    /// Train sequentially over the fields and write per-field snapshots.
    Train,
    /// Score and rank every word for shift.
    Score,
    /// Draw a scatterplot or storyline for one word.
    Plot {
        #[arg(long)]
        word: String,
        #[arg(long, value_enum, default_value_t = PlotKind::Scatter)]
        kind: PlotKind,
    },
    /// Write synthetic sample corpora and a config to run them.
    Sample {
        #[arg(long)]
        dir: PathBuf,
        /// Approximate tokens per field.
        #[arg(long, default_value_t = sample::DEFAULT_TOKENS)]
        tokens: usize,
    },
}

fn pipeline_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::input("--config is required"))?;
    PipelineConfig::load(path)?.with_overrides(cli.seed, cli.threads, cli.out.clone())
}

/// Runs one subcommand, printing a short summary to stdout.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Sample { dir, tokens } => {
            let path = cmd_sample(dir, *tokens, cli.seed.unwrap_or(1))?;
            println!("wrote {}", path.display());
        }
        Command::Preprocess => {
            let cfg = pipeline_config(cli)?;
            let vocab = cmd_preprocess(&cfg)?;
            println!("vocabulary size: {}", vocab.len());
        }
        Command::Train => {
            let cfg = pipeline_config(cli)?;
            for path in cmd_train(&cfg)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Score => {
            let cfg = pipeline_config(cli)?;
            let scores = cmd_score(&cfg)?;
            println!("scored {} words into {}", scores.len(), cfg.scores_path().display());
        }
        Command::Plot { word, kind } => {
            let cfg = pipeline_config(cli)?;
            for path in cmd_plot(&cfg, word, *kind)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
