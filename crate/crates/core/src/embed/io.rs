//! Embedding snapshot files and full model checkpoints.
//!
//! Snapshot layout: a text header `DRIFT-EMB 1 <vocab_size> <dim> <field_label>\n`,
//! then per word `<word> <dim x f32 little-endian>\n`, in vocabulary order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingModel, FieldEmbeddings, HuffmanTree};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const EMB_MAGIC: &str = "DRIFT-EMB";
const MODEL_MAGIC: &str = "DRIFT-MODEL";
const VERSION: &str = "1";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn write_embeddings<W: Write>(emb: &FieldEmbeddings, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "{EMB_MAGIC} {VERSION} {} {} {}",
        emb.len(),
        emb.dim(),
        emb.field_label()
    )?;
    for (i, word) in emb.words().iter().enumerate() {
        out.write_all(word.as_bytes())?;
        out.write_all(b" ")?;
        for x in emb.vector(i) {
            out.write_all(&x.to_le_bytes())?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn read_header<R: BufRead>(input: &mut R) -> Result<Vec<String>> {
    let mut line = Vec::new();
    input
        .read_until(b'\n', &mut line)
        .map_err(|e| format_err(format!("reading header: {e}")))?;
    if line.pop() != Some(b'\n') {
        return Err(format_err("missing header line"));
    }
    let line = String::from_utf8(line).map_err(|_| format_err("header is not UTF-8"))?;
    Ok(line.splitn(5, ' ').map(str::to_owned).collect())
}

fn parse_usize(s: Option<&String>, what: &str) -> Result<usize> {
    s.and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(format!("bad {what} in header")))
}

pub fn read_embeddings<R: Read>(input: R) -> Result<FieldEmbeddings> {
    let mut input = BufReader::new(input);
    let header = read_header(&mut input)?;
    if header.first().map(String::as_str) != Some(EMB_MAGIC) || header.get(1).map(String::as_str) != Some(VERSION) {
        return Err(format_err("not a DRIFT-EMB version 1 file"));
    }
    let n = parse_usize(header.get(2), "vocabulary size")?;
    let dim = parse_usize(header.get(3), "dimension")?;
    let label = header.get(4).cloned().ok_or_else(|| format_err("missing field label"))?;

    let mut words = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    let mut buf = vec![0u8; dim * 4 + 1];
    for i in 0..n {
        let mut word = Vec::new();
        input
            .read_until(b' ', &mut word)
            .map_err(|e| format_err(format!("record {i}: {e}")))?;
        if word.pop() != Some(b' ') || word.is_empty() {
            return Err(format_err(format!("record {i}: truncated word")));
        }
        words.push(String::from_utf8(word).map_err(|_| format_err(format!("record {i}: word is not UTF-8")))?);
        input
            .read_exact(&mut buf)
            .map_err(|_| format_err(format!("record {i}: truncated vector")))?;
        if buf[dim * 4] != b'\n' {
            return Err(format_err(format!("record {i}: missing newline")));
        }
        data.extend(
            buf[..dim * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(|e| format_err(e.to_string()))? != 0 {
        return Err(format_err("trailing bytes after last record"));
    }
    FieldEmbeddings::new(label, words, dim, data)
}

pub fn save_embeddings(emb: &FieldEmbeddings, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings(emb, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<FieldEmbeddings> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(file).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Checkpoint layout: `DRIFT-MODEL 1 <vocab_size> <dim>\n`, then Huffman
/// counts (u64), input vectors and node vectors (f64), all little-endian.
pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{MODEL_MAGIC} {VERSION} {} {}", model.vocab().len(), model.dim())?;
        for c in model.tree().counts() {
            out.write_all(&c.to_le_bytes())?;
        }
        for x in model.input_vectors().iter().chain(model.node_vectors()) {
            out.write_all(&x.to_le_bytes())?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path, vocab: &Vocabulary) -> Result<EmbeddingModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let header = read_header(&mut input)?;
    if header.first().map(String::as_str) != Some(MODEL_MAGIC) || header.get(1).map(String::as_str) != Some(VERSION) {
        return Err(format_err(format!("{}: not a DRIFT-MODEL file", path.display())));
    }
    let n = parse_usize(header.get(2), "vocabulary size")?;
    let dim = parse_usize(header.get(3), "dimension")?;
    if n != vocab.len() {
        return Err(format_err(format!(
            "{}: model has {n} words, vocabulary has {}",
            path.display(),
            vocab.len()
        )));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let expected = 8 * (n + n * dim + n.saturating_sub(1) * dim);
    if bytes.len() != expected {
        return Err(format_err(format!("{}: expected {expected} payload bytes", path.display())));
    }
    let mut words = bytes.chunks_exact(8).map(|b| <[u8; 8]>::try_from(b).unwrap());
    let counts: Vec<u64> = words.by_ref().take(n).map(u64::from_le_bytes).collect();
    let input_vecs: Vec<f64> = words.by_ref().take(n * dim).map(f64::from_le_bytes).collect();
    let nodes: Vec<f64> = words.map(f64::from_le_bytes).collect();
    let tree = HuffmanTree::build(&counts)?;
    EmbeddingModel::from_parts(vocab.clone(), tree, dim, input_vecs, nodes)
}
