//! Parallel corpora, vocabularies and batching.

mod batch;
mod vocab;

use std::io::{BufRead, BufReader, Read};

pub use batch::{encode_batches, EncodedBatch, EncodedSource};
pub use vocab::{
    Coverage, GranularVocabulary, Granularity, Vocab, VocabSizes, BOS, EOS, PAD, SPECIALS, UNK,
};

use crate::error::{Error, Result};

/// A pre-segmented source sentence and its target translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl SentencePair {
    pub fn new(source: &str, target: &str) -> Result<Self> {
        let pair = SentencePair {
            source: tokenize(source),
            target: tokenize(target),
        };
        if pair.source.is_empty() || pair.target.is_empty() {
            return Err(Error::Input("sentence pair has an empty side".into()));
        }
        Ok(pair)
    }
}

pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

/// Pairs that survived the length filter, and how many were dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
    pub dropped: usize,
}

/// Reads all lines of a UTF-8 stream, naming the first undecodable line.
pub fn read_lines(stream: impl Read, what: &str) -> Result<Vec<String>> {
    let mut reader = BufReader::new(stream);
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::Input(format!("reading {what}: {e}")))?;
        if n == 0 {
            break;
        }
        let line = std::str::from_utf8(&buf).map_err(|_| {
            Error::parse(lines.len() + 1, format!("{what}: invalid UTF-8"))
        })?;
        lines.push(line.trim_end_matches(['\n', '\r']).to_string());
    }
    Ok(lines)
}

/// Reads line-aligned source and target streams, keeping pairs whose sides
/// both have between 1 and `max_len` tokens.
pub fn read_parallel(src: impl Read, tgt: impl Read, max_len: usize) -> Result<ParallelCorpus> {
    let src = read_lines(src, "source")?;
    let tgt = read_lines(tgt, "target")?;
    if src.len() != tgt.len() {
        return Err(Error::Input(format!(
            "source has {} lines but target has {}",
            src.len(),
            tgt.len()
        )));
    }
    let mut pairs = Vec::with_capacity(src.len());
    let mut dropped = 0;
    for (s, t) in src.iter().zip(&tgt) {
        let source = tokenize(s);
        let target = tokenize(t);
        let ok = |v: &Vec<String>| (1..=max_len).contains(&v.len());
        if ok(&source) && ok(&target) {
            pairs.push(SentencePair { source, target });
        } else {
            dropped += 1;
        }
    }
    Ok(ParallelCorpus { pairs, dropped })
}
