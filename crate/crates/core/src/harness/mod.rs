//! Training runs, checkpoint selection, file-level evaluation and the
//! five-setting comparison.
//!
//! A run directory holds the vocabularies (`vocab.<granularity>.tsv`), a
//! copy of the decomposition table and the config, `init.ckpt`, one
//! `model-<update>.ckpt` (with a `.meta` sidecar) per dev-BLEU
//! improvement, and `ledger.tsv`. Every file is written atomically.

mod config;
mod ledger;
mod matrix;
mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use ledger::{RunLedger, ValidationRecord};
pub use matrix::{decode_dev, matrix_table, run_matrix, run_setting, MatrixRun, RunSummary};
pub use train::{checkpoint_name, load_model, recorded_dev_bleu, train, DevSet, LoadedModel, TrainOutcome};

use crate::data::{read_lines, Granularity, GranularVocabulary, Vocab};
use crate::decode::translate_corpus;
use crate::error::{Error, Result};
use crate::io::{open, read_to_string, write_atomic};
use crate::metrics::{evaluate, tokenize, HleporParams, ReferenceSet, Report};

pub fn vocab_path(dir: &Path, g: Granularity) -> PathBuf {
    dir.join(format!("vocab.{}.tsv", g.name()))
}

pub fn save_vocab_dir(dir: &Path, vocab: &GranularVocabulary) -> Result<()> {
    for g in Granularity::ALL {
        write_atomic(&vocab_path(dir, g), vocab.get(g).to_text().as_bytes())?;
    }
    Ok(())
}

pub fn load_vocab_dir(dir: &Path) -> Result<GranularVocabulary> {
    let load = |g| {
        let path = vocab_path(dir, g);
        Vocab::parse(&read_to_string(&path)?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    };
    Ok(GranularVocabulary {
        words: load(Granularity::Word)?,
        characters: load(Granularity::Character)?,
        radicals: load(Granularity::Radical)?,
        target: load(Granularity::Target)?,
    })
}

/// Scores a hypothesis file against line-aligned reference files.
pub fn evaluate_files(hyp: &Path, refs: &[PathBuf], case_insensitive: bool, params: &HleporParams) -> Result<Report> {
    let read = |p: &Path| -> Result<Vec<Vec<String>>> {
        let lines = read_lines(open(p)?, &p.display().to_string())?;
        Ok(lines.iter().map(|l| tokenize(l)).collect())
    };
    let hyps = read(hyp)?;
    let streams = refs.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
    for (p, s) in refs.iter().zip(&streams) {
        if s.len() != hyps.len() {
            return Err(Error::Input(format!(
                "{} has {} lines but {} has {}",
                p.display(),
                s.len(),
                hyp.display(),
                hyps.len()
            )));
        }
    }
    evaluate(&hyps, &ReferenceSet::from_streams(streams)?, case_insensitive, params)
}

/// Translates `input` with a trained checkpoint, writing one line per
/// input line to `output` (or returning the text when `output` is `None`).
pub fn translate_file(
    checkpoint: &Path,
    input: &Path,
    output: Option<&Path>,
    width: usize,
    max_len: Option<usize>,
) -> Result<Option<String>> {
    let loaded = load_model(checkpoint)?;
    let reader = BufReader::new(open(input)?);
    match output {
        Some(path) => {
            let tmp = path.with_extension("partial");
            let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(file);
            translate_corpus(&loaded.model, &loaded.vocab, &loaded.table, reader, &mut w, width, max_len)?;
            w.flush().map_err(|e| Error::io(&tmp, e))?;
            drop(w);
            std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
            Ok(None)
        }
        None => {
            let mut buf = Vec::new();
            translate_corpus(&loaded.model, &loaded.vocab, &loaded.table, reader, &mut buf, width, max_len)?;
            Ok(Some(String::from_utf8(buf).expect("translations are UTF-8")))
        }
    }
}
