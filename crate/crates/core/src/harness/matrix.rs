use std::fmt::Write as _;
use std::path::PathBuf;

use super::{load_model, train, DevSet, ExperimentConfig, RunLedger};
use crate::composition::{input_dim, CompositionSetting};
use crate::data::tokenize;
use crate::decode::{beam_search, default_max_len, detokenize};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::{evaluate, ReferenceSet, Report, Sentence};

/// A completed run of one setting.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ledger: RunLedger,
    /// The checkpoint the report was computed from.
    pub checkpoint: PathBuf,
    /// Dev-set scores of beam-search translations.
    pub report: Report,
}

#[derive(Debug)]
pub struct MatrixRun {
    pub setting: CompositionSetting,
    pub input_width: usize,
    pub result: Result<RunSummary>,
}

/// Beam-search translations of the dev set with the configured width,
/// and the dev references.
pub fn decode_dev(config: &ExperimentConfig, checkpoint: &std::path::Path) -> Result<(Vec<Sentence>, ReferenceSet)> {
    let loaded = load_model(checkpoint)?;
    let dev = DevSet::load(config, &loaded.vocab, &loaded.table)?;
    let hyps = dev
        .sources
        .iter()
        .map(|s| match s {
            None => Ok(Vec::new()),
            Some(src) => {
                let t = beam_search(&loaded.model, src, config.beam_width, default_max_len(src.len()))?;
                Ok(tokenize(&detokenize(&t.tokens, &loaded.vocab)))
            }
        })
        .collect::<Result<_>>()?;
    Ok((hyps, dev.refs))
}

/// Trains one setting and scores its best checkpoint on the dev set.
pub fn run_setting(config: &ExperimentConfig) -> Result<RunSummary> {
    let outcome = train(config)?;
    let checkpoint = outcome
        .best_checkpoint()
        .unwrap_or_else(|| outcome.init_checkpoint.clone());
    let (hyps, refs) = decode_dev(config, &checkpoint)?;
    let report = evaluate(&hyps, &refs, false, &config.hlepor)?;
    let out = &config.output_dir;
    let text: String = hyps.iter().map(|h| h.join(" ") + "\n").collect();
    write_atomic(&out.join("dev.hyp"), text.as_bytes())?;
    write_atomic(&out.join("report.json"), report.to_json().as_bytes())?;
    write_atomic(&out.join("report.txt"), report.to_text().as_bytes())?;
    Ok(RunSummary {
        ledger: outcome.ledger,
        checkpoint,
        report,
    })
}

/// Runs all five settings in reporting order, each under
/// `output_dir/<slug>`, and writes `matrix.txt` comparing them. A failed
/// run is reported and the remaining ones still run.
pub fn run_matrix(base: &ExperimentConfig) -> Result<Vec<MatrixRun>> {
    base.validate()?;
    let runs: Vec<MatrixRun> = CompositionSetting::ALL
        .into_iter()
        .map(|setting| MatrixRun {
            setting,
            input_width: input_dim(setting, base.emb_dim),
            result: run_setting(&base.for_setting(setting)),
        })
        .collect();
    write_atomic(&base.output_dir.join("matrix.txt"), matrix_table(&runs).as_bytes())?;
    Ok(runs)
}

fn scores(r: &Report, name: &str) -> Vec<f64> {
    r.get(name).map(|s| s.breakdown.clone()).unwrap_or_default()
}

/// BLEU 1-4 and NIST 1-5 per setting, then hLEPOR and CharacTER.
pub fn matrix_table(runs: &[MatrixRun]) -> String {
    let mut out = String::new();
    let mut section = |title: &str, columns: &[&str], row: &dyn Fn(&Report) -> Vec<f64>| {
        let _ = write!(out, "{title}\n{:<8}", "setting");
        for c in columns {
            let _ = write!(out, " {c:>9}");
        }
        out.push('\n');
        for run in runs {
            let _ = write!(out, "{:<8}", run.setting.abbreviation());
            match &run.result {
                Ok(s) => {
                    for v in row(&s.report) {
                        let _ = write!(out, " {v:>9.4}");
                    }
                }
                Err(e) => {
                    let _ = write!(out, " failed: error[{}] {}", e.class(), e.to_string().replace('\n', " "));
                }
            }
            out.push('\n');
        }
        out.push('\n');
    };
    section("BLEU", &["1-gram", "2-gram", "3-gram", "4-gram"], &|r| scores(r, "BLEU"));
    section("NIST", &["1-gram", "2-gram", "3-gram", "4-gram", "5-gram"], &|r| scores(r, "NIST"));
    section("Other", &["hLEPOR", "CharacTER"], &|r| {
        ["hLEPOR", "CharacTER"]
            .iter()
            .map(|n| r.get(n).map_or(f64::NAN, |s| s.value))
            .collect()
    });
    out
}

impl MatrixRun {
    pub fn error(&self) -> Option<&Error> {
        self.result.as_ref().err()
    }
}
