use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};

/// One validation point of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRecord {
    pub update: usize,
    pub dev_bleu: f64,
    /// Mean training loss over the updates since the previous validation.
    pub train_loss: f64,
    /// Set when this validation improved on every earlier one. Relative
    /// to the run directory.
    pub checkpoint: Option<PathBuf>,
}

/// Validation history of a run, with the best record by dev BLEU.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLedger {
    pub records: Vec<ValidationRecord>,
}

impl RunLedger {
    /// Index of the record with the highest dev BLEU; the earliest wins ties.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, r) in self.records.iter().enumerate() {
            if best.is_none_or(|b| r.dev_bleu > self.records[b].dev_bleu) {
                best = Some(i);
            }
        }
        best
    }

    pub fn best_record(&self) -> Option<&ValidationRecord> {
        self.best().map(|i| &self.records[i])
    }

    /// Whether `bleu` would become the new best.
    pub fn improves(&self, bleu: f64) -> bool {
        self.best_record().is_none_or(|b| bleu > b.dev_bleu)
    }

    /// Tab-separated, one record per line after a header; floats are
    /// written in their shortest exact form.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("update\tdev_bleu\ttrain_loss\tcheckpoint\n");
        for r in &self.records {
            let ckpt = r.checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.update, r.dev_bleu, r.train_loss, ckpt);
        }
        if let Some(b) = self.best() {
            let _ = writeln!(out, "# best\t{}", self.records[b].update);
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let bad = || Error::parse(i + 1, "malformed ledger record");
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            records.push(ValidationRecord {
                update: f[0].parse().map_err(|_| bad())?,
                dev_bleu: f[1].parse().map_err(|_| bad())?,
                train_loss: f[2].parse().map_err(|_| bad())?,
                checkpoint: (f[3] != "-").then(|| PathBuf::from(f[3])),
            });
        }
        Ok(RunLedger { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(update: usize, bleu: f64) -> ValidationRecord {
        ValidationRecord {
            update,
            dev_bleu: bleu,
            train_loss: 1.0 / update as f64,
            checkpoint: Some(PathBuf::from(format!("model-{update}.ckpt"))),
        }
    }

    #[test]
    fn earliest_best_wins_ties() {
        let ledger = RunLedger {
            records: vec![rec(10, 0.2), rec(20, 0.5), rec(30, 0.5), rec(40, 0.1)],
        };
        assert_eq!(ledger.best(), Some(1));
        assert!(!ledger.improves(0.5));
        assert!(ledger.improves(0.51));
        assert_eq!(RunLedger::default().best(), None);
    }

    #[test]
    fn tsv_round_trip() {
        let mut ledger = RunLedger {
            records: vec![rec(10, 0.1 + 0.2), rec(20, 0.0)],
        };
        ledger.records[1].checkpoint = None;
        let back = RunLedger::parse_tsv(&ledger.to_tsv()).unwrap();
        assert_eq!(back, ledger);
        assert!(RunLedger::parse_tsv("h\n1\t2\n").is_err());
    }
}
