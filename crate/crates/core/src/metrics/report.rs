use std::fmt::Write as _;

use serde::Serialize;

use super::{bleu, character_score, hlepor, lowercase, nist, HleporParams, MetricScore, ReferenceSet, Sentence};
use crate::error::Result;

/// Every metric on one hypothesis corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub lines: usize,
    pub references: usize,
    pub case_insensitive: bool,
    pub hlepor: HleporParams,
    pub scores: Vec<MetricScore>,
}

/// BLEU 1-4, NIST 1-5, hLEPOR and CharacTER.
pub fn evaluate(
    hyps: &[Sentence],
    refs: &ReferenceSet,
    case_insensitive: bool,
    params: &HleporParams,
) -> Result<Report> {
    let (hyps, refs) = if case_insensitive {
        (lowercase(hyps), refs.lowercase())
    } else {
        (hyps.to_vec(), refs.clone())
    };
    let scores = vec![
        bleu(&hyps, &refs, 4, false)?,
        nist(&hyps, &refs, 5)?,
        hlepor(&hyps, &refs, params)?,
        character_score(&hyps, &refs)?,
    ];
    Ok(Report {
        lines: hyps.len(),
        references: refs.reference_count(),
        case_insensitive,
        hlepor: *params,
        scores,
    })
}

impl Report {
    pub fn get(&self, name: &str) -> Option<&MetricScore> {
        self.scores.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// One row per metric: overall value, then the cumulative n-gram
    /// columns where the metric has them.
    pub fn to_text(&self) -> String {
        let width = self.scores.iter().map(|s| s.breakdown.len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = write!(out, "{:<10} {:>8}", "metric", "value");
        for n in 1..=width {
            let _ = write!(out, " {:>8}", format!("{n}-gram"));
        }
        out.push('\n');
        for s in &self.scores {
            let _ = write!(out, "{:<10} {:>8.4}", s.name, s.value);
            for v in &s.breakdown {
                let _ = write!(out, " {v:>8.4}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "{} lines, {} reference(s){}",
            self.lines,
            self.references,
            if self.case_insensitive { ", case-insensitive" } else { "" }
        );
        out
    }
}
