//! Corpus-level MT evaluation against one or more references.
//!
//! All metrics work on space-separated tokens exactly as given. BLEU and
//! NIST use every reference natively (clipping against the most generous
//! reference, pooled information weights). CharacTER and hLEPOR are scored
//! against each reference separately and the per-reference corpus scores
//! are averaged.

mod bleu;
mod character;
mod hlepor;
mod nist;
mod report;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};

pub use bleu::{bleu, bleu_stats, BleuStats};
pub use character::{character_score, levenshtein, sentence_character, shift_words};
pub use hlepor::{align, hlepor, sentence_hlepor, HleporParams};
pub use nist::{nist, nist_beta, nist_brevity_penalty};
pub use report::{evaluate, Report};

/// Tokens of one sentence.
pub type Sentence = Vec<String>;

pub fn tokenize(line: &str) -> Sentence {
    line.split_whitespace().map(str::to_string).collect()
}

/// Lowercases every token of every sentence.
pub fn lowercase(sentences: &[Sentence]) -> Vec<Sentence> {
    sentences
        .iter()
        .map(|s| s.iter().map(|t| t.to_lowercase()).collect())
        .collect()
}

/// For each hypothesis line, the reference translations of that line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    lines: Vec<Vec<Sentence>>,
}

impl ReferenceSet {
    pub fn new(lines: Vec<Vec<Sentence>>) -> Result<Self> {
        if let Some(i) = lines.iter().position(|refs| refs.is_empty()) {
            return Err(Error::Input(format!("line {} has no reference", i + 1)));
        }
        Ok(ReferenceSet { lines })
    }

    /// One reference per line.
    pub fn single(refs: Vec<Sentence>) -> Self {
        ReferenceSet {
            lines: refs.into_iter().map(|r| vec![r]).collect(),
        }
    }

    /// Builds the set from line-aligned reference streams, given as one
    /// sentence list per stream.
    pub fn from_streams(streams: Vec<Vec<Sentence>>) -> Result<Self> {
        let Some(first) = streams.first() else {
            return Err(Error::Input("at least one reference stream is required".into()));
        };
        let n = first.len();
        if let Some(k) = streams.iter().position(|s| s.len() != n) {
            return Err(Error::Input(format!(
                "reference {} has {} lines, reference 1 has {n}",
                k + 1,
                streams[k].len()
            )));
        }
        let mut lines = vec![Vec::with_capacity(streams.len()); n];
        for stream in streams {
            for (i, s) in stream.into_iter().enumerate() {
                lines[i].push(s);
            }
        }
        ReferenceSet::new(lines)
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn line(&self, i: usize) -> &[Sentence] {
        &self.lines[i]
    }

    pub fn lines(&self) -> &[Vec<Sentence>] {
        &self.lines
    }

    /// Largest number of references on any line.
    pub fn reference_count(&self) -> usize {
        self.lines.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn lowercase(&self) -> Self {
        ReferenceSet {
            lines: self.lines.iter().map(|refs| lowercase(refs)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// One corpus-level metric result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricScore {
    pub name: String,
    pub value: f64,
    /// Cumulative scores for orders `1..=n` (BLEU, NIST); empty otherwise.
    pub breakdown: Vec<f64>,
    pub reference_count: usize,
    pub direction: Direction,
    /// Corpus score against each reference index (CharacTER, hLEPOR).
    pub per_reference: Vec<f64>,
    /// Other named statistics, such as the brevity penalty.
    pub extras: BTreeMap<String, f64>,
}

pub(crate) fn check_aligned(hyps: &[Sentence], refs: &ReferenceSet) -> Result<()> {
    if hyps.is_empty() {
        return Err(Error::Input("hypothesis corpus is empty".into()));
    }
    if hyps.len() != refs.len() {
        return Err(Error::Input(format!(
            "{} hypotheses but {} reference lines",
            hyps.len(),
            refs.len()
        )));
    }
    Ok(())
}

/// Counts in a sorted map, so sums over n-grams run in a fixed order.
pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// For every n-gram, the largest count in any one reference.
pub(crate) fn max_ref_counts(refs: &[Sentence], n: usize) -> HashMap<&[String], usize> {
    let mut max: HashMap<&[String], usize> = HashMap::new();
    for r in refs {
        for (g, c) in ngram_counts(r, n) {
            let e = max.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    max
}

/// Mean of `score(hyp, ref)` for each reference index, over the lines that
/// have a reference at that index. Returns the per-index means.
pub(crate) fn per_reference_means(
    hyps: &[Sentence],
    refs: &ReferenceSet,
    mut score: impl FnMut(&[String], &[String]) -> f64,
) -> Vec<f64> {
    (0..refs.reference_count())
        .map(|k| {
            let mut total = 0.0;
            let mut n = 0;
            for (h, rs) in hyps.iter().zip(refs.lines()) {
                if let Some(r) = rs.get(k) {
                    total += score(h, r);
                    n += 1;
                }
            }
            total / n as f64
        })
        .collect()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
