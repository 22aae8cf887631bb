//! Greedy and beam-search decoding.
//!
//! Beam search follows the shrinking-beam scheme of dl4mt: at each step the
//! live hypotheses are expanded over the whole target vocabulary and the
//! best `width - finished` continuations survive. A continuation ending in
//! EOS moves to the finished pool. The search stops when `width`
//! hypotheses have finished or `max_len` tokens have been emitted. The
//! result is the hypothesis, finished or still live, with the best
//! length-normalized score.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, Axis};

use crate::data::{tokenize, EncodedSource, GranularVocabulary, BOS, EOS};
use crate::decomposition::DecompositionTable;
use crate::error::{Error, Result};
use crate::model::{Annotations, ModelParams};
use crate::real::Real;

/// Hard upper bound on the default output length.
pub const MAX_LEN_CAP: usize = 100;

/// `min(2·source_len + 5, 100)`.
pub fn default_max_len(source_len: usize) -> usize {
    (2 * source_len + 5).min(MAX_LEN_CAP)
}

/// A partial or complete output sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<T> {
    /// Emitted tokens; a finished hypothesis ends with EOS.
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    /// Decoder state after the last emitted token.
    pub state: Array1<T>,
    pub finished: bool,
}

impl<T> Hypothesis<T> {
    /// Log-probability per emitted token (EOS included).
    pub fn normalized_score(&self) -> f64 {
        if self.tokens.is_empty() {
            0.0
        } else {
            self.log_prob / self.tokens.len() as f64
        }
    }
}

/// Decoder output with EOS removed from `tokens`.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub tokens: Vec<u32>,
    /// Sum of token log-probabilities, including EOS when `finished`.
    pub log_prob: f64,
    /// `log_prob` divided by the number of scored tokens.
    pub score: f64,
    pub finished: bool,
}

impl<T> From<Hypothesis<T>> for Translation {
    fn from(h: Hypothesis<T>) -> Self {
        let score = h.normalized_score();
        let mut tokens = h.tokens;
        if h.finished {
            tokens.pop();
        }
        Translation {
            tokens,
            log_prob: h.log_prob,
            score,
            finished: h.finished,
        }
    }
}

/// A scored expansion `(hypothesis row, token)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub row: usize,
    pub token: u32,
    pub score: f64,
}

/// Higher score first; ties go to the lower row, then the lower token.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.row.cmp(&b.row))
        .then(a.token.cmp(&b.token))
}

/// The best `k` candidates, best first.
pub fn select_top(mut candidates: Vec<Candidate>, k: usize) -> Vec<Candidate> {
    if k == 0 {
        return Vec::new();
    }
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, rank);
        candidates.truncate(k);
    }
    candidates.sort_by(rank);
    candidates
}

fn check_request<T: Real>(model: &ModelParams<T>, source: &EncodedSource, max_len: usize) -> Result<()> {
    if source.is_empty() {
        return Err(Error::Input("cannot translate an empty source sentence".into()));
    }
    if max_len == 0 {
        return Err(Error::Input("max_len must be at least 1".into()));
    }
    if model.dims.target_vocab <= EOS as usize {
        return Err(Error::Shape("target vocabulary has no EOS entry".into()));
    }
    Ok(())
}

/// Highest-probability token at each step; ties go to the lowest id.
pub fn greedy<T: Real>(model: &ModelParams<T>, source: &EncodedSource, max_len: usize) -> Result<Translation> {
    check_request(model, source, max_len)?;
    let ann = model.encode(&model.compose_source(source)?)?;
    let mut state = model.initial_state(&ann);
    let mut prev = BOS;
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    while tokens.len() < max_len {
        let emb = model.embed_target(&[prev])?;
        let att = model.attend(state.view(), emb.view(), &ann)?;
        let (next, logits) = model.decode_step(att.s_tilde.view(), att.context.view(), emb.view())?;
        let logp = ModelParams::log_probabilities(&logits);
        let mut best = 0;
        for (v, &lp) in logp.row(0).iter().enumerate() {
            if lp > logp[[0, best]] {
                best = v;
            }
        }
        log_prob += logp[[0, best]].as_f64();
        tokens.push(best as u32);
        state = next;
        prev = best as u32;
        if prev == EOS {
            break;
        }
    }
    let finished = prev == EOS;
    Ok(Hypothesis {
        tokens,
        log_prob,
        state: state.row(0).to_owned(),
        finished,
    }
    .into())
}

/// Beam search of the given width.
pub fn beam_search<T: Real>(
    model: &ModelParams<T>,
    source: &EncodedSource,
    width: usize,
    max_len: usize,
) -> Result<Translation> {
    Ok(beam_hypotheses(model, source, width, max_len)?.into())
}

/// Runs the beam and returns the selected hypothesis with its final state.
pub fn beam_hypotheses<T: Real>(
    model: &ModelParams<T>,
    source: &EncodedSource,
    width: usize,
    max_len: usize,
) -> Result<Hypothesis<T>> {
    check_request(model, source, max_len)?;
    if width == 0 {
        return Err(Error::Input("beam width must be at least 1".into()));
    }
    let ann = model.encode(&model.compose_source(source)?)?;
    let s0 = model.initial_state(&ann);
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: s0.row(0).to_owned(),
        finished: false,
    }];
    let mut finished: Vec<Hypothesis<T>> = Vec::new();
    let mut step = 0;
    while step < max_len && finished.len() < width && !live.is_empty() {
        live = expand(model, &ann, &live, width - finished.len(), &mut finished)?;
        step += 1;
    }
    let pool = finished.into_iter().chain(live);
    let mut best: Option<Hypothesis<T>> = None;
    for h in pool {
        // strict comparison keeps the earliest of equally scored outputs
        if best.as_ref().is_none_or(|b| h.normalized_score() > b.normalized_score()) {
            best = Some(h);
        }
    }
    best.ok_or_else(|| Error::Input("beam search produced no hypothesis".into()))
}

fn expand<T: Real>(
    model: &ModelParams<T>,
    ann: &Annotations<T>,
    live: &[Hypothesis<T>],
    k: usize,
    finished: &mut Vec<Hypothesis<T>>,
) -> Result<Vec<Hypothesis<T>>> {
    let rows = live.len();
    let ann = ann.select(&vec![0; rows]);
    let mut states = Array2::zeros((rows, model.dims.hidden));
    for (i, h) in live.iter().enumerate() {
        states.row_mut(i).assign(&h.state);
    }
    let prev: Vec<u32> = live.iter().map(|h| *h.tokens.last().unwrap_or(&BOS)).collect();
    let emb = model.embed_target(&prev)?;
    let att = model.attend(states.view(), emb.view(), &ann)?;
    let (next, logits) = model.decode_step(att.s_tilde.view(), att.context.view(), emb.view())?;
    let logp = ModelParams::log_probabilities(&logits);

    let mut candidates = Vec::with_capacity(rows * model.dims.target_vocab);
    for (row, lp) in logp.axis_iter(Axis(0)).enumerate() {
        let base = live[row].log_prob;
        for (token, &l) in lp.iter().enumerate() {
            candidates.push(Candidate {
                row,
                token: token as u32,
                score: base + l.as_f64(),
            });
        }
    }
    let mut survivors = Vec::with_capacity(k);
    for c in select_top(candidates, k) {
        let mut tokens = live[c.row].tokens.clone();
        tokens.push(c.token);
        let h = Hypothesis {
            tokens,
            log_prob: c.score,
            state: next.row(c.row).to_owned(),
            finished: c.token == EOS,
        };
        if h.finished {
            finished.push(h);
        } else {
            survivors.push(h);
        }
    }
    Ok(survivors)
}

/// Target-side surface form of a decoded sequence, BOS and EOS removed.
pub fn detokenize(tokens: &[u32], vocab: &GranularVocabulary) -> String {
    tokens
        .iter()
        .filter(|&&t| t != BOS && t != EOS)
        .map(|&t| vocab.target.token(t).unwrap_or("UNK"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Translates every line of `input` into `output`, one line per line.
/// Empty input lines produce empty output lines. `max_len = None` uses
/// [`default_max_len`] per sentence. Returns the number of lines written.
pub fn translate_corpus<T: Real>(
    model: &ModelParams<T>,
    vocab: &GranularVocabulary,
    table: &DecompositionTable,
    input: impl BufRead,
    mut output: impl Write,
    width: usize,
    max_len: Option<usize>,
) -> Result<usize> {
    let mut count = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Input(format!("input line {}: {e}", i + 1)))?;
        let tokens = tokenize(&line);
        let text = if tokens.is_empty() {
            String::new()
        } else {
            let source = EncodedSource::encode(&tokens, vocab, table)
                .map_err(|e| Error::Input(format!("input line {}: {e}", i + 1)))?;
            let limit = max_len.unwrap_or_else(|| default_max_len(tokens.len()));
            let t = beam_search(model, &source, width, limit)?;
            detokenize(&t.tokens, vocab)
        };
        writeln!(output, "{text}").map_err(|e| Error::Input(format!("writing output line {}: {e}", i + 1)))?;
        count += 1;
    }
    output.flush().map_err(|e| Error::Input(format!("flushing output: {e}")))?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(row: usize, token: u32, score: f64) -> Candidate {
        Candidate { row, token, score }
    }

    #[test]
    fn max_len_default() {
        assert_eq!(default_max_len(1), 7);
        assert_eq!(default_max_len(47), 99);
        assert_eq!(default_max_len(48), 100);
        assert_eq!(default_max_len(80), 100);
    }

    #[test]
    fn top_k_breaks_ties_by_row_then_token() {
        let got = select_top(
            vec![c(1, 0, -1.0), c(0, 5, -1.0), c(0, 2, -1.0), c(0, 1, -0.5), c(2, 0, -3.0)],
            3,
        );
        assert_eq!(got, vec![c(0, 1, -0.5), c(0, 2, -1.0), c(0, 5, -1.0)]);
        assert!(select_top(vec![c(0, 0, 0.0)], 0).is_empty());
        assert_eq!(select_top(vec![c(0, 0, 0.0)], 4).len(), 1);
    }

    #[test]
    fn translation_drops_eos() {
        let h = Hypothesis {
            tokens: vec![5, 6, EOS],
            log_prob: -3.0,
            state: Array1::<f64>::zeros(1),
            finished: true,
        };
        let t = Translation::from(h);
        assert_eq!(t.tokens, vec![5, 6]);
        assert_eq!(t.score, -1.0);
    }
}
