use std::collections::BTreeMap;

use super::{check_aligned, mean, per_reference_means, Direction, MetricScore, ReferenceSet, Sentence};
use crate::error::Result;

/// Longest phrase considered for a shift.
const MAX_SHIFT_PHRASE: usize = 10;
/// Largest distance, in words, a phrase may move.
const MAX_SHIFT_DISTANCE: usize = 50;

/// Levenshtein distance with unit costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn moved(words: &[String], start: usize, len: usize, to: usize) -> Vec<String> {
    let mut rest: Vec<String> = words[..start].iter().chain(&words[start + len..]).cloned().collect();
    let phrase = words[start..start + len].to_vec();
    rest.splice(to..to, phrase);
    rest
}

/// Greedily moves hypothesis phrases that also occur in the reference to
/// the reference position of that occurrence, taking at each round the
/// move that lowers the word-level edit distance the most, until no move
/// lowers it. Returns the shifted words and the number of moves.
pub fn shift_words(hyp: &[String], reference: &[String]) -> (Vec<String>, usize) {
    let mut words = hyp.to_vec();
    let mut distance = levenshtein(&words, reference);
    let mut shifts = 0;
    loop {
        let mut best: Option<(usize, Vec<String>)> = None;
        let n = words.len();
        for len in 1..=MAX_SHIFT_PHRASE.min(n) {
            for start in 0..=n - len {
                let phrase = &words[start..start + len];
                if reference.get(start..start + len) == Some(phrase) {
                    continue;
                }
                for (j, w) in reference.windows(len).enumerate() {
                    if w != phrase {
                        continue;
                    }
                    let to = j.min(n - len);
                    if to == start || to.abs_diff(start) > MAX_SHIFT_DISTANCE {
                        continue;
                    }
                    let candidate = moved(&words, start, len, to);
                    let d = levenshtein(&candidate, reference);
                    if d < distance && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, candidate));
                    }
                }
            }
        }
        match best {
            Some((d, w)) => {
                distance = d;
                words = w;
                shifts += 1;
            }
            None => return (words, shifts),
        }
    }
}

/// CharacTER of one hypothesis against one reference: shift cost plus the
/// character edit distance of the shifted, space-joined hypothesis,
/// divided by the hypothesis length in characters. Not capped at 1.
/// An empty hypothesis scores 1 against a non-empty reference.
pub fn sentence_character(hyp: &[String], reference: &[String]) -> f64 {
    if hyp.is_empty() {
        return if reference.is_empty() { 0.0 } else { 1.0 };
    }
    let (shifted, shifts) = shift_words(hyp, reference);
    let h: Vec<char> = shifted.join(" ").chars().collect();
    let r: Vec<char> = reference.join(" ").chars().collect();
    (levenshtein(&h, &r) + shifts) as f64 / h.len() as f64
}

/// Corpus CharacTER: the mean sentence score against each reference index,
/// averaged over reference indices. The `sentence_min` extra instead takes
/// the best reference per sentence before averaging.
pub fn character_score(hyps: &[Sentence], refs: &ReferenceSet) -> Result<MetricScore> {
    check_aligned(hyps, refs)?;
    let per_reference = per_reference_means(hyps, refs, sentence_character);
    let best: Vec<f64> = hyps
        .iter()
        .zip(refs.lines())
        .map(|(h, rs)| rs.iter().map(|r| sentence_character(h, r)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut extras = BTreeMap::new();
    extras.insert("sentence_min".into(), mean(&best));
    Ok(MetricScore {
        name: "CharacTER".into(),
        value: mean(&per_reference),
        breakdown: Vec::new(),
        reference_count: refs.reference_count(),
        direction: Direction::LowerBetter,
        per_reference,
        extras,
    })
}
