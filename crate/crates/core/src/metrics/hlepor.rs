use std::collections::BTreeMap;

use serde::Serialize;

use super::{check_aligned, mean, per_reference_means, Direction, MetricScore, ReferenceSet, Sentence};
use crate::error::{Error, Result};

/// Weights of hLEPOR. The defaults are the metric's published defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HleporParams {
    /// Weight on recall inside the precision/recall harmonic mean.
    pub alpha: f64,
    /// Weight on precision.
    pub beta: f64,
    /// Words on each side compared when a word has several candidates.
    pub context: usize,
    pub w_length: f64,
    pub w_position: f64,
    pub w_precision_recall: f64,
}

impl Default for HleporParams {
    fn default() -> Self {
        HleporParams {
            alpha: 9.0,
            beta: 1.0,
            context: 2,
            w_length: 2.0,
            w_position: 1.0,
            w_precision_recall: 7.0,
        }
    }
}

impl HleporParams {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.alpha, self.beta, self.w_length, self.w_position, self.w_precision_recall];
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Input("hLEPOR weights must be positive and finite".into()));
        }
        Ok(())
    }
}

fn context_matches(hyp: &[String], reference: &[String], i: usize, j: usize, n: usize) -> usize {
    let mut hits = 0;
    for k in 1..=n {
        if i >= k && j >= k && hyp[i - k] == reference[j - k] {
            hits += 1;
        }
        if i + k < hyp.len() && j + k < reference.len() && hyp[i + k] == reference[j + k] {
            hits += 1;
        }
    }
    hits
}

/// Word alignment: each hypothesis word, left to right, takes an unused
/// reference position holding the same word. With several candidates the
/// one with the most matching neighbours wins, then the one closest in
/// relative position, then the leftmost.
pub fn align(hyp: &[String], reference: &[String], context: usize) -> Vec<Option<usize>> {
    let mut used = vec![false; reference.len()];
    let (lh, lr) = (hyp.len() as f64, reference.len() as f64);
    let mut out = Vec::with_capacity(hyp.len());
    for (i, w) in hyp.iter().enumerate() {
        let rel = (i + 1) as f64 / lh;
        let best = (0..reference.len())
            .filter(|&j| !used[j] && &reference[j] == w)
            .min_by(|&a, &b| {
                let ca = context_matches(hyp, reference, i, a, context);
                let cb = context_matches(hyp, reference, i, b, context);
                let da = (rel - (a + 1) as f64 / lr).abs();
                let db = (rel - (b + 1) as f64 / lr).abs();
                cb.cmp(&ca).then(da.total_cmp(&db)).then(a.cmp(&b))
            });
        if let Some(j) = best {
            used[j] = true;
        }
        out.push(best);
    }
    out
}

/// hLEPOR of one hypothesis against one reference.
pub fn sentence_hlepor(hyp: &[String], reference: &[String], p: &HleporParams) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return if hyp.is_empty() && reference.is_empty() { 1.0 } else { 0.0 };
    }
    let (c, r) = (hyp.len() as f64, reference.len() as f64);
    let length = if c < r {
        (1.0 - r / c).exp()
    } else if c > r {
        (1.0 - c / r).exp()
    } else {
        1.0
    };
    let alignment = align(hyp, reference, p.context);
    let mut matched = 0usize;
    let mut distance = 0.0;
    for (i, j) in alignment.iter().enumerate() {
        if let Some(j) = j {
            matched += 1;
            distance += ((i + 1) as f64 / c - (j + 1) as f64 / r).abs();
        }
    }
    if matched == 0 {
        return 0.0;
    }
    let position = (-distance / c).exp();
    let precision = matched as f64 / c;
    let recall = matched as f64 / r;
    let pr = (p.alpha + p.beta) / (p.alpha / recall + p.beta / precision);
    (p.w_length + p.w_position + p.w_precision_recall)
        / (p.w_length / length + p.w_position / position + p.w_precision_recall / pr)
}

/// Corpus hLEPOR: mean sentence score against each reference index,
/// averaged over reference indices.
pub fn hlepor(hyps: &[Sentence], refs: &ReferenceSet, params: &HleporParams) -> Result<MetricScore> {
    check_aligned(hyps, refs)?;
    params.validate()?;
    let per_reference = per_reference_means(hyps, refs, |h, r| sentence_hlepor(h, r, params));
    Ok(MetricScore {
        name: "hLEPOR".into(),
        value: mean(&per_reference),
        breakdown: Vec::new(),
        reference_count: refs.reference_count(),
        direction: Direction::HigherBetter,
        per_reference,
        extras: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;

    #[test]
    fn swapped_pair() {
        // NPD = (|1/2 - 1| + |1 - 1/2|) / 2 = 1/2
        let s = sentence_hlepor(&tokenize("b a"), &tokenize("a b"), &HleporParams::default());
        let want = 10.0 / (9.0 + 0.5f64.exp());
        assert!((s - want).abs() < 1e-15);
        assert!((s - 0.93908).abs() < 1e-5);
    }

    #[test]
    fn identical_and_disjoint() {
        let p = HleporParams::default();
        let s = tokenize("a b c a");
        assert_eq!(sentence_hlepor(&s, &s, &p), 1.0);
        assert_eq!(sentence_hlepor(&tokenize("x y"), &tokenize("a b"), &p), 0.0);
    }

    #[test]
    fn context_picks_the_right_duplicate() {
        let a = align(&tokenize("x the cat"), &tokenize("the dog x the cat"), 2);
        assert_eq!(a, vec![Some(2), Some(3), Some(4)]);
    }

    #[test]
    fn reference_words_are_used_once() {
        let a = align(&tokenize("a a a"), &tokenize("a b"), 2);
        assert_eq!(a.iter().filter(|j| j.is_some()).count(), 1);
    }

    #[test]
    fn length_penalty_is_symmetric_in_form() {
        let p = HleporParams::default();
        let short = sentence_hlepor(&tokenize("a"), &tokenize("a b"), &p);
        let lp = (1.0f64 - 2.0).exp();
        let pr = 10.0 / (9.0 / 0.5 + 1.0);
        // the single word sits at 1/1 in the hypothesis and 1/2 in the reference
        let want = 10.0 / (2.0 / lp + 1.0 / (-0.5f64).exp() + 7.0 / pr);
        assert!((short - want).abs() < 1e-15);
    }

    #[test]
    fn bad_weights_rejected() {
        let p = HleporParams { alpha: 0.0, ..Default::default() };
        let c = vec![tokenize("a")];
        assert!(hlepor(&c, &ReferenceSet::single(c.clone()), &p).is_err());
    }
}
