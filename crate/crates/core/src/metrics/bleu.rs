use std::collections::BTreeMap;

use super::{check_aligned, lowercase, max_ref_counts, ngram_counts, Direction, MetricScore, ReferenceSet, Sentence};
use crate::error::{Error, Result};

/// Corpus n-gram statistics behind BLEU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    /// Clipped matches per order, index 0 is unigrams.
    pub matches: Vec<u64>,
    /// Hypothesis n-grams per order.
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    /// Sum over lines of the reference length closest to the hypothesis.
    pub ref_len: u64,
}

impl BleuStats {
    /// Clipped precision of order `n`. An order with no hypothesis n-grams
    /// at all (every line shorter than `n`) has nothing wrong in it and
    /// counts as 1; brevity is left to the brevity penalty.
    pub fn precision(&self, n: usize) -> f64 {
        let i = n - 1;
        if self.totals[i] == 0 {
            1.0
        } else {
            self.matches[i] as f64 / self.totals[i] as f64
        }
    }

    /// `exp(min(0, 1 - r/c))`. With no hypothesis words it is zero, or
    /// one if the references are empty too.
    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            return if self.ref_len == 0 { 1.0 } else { 0.0 };
        }
        (1.0 - self.ref_len as f64 / self.hyp_len as f64).min(0.0).exp()
    }

    /// Cumulative BLEU-k: brevity penalty times the geometric mean of the
    /// precisions of orders `1..=k`.
    pub fn cumulative(&self, k: usize) -> f64 {
        let mut log_sum = 0.0;
        for n in 1..=k {
            let p = self.precision(n);
            if p == 0.0 {
                return 0.0;
            }
            log_sum += p.ln();
        }
        self.brevity_penalty() * (log_sum / k as f64).exp()
    }
}

/// Length of the reference closest to `hyp_len`; ties go to the shorter one.
fn closest_ref_len(hyp_len: usize, refs: &[Sentence]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

pub fn bleu_stats(hyps: &[Sentence], refs: &ReferenceSet, max_n: usize) -> Result<BleuStats> {
    check_aligned(hyps, refs)?;
    if max_n == 0 {
        return Err(Error::Input("BLEU order must be at least 1".into()));
    }
    let mut stats = BleuStats {
        matches: vec![0; max_n],
        totals: vec![0; max_n],
        hyp_len: 0,
        ref_len: 0,
    };
    for (h, rs) in hyps.iter().zip(refs.lines()) {
        stats.hyp_len += h.len() as u64;
        stats.ref_len += closest_ref_len(h.len(), rs) as u64;
        for n in 1..=max_n {
            let max_ref = max_ref_counts(rs, n);
            for (g, c) in ngram_counts(h, n) {
                stats.totals[n - 1] += c as u64;
                stats.matches[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0)) as u64;
            }
        }
    }
    Ok(stats)
}

/// Cumulative corpus BLEU for orders `1..=max_n`; the value is BLEU-`max_n`.
pub fn bleu(hyps: &[Sentence], refs: &ReferenceSet, max_n: usize, case_insensitive: bool) -> Result<MetricScore> {
    let stats = if case_insensitive {
        bleu_stats(&lowercase(hyps), &refs.lowercase(), max_n)?
    } else {
        bleu_stats(hyps, refs, max_n)?
    };
    let breakdown: Vec<f64> = (1..=max_n).map(|k| stats.cumulative(k)).collect();
    let mut extras = BTreeMap::new();
    extras.insert("brevity_penalty".into(), stats.brevity_penalty());
    extras.insert("hyp_len".into(), stats.hyp_len as f64);
    extras.insert("ref_len".into(), stats.ref_len as f64);
    for n in 1..=max_n {
        extras.insert(format!("precision_{n}"), stats.precision(n));
    }
    Ok(MetricScore {
        name: "BLEU".into(),
        value: breakdown[max_n - 1],
        breakdown,
        reference_count: refs.reference_count(),
        direction: Direction::HigherBetter,
        per_reference: Vec::new(),
        extras,
    })
}
