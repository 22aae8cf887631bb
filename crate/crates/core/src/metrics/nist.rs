use std::collections::{BTreeMap, HashMap};

use super::{check_aligned, max_ref_counts, ngram_counts, Direction, MetricScore, ReferenceSet, Sentence};
use crate::error::{Error, Result};

/// Makes the brevity factor 0.5 when the hypothesis is 2/3 of the
/// reference length.
pub fn nist_beta() -> f64 {
    -0.5f64.ln() / (1.5f64.ln() * 1.5f64.ln())
}

/// `exp(-β · ln²(min(c / r, 1)))`.
pub fn nist_brevity_penalty(hyp_len: f64, ref_len: f64) -> f64 {
    if hyp_len <= 0.0 || ref_len <= 0.0 {
        return if hyp_len <= 0.0 { 0.0 } else { 1.0 };
    }
    let ratio = (hyp_len / ref_len).min(1.0);
    (-nist_beta() * ratio.ln() * ratio.ln()).exp()
}

/// Information weights of every reference n-gram up to order `max_n`:
/// `log2(count(w1..w{n-1}) / count(w1..wn))`, with the total number of
/// reference words standing in for the empty prefix.
fn info_weights(refs: &ReferenceSet, max_n: usize) -> HashMap<&[String], f64> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    let mut words = 0;
    for r in refs.lines().iter().flatten() {
        words += r.len();
        for n in 1..=max_n {
            for (g, c) in ngram_counts(r, n) {
                *counts.entry(g).or_insert(0) += c;
            }
        }
    }
    counts
        .iter()
        .map(|(&g, &c)| {
            let prefix = if g.len() == 1 { words } else { counts[&g[..g.len() - 1]] };
            (g, (prefix as f64 / c as f64).log2())
        })
        .collect()
}

/// Cumulative NIST scores for orders `1..=max_n`; the value is NIST-`max_n`.
pub fn nist(hyps: &[Sentence], refs: &ReferenceSet, max_n: usize) -> Result<MetricScore> {
    check_aligned(hyps, refs)?;
    if max_n == 0 {
        return Err(Error::Input("NIST order must be at least 1".into()));
    }
    let info = info_weights(refs, max_n);
    let mut matched_info = vec![0.0; max_n];
    let mut totals = vec![0u64; max_n];
    let mut hyp_len = 0.0;
    let mut ref_len = 0.0;
    for (h, rs) in hyps.iter().zip(refs.lines()) {
        hyp_len += h.len() as f64;
        ref_len += rs.iter().map(|r| r.len() as f64).sum::<f64>() / rs.len() as f64;
        for n in 1..=max_n {
            let max_ref = max_ref_counts(rs, n);
            for (g, c) in ngram_counts(h, n) {
                totals[n - 1] += c as u64;
                let m = c.min(max_ref.get(g).copied().unwrap_or(0));
                if m > 0 {
                    matched_info[n - 1] += m as f64 * info[g];
                }
            }
        }
    }
    let bp = nist_brevity_penalty(hyp_len, ref_len);
    let mut cumulative = 0.0;
    let mut breakdown = Vec::with_capacity(max_n);
    for n in 0..max_n {
        if totals[n] > 0 {
            cumulative += matched_info[n] / totals[n] as f64;
        }
        breakdown.push(cumulative * bp);
    }
    let mut extras = BTreeMap::new();
    extras.insert("brevity_penalty".into(), bp);
    extras.insert("hyp_len".into(), hyp_len);
    extras.insert("ref_len".into(), ref_len);
    Ok(MetricScore {
        name: "NIST".into(),
        value: breakdown[max_n - 1],
        breakdown,
        reference_count: refs.reference_count(),
        direction: Direction::HigherBetter,
        per_reference: Vec::new(),
        extras,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;

    fn corpus(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    #[test]
    fn beta_halves_at_two_thirds() {
        assert!((nist_brevity_penalty(2.0, 3.0) - 0.5).abs() < 1e-15);
        assert_eq!(nist_brevity_penalty(5.0, 3.0), 1.0);
    }

    #[test]
    fn two_token_identity() {
        // info(a) = info(b) = log2(2/1) = 1; info(a b) = log2(1/1) = 0
        let c = corpus(&["a b"]);
        let s = nist(&c, &ReferenceSet::single(c.clone()), 2).unwrap();
        assert_eq!(s.breakdown, vec![1.0, 1.0]);
    }

    #[test]
    fn repeated_words_carry_less_information() {
        // ref words: x x y (3). info(x) = log2(3/2), info(y) = log2(3)
        let refs = ReferenceSet::single(corpus(&["x x y"]));
        let s = nist(&corpus(&["x y z"]), &refs, 1).unwrap();
        let want = ((1.5f64).log2() + 3f64.log2()) / 3.0;
        assert!((s.value - want).abs() < 1e-15);
    }

    #[test]
    fn no_matches_scores_zero() {
        let refs = ReferenceSet::single(corpus(&["a b c"]));
        let s = nist(&corpus(&["d e f"]), &refs, 5).unwrap();
        assert!(s.breakdown.iter().all(|&v| v == 0.0));
    }
}
