//! Straight-line scalar recomputation of the model, one sentence at a
//! time, written independently of the batched implementation, and a
//! brute-force corpus BLEU.

use radical_nmt::data::{EncodedSource, BOS};
use radical_nmt::model::Gru;
use radical_nmt::metrics::Sentence;
use radical_nmt::ModelParams;
use ndarray::{Array1, Array2};

fn vec_mat(x: &[f64], w: &Array2<f64>) -> Vec<f64> {
    assert_eq!(x.len(), w.nrows());
    (0..w.ncols())
        .map(|k| (0..x.len()).map(|i| x[i] * w[[i, k]]).sum())
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn add_bias(a: &[f64], b: &Array1<f64>) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gru_step(g: &Gru<f64>, x: &[f64], h: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = add_bias(&add(&vec_mat(x, &g.w_r), &vec_mat(h, &g.u_r)), &g.b_r)
        .into_iter()
        .map(sig)
        .collect();
    let u: Vec<f64> = add_bias(&add(&vec_mat(x, &g.w_u), &vec_mat(h, &g.u_u)), &g.b_u)
        .into_iter()
        .map(sig)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let c: Vec<f64> = add_bias(&add(&vec_mat(x, &g.w_c), &vec_mat(&rh, &g.u_c)), &g.b_c)
        .into_iter()
        .map(f64::tanh)
        .collect();
    (0..h.len()).map(|i| (1.0 - u[i]) * h[i] + u[i] * c[i]).collect()
}

pub fn compose(p: &ModelParams<f64>, src: &EncodedSource, j: usize) -> Vec<f64> {
    let d = p.dims.emb;
    let mut out = Vec::new();
    if p.setting.uses_word() {
        out.extend((0..d).map(|k| p.source.word[[src.words[j] as usize, k]]));
    }
    if p.setting.uses_char() {
        out.extend((0..d).map(|k| {
            src.chars[j].iter().map(|&c| p.source.character[[c as usize, k]]).sum::<f64>()
        }));
    }
    if p.setting.uses_radical() {
        out.extend((0..d).map(|k| {
            src.radicals[j].iter().map(|&r| p.source.radical[[r as usize, k]]).sum::<f64>()
        }));
    }
    out
}

/// Annotations `[forward; backward]` per source position.
pub fn encode(p: &ModelParams<f64>, src: &EncodedSource) -> Vec<Vec<f64>> {
    let n = src.words.len();
    let h = p.dims.hidden;
    let xs: Vec<Vec<f64>> = (0..n).map(|j| compose(p, src, j)).collect();
    let mut fwd = vec![vec![0.0; h]; n];
    let mut state = vec![0.0; h];
    for j in 0..n {
        state = gru_step(&p.encoder.forward, &xs[j], &state);
        fwd[j] = state.clone();
    }
    let mut bwd = vec![vec![0.0; h]; n];
    let mut state = vec![0.0; h];
    for j in (0..n).rev() {
        state = gru_step(&p.encoder.backward, &xs[j], &state);
        bwd[j] = state.clone();
    }
    (0..n).map(|j| [fwd[j].clone(), bwd[j].clone()].concat()).collect()
}

pub fn initial_state(p: &ModelParams<f64>, ann: &[Vec<f64>]) -> Vec<f64> {
    let width = ann[0].len();
    let mean: Vec<f64> = (0..width)
        .map(|k| ann.iter().map(|a| a[k]).sum::<f64>() / ann.len() as f64)
        .collect();
    add_bias(&vec_mat(&mean, &p.decoder.init_w), &p.decoder.init_b)
        .into_iter()
        .map(f64::tanh)
        .collect()
}

pub fn embedding(p: &ModelParams<f64>, id: u32) -> Vec<f64> {
    p.target_embedding.row(id as usize).to_vec()
}

/// Returns `(context, weights, s_tilde)`.
pub fn attend(
    p: &ModelParams<f64>,
    s_prev: &[f64],
    y_prev: &[f64],
    ann: &[Vec<f64>],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let a = &p.attention;
    let s_tilde = gru_step(&a.pre_gru, y_prev, s_prev);
    let q = vec_mat(&s_tilde, &a.w_state);
    let scores: Vec<f64> = ann
        .iter()
        .map(|h| {
            let k = vec_mat(h, &a.w_annotation);
            (0..q.len())
                .map(|i| a.score[i] * (q[i] + k[i] + a.bias[i]).tanh())
                .sum()
        })
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|e| (e - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let alpha: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let ctx: Vec<f64> = (0..ann[0].len())
        .map(|k| ann.iter().zip(&alpha).map(|(h, w)| w * h[k]).sum())
        .collect();
    (ctx, alpha, s_tilde)
}

/// Returns `(s_t, logits)`.
pub fn decode_step(
    p: &ModelParams<f64>,
    s_tilde: &[f64],
    ctx: &[f64],
    y_prev: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let d = &p.decoder;
    let s = gru_step(&d.post_gru, ctx, s_tilde);
    let pre = add(
        &add(&vec_mat(&s, &d.readout_state), &vec_mat(y_prev, &d.readout_prev)),
        &vec_mat(ctx, &d.readout_context),
    );
    let r: Vec<f64> = add_bias(&pre, &d.readout_b).into_iter().map(f64::tanh).collect();
    let logits = add_bias(&vec_mat(&r, &d.output_w), &d.output_b);
    (s, logits)
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Sum of `-log p(y_t)` over `target` (which should end in EOS).
pub fn sentence_nll(p: &ModelParams<f64>, src: &EncodedSource, target: &[u32]) -> f64 {
    let ann = encode(p, src);
    let mut s = initial_state(p, &ann);
    let mut prev = BOS;
    let mut nll = 0.0;
    for &y in target {
        let e = embedding(p, prev);
        let (ctx, _, st) = attend(p, &s, &e, &ann);
        let (next, logits) = decode_step(p, &st, &ctx, &e);
        nll -= log_softmax(&logits)[y as usize];
        s = next;
        prev = y;
    }
    nll
}

/// Brute-force corpus BLEU: n-grams are counted by scanning, without maps.
pub fn bleu(hyps: &[Sentence], refs: &[Vec<Sentence>], max_n: usize) -> Vec<f64> {
    fn count(s: &[String], g: &[String]) -> usize {
        if s.len() < g.len() {
            return 0;
        }
        (0..=s.len() - g.len()).filter(|&i| &s[i..i + g.len()] == g).count()
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rs) in hyps.iter().zip(refs) {
        c += h.len();
        let mut best = usize::MAX;
        for x in rs {
            let d = x.len().abs_diff(h.len());
            let b = best.abs_diff(h.len());
            if best == usize::MAX || d < b || (d == b && x.len() < best) {
                best = x.len();
            }
        }
        r += best;
        for n in 1..=max_n {
            if h.len() < n {
                continue;
            }
            for i in 0..=h.len() - n {
                let g = &h[i..i + n];
                totals[n - 1] += 1;
                // credit this occurrence only if it is within the clip
                let seen_before = (0..i).filter(|&k| &h[k..k + n] == g).count();
                let clip = rs.iter().map(|x| count(x, g)).max().unwrap();
                if seen_before < clip {
                    matches[n - 1] += 1;
                }
            }
        }
    }
    let bp = if c == 0 {
        if r == 0 { 1.0 } else { 0.0 }
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    (1..=max_n)
        .map(|k| {
            let mut logs = 0.0;
            for n in 0..k {
                let p = if totals[n] == 0 { 1.0 } else { matches[n] as f64 / totals[n] as f64 };
                if p == 0.0 {
                    return 0.0;
                }
                logs += p.ln();
            }
            bp * (logs / k as f64).exp()
        })
        .collect()
}
