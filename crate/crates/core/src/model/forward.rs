use ndarray::{s, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};

use super::gru::GruCache;
use super::ModelParams;
use crate::composition::{compose_batch, ComposedBatch};
use crate::data::{EncodedBatch, EncodedSource, BOS};
use crate::error::{Error, Result};
use crate::real::Real;

/// Encoder output for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotations<T> {
    /// One `(batch, 2H)` matrix per source position; zero at padding.
    pub states: Vec<Array2<T>>,
    /// `(batch, positions)`, 1 on real tokens.
    pub mask: Array2<T>,
    /// `states[j]·W_h`, reused at every decoder step.
    pub(crate) projected: Vec<Array2<T>>,
}

impl<T: Real> Annotations<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.mask.nrows()
    }

    /// Annotations of the given batch rows, in order (rows may repeat).
    pub fn select(&self, rows: &[usize]) -> Self {
        Annotations {
            states: self.states.iter().map(|m| m.select(Axis(0), rows)).collect(),
            mask: self.mask.select(Axis(0), rows),
            projected: self.projected.iter().map(|m| m.select(Axis(0), rows)).collect(),
        }
    }
}

/// Result of one attention step.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub context: Array2<T>,
    /// `(batch, positions)`; rows sum to one, zero on padding.
    pub weights: Array2<T>,
    pub s_tilde: Array2<T>,
}

/// Inverted dropout on the readout layer.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut dyn RngCore,
}

/// Mean negative log-likelihood per target token (EOS included).
#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub mean: f64,
    pub tokens: usize,
    /// Mean per-token loss of each sentence in the batch.
    pub per_sentence: Vec<f64>,
}

pub(crate) struct EncoderCache<T> {
    pub forward: Vec<GruCache<T>>,
    pub backward: Vec<GruCache<T>>,
}

pub(crate) struct AttendCache<T> {
    pub pre: GruCache<T>,
    /// `tanh(s̃·W_s + h_j·W_h + b_a)` per source position.
    pub align: Vec<Array2<T>>,
}

pub(crate) struct StepCache<T> {
    pub prev_ids: Vec<u32>,
    pub prev_emb: Array2<T>,
    pub attend: AttendCache<T>,
    pub attention: Attention<T>,
    pub post: GruCache<T>,
    pub state: Array2<T>,
    pub readout: Array2<T>,
    pub drop_mask: Option<Array2<T>>,
    pub dropped: Array2<T>,
    pub probs: Array2<T>,
}

pub(crate) struct ForwardCache<T> {
    pub composed: ComposedBatch<T>,
    pub encoder: EncoderCache<T>,
    pub annotations: Annotations<T>,
    pub mean: Array2<T>,
    pub s0: Array2<T>,
    pub steps: Vec<StepCache<T>>,
}

/// Row-wise softmax over the positions where `mask` is 1.
pub(crate) fn masked_softmax<T: Real>(scores: &Array2<T>, mask: &Array2<T>) -> Result<Array2<T>> {
    let mut out = Array2::zeros(scores.raw_dim());
    for b in 0..scores.nrows() {
        let valid: Vec<usize> = (0..scores.ncols()).filter(|&j| mask[[b, j]] > T::zero()).collect();
        if valid.is_empty() {
            return Err(Error::Input("attention over a row with every position masked".into()));
        }
        let max = valid
            .iter()
            .map(|&j| scores[[b, j]])
            .fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for &j in &valid {
            let e = (scores[[b, j]] - max).exp();
            out[[b, j]] = e;
            sum += e;
        }
        for &j in &valid {
            out[[b, j]] /= sum;
        }
    }
    Ok(out)
}

/// Row-wise softmax and log-softmax of logits.
pub(crate) fn softmax_rows<T: Real>(logits: &Array2<T>) -> (Array2<T>, Array2<T>) {
    let mut probs = logits.clone();
    let mut logp = logits.clone();
    for (mut p, mut lp) in probs.rows_mut().into_iter().zip(logp.rows_mut()) {
        let max = p.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = p.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        lp.mapv_inplace(|v| v - lse);
        p.mapv_inplace(|v| (v - lse).exp());
    }
    (probs, logp)
}

fn check_width(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}: expected width {want}, got {got}")));
    }
    Ok(())
}

impl<T: Real> ModelParams<T> {
    /// Runs the bidirectional encoder. Padding positions carry the previous
    /// state through unchanged and emit zero annotations.
    pub fn encode(&self, composed: &ComposedBatch<T>) -> Result<Annotations<T>> {
        Ok(self.encode_cached(composed)?.0)
    }

    pub(crate) fn encode_cached(
        &self,
        composed: &ComposedBatch<T>,
    ) -> Result<(Annotations<T>, EncoderCache<T>)> {
        check_width("encoder input", composed.width(), self.encoder.forward.input_dim())?;
        let (nb, tx, _) = composed.inputs.dim();
        let h = self.dims.hidden;
        let one = T::one();

        let run = |gru: &super::Gru<T>, order: Vec<usize>| {
            let mut state = Array2::<T>::zeros((nb, h));
            let mut outputs = vec![Array2::<T>::zeros((nb, h)); tx];
            let mut caches: Vec<Option<GruCache<T>>> = (0..tx).map(|_| None).collect();
            for j in order {
                let x = composed.inputs.slice(s![.., j, ..]);
                let (next, cache) = gru.step_cached(x, state.view());
                let m = composed.mask.column(j).insert_axis(Axis(1)).to_owned();
                state = &next * &m + &state * &m.mapv(|v| one - v);
                outputs[j] = &state * &m;
                caches[j] = Some(cache);
            }
            let caches: Vec<GruCache<T>> = caches.into_iter().map(|c| c.expect("every position visited")).collect();
            (outputs, caches)
        };
        let (fwd_out, fwd_cache) = run(&self.encoder.forward, (0..tx).collect());
        let (bwd_out, bwd_cache) = run(&self.encoder.backward, (0..tx).rev().collect());

        let states: Vec<Array2<T>> = fwd_out
            .iter()
            .zip(&bwd_out)
            .map(|(f, b)| ndarray::concatenate(Axis(1), &[f.view(), b.view()]).expect("same batch"))
            .collect();
        let projected = states.iter().map(|st| st.dot(&self.attention.w_annotation)).collect();
        Ok((
            Annotations {
                states,
                mask: composed.mask.clone(),
                projected,
            },
            EncoderCache {
                forward: fwd_cache,
                backward: bwd_cache,
            },
        ))
    }

    /// Mean annotation over real positions, per row.
    pub(crate) fn mean_annotation(&self, ann: &Annotations<T>) -> Array2<T> {
        let mut mean = Array2::zeros((ann.batch(), self.dims.annotation()));
        for st in &ann.states {
            mean += st;
        }
        let lens = ann.mask.sum_axis(Axis(1)).insert_axis(Axis(1));
        mean / &lens.mapv(|l| if l > T::zero() { l } else { T::one() })
    }

    /// `s_0 = tanh(mean(h)·W_init + b_init)`.
    pub fn initial_state(&self, ann: &Annotations<T>) -> Array2<T> {
        self.initial_state_from_mean(&self.mean_annotation(ann))
    }

    fn initial_state_from_mean(&self, mean: &Array2<T>) -> Array2<T> {
        (mean.dot(&self.decoder.init_w) + &self.decoder.init_b).mapv(T::tanh)
    }

    pub fn embed_target(&self, ids: &[u32]) -> Result<Array2<T>> {
        let v = self.dims.target_vocab;
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= v) {
            return Err(Error::OutOfBounds {
                what: "target vocabulary",
                index: bad as usize,
                size: v,
            });
        }
        let rows: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        Ok(self.target_embedding.select(Axis(0), &rows))
    }

    /// One attention step: the pre-attention GRU, alignment scores, weights
    /// and context vector.
    pub fn attend(
        &self,
        s_prev: ArrayView2<T>,
        y_prev: ArrayView2<T>,
        ann: &Annotations<T>,
    ) -> Result<Attention<T>> {
        Ok(self.attend_cached(s_prev, y_prev, ann)?.0)
    }

    pub(crate) fn attend_cached(
        &self,
        s_prev: ArrayView2<T>,
        y_prev: ArrayView2<T>,
        ann: &Annotations<T>,
    ) -> Result<(Attention<T>, AttendCache<T>)> {
        check_width("decoder state", s_prev.ncols(), self.dims.hidden)?;
        check_width("previous word embedding", y_prev.ncols(), self.dims.emb)?;
        if s_prev.nrows() != ann.batch() || y_prev.nrows() != ann.batch() {
            return Err(Error::Shape("attention inputs disagree on batch size".into()));
        }
        let a = &self.attention;
        let (s_tilde, pre) = a.pre_gru.step_cached(y_prev, s_prev);
        let query = s_tilde.dot(&a.w_state) + &a.bias;
        let mut scores = Array2::zeros((ann.batch(), ann.len()));
        let mut align = Vec::with_capacity(ann.len());
        for (j, proj) in ann.projected.iter().enumerate() {
            let t = (&query + proj).mapv(T::tanh);
            scores.column_mut(j).assign(&t.dot(&a.score));
            align.push(t);
        }
        let weights = masked_softmax(&scores, &ann.mask)?;
        let mut context = Array2::zeros((ann.batch(), self.dims.annotation()));
        for (j, st) in ann.states.iter().enumerate() {
            let w = weights.column(j).insert_axis(Axis(1));
            context += &(st * &w);
        }
        Ok((
            Attention {
                context,
                weights,
                s_tilde,
            },
            AttendCache { pre, align },
        ))
    }

    /// Post-attention state update and output logits.
    pub fn decode_step(
        &self,
        s_tilde: ArrayView2<T>,
        context: ArrayView2<T>,
        y_prev: ArrayView2<T>,
    ) -> Result<(Array2<T>, Array2<T>)> {
        check_width("s_tilde", s_tilde.ncols(), self.dims.hidden)?;
        check_width("context", context.ncols(), self.dims.annotation())?;
        check_width("previous word embedding", y_prev.ncols(), self.dims.emb)?;
        let state = self.decoder.post_gru.step(context, s_tilde);
        let readout = self.readout(state.view(), y_prev, context);
        let logits = readout.dot(&self.decoder.output_w) + &self.decoder.output_b;
        Ok((state, logits))
    }

    fn readout(&self, state: ArrayView2<T>, y_prev: ArrayView2<T>, context: ArrayView2<T>) -> Array2<T> {
        let d = &self.decoder;
        (state.dot(&d.readout_state) + y_prev.dot(&d.readout_prev) + context.dot(&d.readout_context)
            + &d.readout_b)
            .mapv(T::tanh)
    }

    /// Teacher-forced loss of a batch.
    pub fn loss(&self, batch: &EncodedBatch, dropout: Option<Dropout<'_>>) -> Result<Loss> {
        Ok(self.forward_cached(batch, dropout)?.0)
    }

    pub(crate) fn forward_cached(
        &self,
        batch: &EncodedBatch,
        mut dropout: Option<Dropout<'_>>,
    ) -> Result<(Loss, ForwardCache<T>)> {
        let composed = compose_batch(self.setting, batch, &self.source)?;
        let (annotations, encoder) = self.encode_cached(&composed)?;
        let mean = self.mean_annotation(&annotations);
        let s0 = self.initial_state_from_mean(&mean);
        let nb = batch.len();
        let ty = batch.target_len();

        let mut state = s0.clone();
        let mut steps = Vec::with_capacity(ty);
        let mut nll = vec![0.0f64; nb];
        for t in 0..ty {
            let prev_ids: Vec<u32> = (0..nb)
                .map(|b| if t == 0 { BOS } else { batch.target[b][t - 1] })
                .collect();
            let prev_emb = self.embed_target(&prev_ids)?;
            let (attention, attend) = self.attend_cached(state.view(), prev_emb.view(), &annotations)?;
            let (next, post) = self
                .decoder
                .post_gru
                .step_cached(attention.context.view(), attention.s_tilde.view());
            let readout = self.readout(next.view(), prev_emb.view(), attention.context.view());
            let (drop_mask, dropped) = match dropout.as_mut() {
                Some(dr) if dr.rate > 0.0 => {
                    let keep = 1.0 - dr.rate;
                    let scale = T::lit(1.0 / keep);
                    let mask = Array2::from_shape_simple_fn(readout.raw_dim(), || {
                        if dr.rng.random::<f64>() < keep {
                            scale
                        } else {
                            T::zero()
                        }
                    });
                    let dropped = &readout * &mask;
                    (Some(mask), dropped)
                }
                _ => (None, readout.clone()),
            };
            let logits = dropped.dot(&self.decoder.output_w) + &self.decoder.output_b;
            let (probs, logp) = softmax_rows(&logits);
            for b in 0..nb {
                if batch.target_mask[b][t] {
                    let y = batch.target[b][t] as usize;
                    if y >= self.dims.target_vocab {
                        return Err(Error::OutOfBounds {
                            what: "target vocabulary",
                            index: y,
                            size: self.dims.target_vocab,
                        });
                    }
                    nll[b] -= logp[[b, y]].as_f64();
                }
            }
            steps.push(StepCache {
                prev_ids,
                prev_emb,
                attend,
                attention,
                post,
                state: next.clone(),
                readout,
                drop_mask,
                dropped,
                probs,
            });
            state = next;
        }
        let tokens = batch.target_tokens();
        let total: f64 = nll.iter().sum();
        let per_sentence = nll
            .iter()
            .zip(&batch.target_lens)
            .map(|(l, &n)| l / n as f64)
            .collect();
        let loss = Loss {
            mean: total / tokens as f64,
            tokens,
            per_sentence,
        };
        Ok((
            loss,
            ForwardCache {
                composed,
                encoder,
                annotations,
                mean,
                s0,
                steps,
            },
        ))
    }

    /// Sum of log-probabilities of `target` (which should end with EOS)
    /// given `source`, under teacher forcing.
    pub fn log_prob(&self, source: &EncodedSource, target: &[u32]) -> Result<f64> {
        if target.is_empty() {
            return Ok(0.0);
        }
        let composed = self.compose_source(source)?;
        let ann = self.encode(&composed)?;
        let mut state = self.initial_state(&ann);
        let mut prev = BOS;
        let mut total = 0.0;
        for &y in target {
            let emb = self.embed_target(&[prev])?;
            let att = self.attend(state.view(), emb.view(), &ann)?;
            let (next, logits) = self.decode_step(att.s_tilde.view(), att.context.view(), emb.view())?;
            let (_, logp) = softmax_rows(&logits);
            total += logp[[0, y as usize]].as_f64();
            state = next;
            prev = y;
        }
        Ok(total)
    }

    /// Composed inputs of a single source sentence (a batch of one).
    pub fn compose_source(&self, source: &EncodedSource) -> Result<ComposedBatch<T>> {
        let batch = EncodedBatch::new(std::slice::from_ref(source), &[Vec::new()])?;
        compose_batch(self.setting, &batch, &self.source)
    }

    /// Output distribution rows for the given logits.
    pub fn probabilities(logits: &Array2<T>) -> Array2<T> {
        softmax_rows(logits).0
    }

    pub fn log_probabilities(logits: &Array2<T>) -> Array2<T> {
        softmax_rows(logits).1
    }
}
