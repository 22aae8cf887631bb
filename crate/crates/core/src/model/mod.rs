//! Attention-based encoder-decoder.
//!
//! The encoder is a bidirectional GRU over composed source inputs; each
//! annotation `h_j` is the forward state concatenated with the backward
//! state. The decoder is a two-stage conditional GRU:
//!
//! ```text
//! s̃_{t-1} = GRU_pre(s_{t-1}, E[y_{t-1}])
//! e_tj    = v_aᵀ tanh(s̃_{t-1}·W_s + h_j·W_h + b_a)
//! α_t     = softmax(e_t)             (padding positions excluded)
//! c_t     = Σ_j α_tj h_j
//! s_t     = GRU_post(s̃_{t-1}, c_t)
//! p(y_t)  = softmax(tanh(s_t·U + E[y_{t-1}]·V + c_t·C + b)·W_o + b_o)
//! ```
//!
//! with `s_0 = tanh(mean_j(h_j)·W_init + b_init)`. Dropout, when enabled,
//! applies to the `tanh` readout only.

mod adadelta;
mod backward;
mod checkpoint;
mod forward;
mod gru;
mod init;

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adadelta::{clip_global_norm, Adadelta};
pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, read_checkpoint, save_checkpoint,
    write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use forward::{Annotations, Attention, Dropout, Loss};
pub use gru::Gru;

use crate::composition::{input_dim, CompositionSetting, EmbeddingTables};
use crate::real::Real;
use init::uniform;

/// Widths and vocabulary sizes of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Width of every embedding part (and of the readout layer).
    pub emb: usize,
    /// GRU state width.
    pub hidden: usize,
    pub word_vocab: usize,
    pub char_vocab: usize,
    pub radical_vocab: usize,
    pub target_vocab: usize,
}

impl ModelDims {
    pub fn input(&self, setting: CompositionSetting) -> usize {
        input_dim(setting, self.emb)
    }

    pub fn annotation(&self) -> usize {
        2 * self.hidden
    }

    pub fn alignment(&self) -> usize {
        self.hidden
    }

    pub fn readout(&self) -> usize {
        self.emb
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub forward: Gru<T>,
    pub backward: Gru<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    /// Produces `s̃_{t-1}` from the previous state and previous word.
    pub pre_gru: Gru<T>,
    pub w_state: Array2<T>,
    pub w_annotation: Array2<T>,
    pub bias: Array1<T>,
    pub score: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams<T> {
    /// Produces `s_t` from `s̃_{t-1}` and the context.
    pub post_gru: Gru<T>,
    pub init_w: Array2<T>,
    pub init_b: Array1<T>,
    pub readout_state: Array2<T>,
    pub readout_prev: Array2<T>,
    pub readout_context: Array2<T>,
    pub readout_b: Array1<T>,
    pub output_w: Array2<T>,
    pub output_b: Array1<T>,
}

/// Every trainable tensor of a model. Gradients and optimizer
/// accumulators use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub setting: CompositionSetting,
    pub dims: ModelDims,
    pub source: EmbeddingTables<T>,
    pub target_embedding: Array2<T>,
    pub encoder: EncoderParams<T>,
    pub attention: AttentionParams<T>,
    pub decoder: DecoderParams<T>,
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(setting: CompositionSetting, dims: ModelDims) -> Self {
        let (d, h, a, r) = (dims.emb, dims.hidden, dims.alignment(), dims.readout());
        let input = dims.input(setting);
        ModelParams {
            setting,
            dims,
            source: EmbeddingTables::zeros((dims.word_vocab, dims.char_vocab, dims.radical_vocab), d),
            target_embedding: Array2::zeros((dims.target_vocab, d)),
            encoder: EncoderParams {
                forward: Gru::zeros(input, h),
                backward: Gru::zeros(input, h),
            },
            attention: AttentionParams {
                pre_gru: Gru::zeros(d, h),
                w_state: Array2::zeros((h, a)),
                w_annotation: Array2::zeros((2 * h, a)),
                bias: Array1::zeros(a),
                score: Array1::zeros(a),
            },
            decoder: DecoderParams {
                post_gru: Gru::zeros(2 * h, h),
                init_w: Array2::zeros((2 * h, h)),
                init_b: Array1::zeros(h),
                readout_state: Array2::zeros((h, r)),
                readout_prev: Array2::zeros((d, r)),
                readout_context: Array2::zeros((2 * h, r)),
                readout_b: Array1::zeros(r),
                output_w: Array2::zeros((r, dims.target_vocab)),
                output_b: Array1::zeros(dims.target_vocab),
            },
        }
    }

    /// Seeded initialization: recurrent matrices orthogonal, other
    /// matrices and embeddings uniform in [-0.08, 0.08], biases zero.
    pub fn init(setting: CompositionSetting, dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h, a, r) = (dims.emb, dims.hidden, dims.alignment(), dims.readout());
        let input = dims.input(setting);
        let mut p = Self::zeros(setting, dims);
        p.source = EmbeddingTables::uniform(
            (dims.word_vocab, dims.char_vocab, dims.radical_vocab),
            d,
            &mut rng,
        );
        p.target_embedding = uniform(dims.target_vocab, d, &mut rng);
        p.encoder.forward = Gru::init(input, h, &mut rng);
        p.encoder.backward = Gru::init(input, h, &mut rng);
        p.attention.pre_gru = Gru::init(d, h, &mut rng);
        p.attention.w_state = uniform(h, a, &mut rng);
        p.attention.w_annotation = uniform(2 * h, a, &mut rng);
        p.attention.score = uniform(1, a, &mut rng).row(0).to_owned();
        p.decoder.post_gru = Gru::init(2 * h, h, &mut rng);
        p.decoder.init_w = uniform(2 * h, h, &mut rng);
        p.decoder.readout_state = uniform(h, r, &mut rng);
        p.decoder.readout_prev = uniform(d, r, &mut rng);
        p.decoder.readout_context = uniform(2 * h, r, &mut rng);
        p.decoder.output_w = uniform(r, dims.target_vocab, &mut rng);
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.setting, self.dims)
    }

    /// Named views of every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        let mut out = Vec::new();
        out.push(("source.word".to_string(), self.source.word.view().into_dyn()));
        out.push(("source.char".to_string(), self.source.character.view().into_dyn()));
        out.push(("source.radical".to_string(), self.source.radical.view().into_dyn()));
        out.push(("target.embedding".to_string(), self.target_embedding.view().into_dyn()));
        self.encoder.forward.tensors("encoder.forward", &mut out);
        self.encoder.backward.tensors("encoder.backward", &mut out);
        self.attention.pre_gru.tensors("attention.pre_gru", &mut out);
        let a = &self.attention;
        out.push(("attention.w_state".to_string(), a.w_state.view().into_dyn()));
        out.push(("attention.w_annotation".to_string(), a.w_annotation.view().into_dyn()));
        out.push(("attention.bias".to_string(), a.bias.view().into_dyn()));
        out.push(("attention.score".to_string(), a.score.view().into_dyn()));
        self.decoder.post_gru.tensors("decoder.post_gru", &mut out);
        let d = &self.decoder;
        for (name, m) in [
            ("decoder.init_w", &d.init_w),
            ("decoder.readout_state", &d.readout_state),
            ("decoder.readout_prev", &d.readout_prev),
            ("decoder.readout_context", &d.readout_context),
            ("decoder.output_w", &d.output_w),
        ] {
            out.push((name.to_string(), m.view().into_dyn()));
        }
        for (name, b) in [
            ("decoder.init_b", &d.init_b),
            ("decoder.readout_b", &d.readout_b),
            ("decoder.output_b", &d.output_b),
        ] {
            out.push((name.to_string(), b.view().into_dyn()));
        }
        out
    }

    /// Mutable views in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        let mut out = Vec::new();
        out.push(("source.word".to_string(), self.source.word.view_mut().into_dyn()));
        out.push(("source.char".to_string(), self.source.character.view_mut().into_dyn()));
        out.push(("source.radical".to_string(), self.source.radical.view_mut().into_dyn()));
        out.push(("target.embedding".to_string(), self.target_embedding.view_mut().into_dyn()));
        self.encoder.forward.tensors_mut("encoder.forward", &mut out);
        self.encoder.backward.tensors_mut("encoder.backward", &mut out);
        let AttentionParams {
            pre_gru,
            w_state,
            w_annotation,
            bias,
            score,
        } = &mut self.attention;
        pre_gru.tensors_mut("attention.pre_gru", &mut out);
        out.push(("attention.w_state".to_string(), w_state.view_mut().into_dyn()));
        out.push(("attention.w_annotation".to_string(), w_annotation.view_mut().into_dyn()));
        out.push(("attention.bias".to_string(), bias.view_mut().into_dyn()));
        out.push(("attention.score".to_string(), score.view_mut().into_dyn()));
        let d = &mut self.decoder;
        d.post_gru.tensors_mut("decoder.post_gru", &mut out);
        for (name, m) in [
            ("decoder.init_w", &mut d.init_w),
            ("decoder.readout_state", &mut d.readout_state),
            ("decoder.readout_prev", &mut d.readout_prev),
            ("decoder.readout_context", &mut d.readout_context),
            ("decoder.output_w", &mut d.output_w),
        ] {
            out.push((name.to_string(), m.view_mut().into_dyn()));
        }
        for (name, b) in [
            ("decoder.init_b", &mut d.init_b),
            ("decoder.readout_b", &mut d.readout_b),
            ("decoder.output_b", &mut d.output_b),
        ] {
            out.push((name.to_string(), b.view_mut().into_dyn()));
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Converts every tensor to another element type.
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(self.setting, self.dims);
        for ((_, src), (_, mut dst)) in self.tensors().into_iter().zip(out.tensors_mut()) {
            dst.zip_mut_with(&src, |d, &s| *d = U::lit(s.as_f64()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn micro_dims() -> ModelDims {
        ModelDims {
            emb: 8,
            hidden: 12,
            word_vocab: 15,
            char_vocab: 18,
            radical_vocab: 16,
            target_vocab: 20,
        }
    }

    #[test]
    fn tensor_order_is_stable() {
        let p = ModelParams::<f32>::init(CompositionSetting::WCR, micro_dims(), 1);
        let mut q = p.clone();
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = q.tensors_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::<f32>::init(CompositionSetting::WR, micro_dims(), 5);
        let b = ModelParams::<f32>::init(CompositionSetting::WR, micro_dims(), 5);
        let c = ModelParams::<f32>::init(CompositionSetting::WR, micro_dims(), 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.all_finite());
        assert!(a.decoder.init_b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_widths_follow_setting() {
        for s in CompositionSetting::ALL {
            let p = ModelParams::<f32>::zeros(s, micro_dims());
            assert_eq!(p.encoder.forward.input_dim(), 8 * s.active_parts());
        }
    }

    #[test]
    fn cast_round_trip() {
        let p = ModelParams::<f32>::init(CompositionSetting::WCR, micro_dims(), 3);
        assert_eq!(p.cast::<f64>().cast::<f32>(), p);
    }
}
