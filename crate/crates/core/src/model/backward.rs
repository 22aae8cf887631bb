use ndarray::{s, Array2, Array3, Axis};

use super::forward::{Dropout, ForwardCache, Loss};
use super::ModelParams;
use crate::composition::backprop_batch;
use crate::data::EncodedBatch;
use crate::error::Result;
use crate::real::Real;

impl<T: Real> ModelParams<T> {
    /// Exact gradients of the mean token loss, dropout disabled.
    pub fn gradients(&self, batch: &EncodedBatch) -> Result<(Loss, ModelParams<T>)> {
        self.loss_and_gradients(batch, None)
    }

    /// Loss and its gradients with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &EncodedBatch,
        dropout: Option<Dropout<'_>>,
    ) -> Result<(Loss, ModelParams<T>)> {
        let (loss, cache) = self.forward_cached(batch, dropout)?;
        let grads = self.backward(batch, &cache, loss.tokens);
        Ok((loss, grads))
    }

    fn backward(&self, batch: &EncodedBatch, cache: &ForwardCache<T>, tokens: usize) -> ModelParams<T> {
        let one = T::one();
        let mut g = self.zeros_like();
        let nb = batch.len();
        let tx = cache.annotations.len();
        let (h, a2) = (self.dims.hidden, self.dims.annotation());
        let scale = T::lit(1.0 / tokens as f64);
        let ann = &cache.annotations;

        let mut d_ann: Vec<Array2<T>> = vec![Array2::zeros((nb, a2)); tx];
        let mut d_proj: Vec<Array2<T>> = vec![Array2::zeros((nb, self.dims.alignment())); tx];
        let mut ds_next = Array2::<T>::zeros((nb, h));

        for (t, step) in cache.steps.iter().enumerate().rev() {
            // softmax cross-entropy
            let mut dlogits = step.probs.clone();
            for b in 0..nb {
                if batch.target_mask[b][t] {
                    dlogits[[b, batch.target[b][t] as usize]] -= one;
                    dlogits.row_mut(b).mapv_inplace(|v| v * scale);
                } else {
                    dlogits.row_mut(b).fill(T::zero());
                }
            }
            let dec = &self.decoder;
            g.decoder.output_w += &step.dropped.t().dot(&dlogits);
            g.decoder.output_b += &dlogits.sum_axis(Axis(0));
            let mut dread = dlogits.dot(&dec.output_w.t());
            if let Some(mask) = &step.drop_mask {
                dread *= mask;
            }
            let dpre = &dread * &step.readout.mapv(|v| one - v * v);
            let ctx = &step.attention.context;
            g.decoder.readout_state += &step.state.t().dot(&dpre);
            g.decoder.readout_prev += &step.prev_emb.t().dot(&dpre);
            g.decoder.readout_context += &ctx.t().dot(&dpre);
            g.decoder.readout_b += &dpre.sum_axis(Axis(0));

            let ds = &ds_next + &dpre.dot(&dec.readout_state.t());
            let mut d_emb = dpre.dot(&dec.readout_prev.t());
            let mut dctx = dpre.dot(&dec.readout_context.t());

            let (dctx_gru, mut ds_tilde) = dec.post_gru.backward(&step.post, &ds, &mut g.decoder.post_gru);
            dctx += &dctx_gru;

            // context = Σ_j α_j h_j
            let alpha = &step.attention.weights;
            let mut dalpha = Array2::<T>::zeros((nb, tx));
            for j in 0..tx {
                dalpha.column_mut(j).assign(&(&dctx * &ann.states[j]).sum_axis(Axis(1)));
                let w = alpha.column(j).insert_axis(Axis(1));
                d_ann[j] += &(&dctx * &w);
            }
            // softmax backward
            let dot = (&dalpha * alpha).sum_axis(Axis(1)).insert_axis(Axis(1));
            let dscore = alpha * &(&dalpha - &dot);

            let att = &self.attention;
            let mut dquery = Array2::<T>::zeros((nb, self.dims.alignment()));
            for j in 0..tx {
                let align = &step.attend.align[j];
                let dsj = dscore.column(j);
                g.attention.score += &align.t().dot(&dsj);
                let dalign = dsj.insert_axis(Axis(1)).dot(&att.score.view().insert_axis(Axis(0)));
                let dpre_j = &dalign * &align.mapv(|v| one - v * v);
                d_proj[j] += &dpre_j;
                dquery += &dpre_j;
            }
            g.attention.bias += &dquery.sum_axis(Axis(0));
            g.attention.w_state += &step.attention.s_tilde.t().dot(&dquery);
            ds_tilde += &dquery.dot(&att.w_state.t());

            let (d_emb_gru, ds_prev) = att.pre_gru.backward(&step.attend.pre, &ds_tilde, &mut g.attention.pre_gru);
            d_emb += &d_emb_gru;
            for (b, &id) in step.prev_ids.iter().enumerate() {
                let mut row = g.target_embedding.row_mut(id as usize);
                row += &d_emb.row(b);
            }
            ds_next = ds_prev;
        }

        // s_0 = tanh(mean·W_init + b_init)
        let dpre0 = &ds_next * &cache.s0.mapv(|v| one - v * v);
        g.decoder.init_w += &cache.mean.t().dot(&dpre0);
        g.decoder.init_b += &dpre0.sum_axis(Axis(0));
        let lens = ann.mask.sum_axis(Axis(1)).insert_axis(Axis(1));
        let dmean = dpre0.dot(&self.decoder.init_w.t()) / &lens.mapv(|l| if l > T::zero() { l } else { one });
        for j in 0..tx {
            let m = ann.mask.column(j).insert_axis(Axis(1));
            d_ann[j] += &(&dmean * &m);
            g.attention.w_annotation += &ann.states[j].t().dot(&d_proj[j]);
            d_ann[j] += &d_proj[j].dot(&self.attention.w_annotation.t());
        }

        // bidirectional encoder
        let mut d_inputs = Array3::<T>::zeros(cache.composed.inputs.raw_dim());
        let mask = &cache.composed.mask;
        let enc = &self.encoder;
        let mut run = |gru: &super::Gru<T>,
                       grads: &mut super::Gru<T>,
                       caches: &[super::gru::GruCache<T>],
                       half: std::ops::Range<usize>,
                       order: Vec<usize>| {
            let mut carry = Array2::<T>::zeros((nb, h));
            for j in order {
                let m = mask.column(j).insert_axis(Axis(1)).to_owned();
                let d_state = &d_ann[j].slice(s![.., half.clone()]) * &m + &carry;
                let d_next = &d_state * &m;
                let (dx, dh) = gru.backward(&caches[j], &d_next, grads);
                carry = &d_state * &m.mapv(|v| one - v) + &dh;
                let mut slot = d_inputs.slice_mut(s![.., j, ..]);
                slot += &dx;
            }
        };
        run(&enc.forward, &mut g.encoder.forward, &cache.encoder.forward, 0..h, (0..tx).rev().collect());
        run(&enc.backward, &mut g.encoder.backward, &cache.encoder.backward, h..2 * h, (0..tx).collect());

        backprop_batch(self.setting, batch, &d_inputs, &mut g.source);
        g
    }
}
