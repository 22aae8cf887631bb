use super::ModelParams;
use crate::error::{Error, Result};
use crate::real::Real;

/// Adadelta with running averages of squared gradients and squared
/// updates (no learning rate).
#[derive(Debug, Clone, PartialEq)]
pub struct Adadelta<T> {
    pub rho: f64,
    pub eps: f64,
    /// Gradients are rescaled to this global L2 norm when they exceed it.
    pub clip_norm: Option<f64>,
    pub sq_grad: ModelParams<T>,
    pub sq_update: ModelParams<T>,
}

/// Rescales `grads` in place so their global L2 norm is at most
/// `threshold`. Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut ModelParams<T>, threshold: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.iter().map(|v| v.as_f64() * v.as_f64()).collect::<Vec<_>>())
        .sum::<f64>()
        .sqrt();
    if norm > threshold {
        let factor = T::lit(threshold / norm);
        for (_, mut t) in grads.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }
    norm
}

impl<T: Real> Adadelta<T> {
    pub fn new(params: &ModelParams<T>, rho: f64, eps: f64, clip_norm: Option<f64>) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) || eps <= 0.0 {
            return Err(Error::Config(format!(
                "adadelta needs 0 < rho < 1 and eps > 0, got rho={rho} eps={eps}"
            )));
        }
        Ok(Adadelta {
            rho,
            eps,
            clip_norm,
            sq_grad: params.zeros_like(),
            sq_update: params.zeros_like(),
        })
    }

    /// Applies one update. Fails, leaving everything untouched, when a
    /// gradient entry is not finite.
    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) -> Result<()> {
        for (name, t) in grads.tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient in {name}")));
            }
        }
        let mut grads = grads.clone();
        if let Some(c) = self.clip_norm {
            clip_global_norm(&mut grads, c);
        }
        let rho = T::lit(self.rho);
        let decay = T::lit(1.0 - self.rho);
        let eps = T::lit(self.eps);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.sq_grad.tensors_mut())
            .zip(self.sq_update.tensors_mut());
        for ((((_, mut p), (_, g)), (_, mut eg)), (_, mut edx)) in tensors {
            ndarray::Zip::from(&mut p)
                .and(&g)
                .and(&mut eg)
                .and(&mut edx)
                .for_each(|p, &g, eg, edx| {
                    *eg = rho * *eg + decay * g * g;
                    let dx = -((*edx + eps).sqrt() / (*eg + eps).sqrt()) * g;
                    *edx = rho * *edx + decay * dx * dx;
                    *p += dx;
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::CompositionSetting;
    use crate::model::ModelDims;

    fn dims() -> ModelDims {
        ModelDims {
            emb: 2,
            hidden: 3,
            word_vocab: 5,
            char_vocab: 5,
            radical_vocab: 5,
            target_vocab: 6,
        }
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_accumulators() {
        let mut p = ModelParams::<f64>::init(CompositionSetting::WCR, dims(), 1);
        let before = p.clone();
        let mut opt = Adadelta::new(&p, 0.95, 1e-6, Some(1.0)).unwrap();
        opt.sq_grad.decoder.output_b.fill(2.0);
        opt.sq_update.decoder.output_b.fill(4.0);
        let zero = p.zeros_like();
        opt.update(&mut p, &zero).unwrap();
        assert_eq!(p, before);
        assert!(opt.sq_grad.decoder.output_b.iter().all(|&v| (v - 1.9).abs() < 1e-15));
        assert!(opt.sq_update.decoder.output_b.iter().all(|&v| (v - 3.8).abs() < 1e-15));
    }

    #[test]
    fn first_step_magnitude() {
        let (rho, eps) = (0.95, 1e-6);
        let mut p = ModelParams::<f64>::zeros(CompositionSetting::W, dims());
        let mut g = p.zeros_like();
        g.decoder.output_b[2] = 1.0;
        let mut opt = Adadelta::new(&p, rho, eps, None).unwrap();
        opt.update(&mut p, &g).unwrap();
        // |Δ| = sqrt(eps) / sqrt((1 - rho) * 1 + eps)
        let want = eps.sqrt() / ((1.0 - rho) + eps).sqrt();
        assert!((p.decoder.output_b[2] + want).abs() < 1e-15, "{}", p.decoder.output_b[2]);
        assert_eq!(p.decoder.output_b.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn clipping_matches_pre_clipped_gradient() {
        let base = ModelParams::<f64>::init(CompositionSetting::WC, dims(), 2);
        let mut g = base.zeros_like();
        g.decoder.output_b.fill(0.3);
        g.attention.score.fill(-0.2);
        let mut big = g.clone();
        for (_, mut t) in big.tensors_mut() {
            t.mapv_inplace(|v| v * 50.0);
        }
        let mut clipped = big.clone();
        assert!(clip_global_norm(&mut clipped, 1.0) > 1.0);

        let (mut p1, mut p2) = (base.clone(), base.clone());
        let mut o1 = Adadelta::new(&base, 0.95, 1e-6, Some(1.0)).unwrap();
        let mut o2 = Adadelta::new(&base, 0.95, 1e-6, None).unwrap();
        o1.update(&mut p1, &big).unwrap();
        o2.update(&mut p2, &clipped).unwrap();
        for ((_, a), (_, b)) in p1.tensors().iter().zip(p2.tensors().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut p = ModelParams::<f64>::zeros(CompositionSetting::W, dims());
        let mut g = p.zeros_like();
        g.attention.bias[0] = f64::NAN;
        let mut opt = Adadelta::new(&p, 0.95, 1e-6, None).unwrap();
        let err = opt.update(&mut p, &g).unwrap_err();
        assert!(err.to_string().contains("attention.bias"), "{err}");
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let p = ModelParams::<f64>::zeros(CompositionSetting::W, dims());
        assert!(Adadelta::new(&p, 1.0, 1e-6, None).is_err());
        assert!(Adadelta::new(&p, 0.9, 0.0, None).is_err());
    }
}
