use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::Rng;

use super::init::{orthogonal, uniform};
use crate::real::Real;

/// Gated recurrent unit over row-major batches (one row per sentence):
///
/// ```text
/// r  = σ(x·W_r + h·U_r + b_r)
/// u  = σ(x·W_u + h·U_u + b_u)
/// h̃  = tanh(x·W_c + (r∘h)·U_c + b_c)
/// h' = (1 − u)∘h + u∘h̃
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Gru<T> {
    pub w_r: Array2<T>,
    pub w_u: Array2<T>,
    pub w_c: Array2<T>,
    pub u_r: Array2<T>,
    pub u_u: Array2<T>,
    pub u_c: Array2<T>,
    pub b_r: Array1<T>,
    pub b_u: Array1<T>,
    pub b_c: Array1<T>,
}

/// Values from a forward step needed to backpropagate through it.
#[derive(Debug, Clone)]
pub(crate) struct GruCache<T> {
    x: Array2<T>,
    h: Array2<T>,
    r: Array2<T>,
    u: Array2<T>,
    c: Array2<T>,
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Real> Gru<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Gru {
            w_r: Array2::zeros((input, hidden)),
            w_u: Array2::zeros((input, hidden)),
            w_c: Array2::zeros((input, hidden)),
            u_r: Array2::zeros((hidden, hidden)),
            u_u: Array2::zeros((hidden, hidden)),
            u_c: Array2::zeros((hidden, hidden)),
            b_r: Array1::zeros(hidden),
            b_u: Array1::zeros(hidden),
            b_c: Array1::zeros(hidden),
        }
    }

    /// Input matrices uniform, recurrent matrices orthogonal, biases zero.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Gru {
            w_r: uniform(input, hidden, rng),
            w_u: uniform(input, hidden, rng),
            w_c: uniform(input, hidden, rng),
            u_r: orthogonal(hidden, rng),
            u_u: orthogonal(hidden, rng),
            u_c: orthogonal(hidden, rng),
            ..Self::zeros(input, hidden)
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_r.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u_r.nrows()
    }

    pub fn step(&self, x: ArrayView2<T>, h: ArrayView2<T>) -> Array2<T> {
        self.step_cached(x, h).0
    }

    pub(crate) fn step_cached(&self, x: ArrayView2<T>, h: ArrayView2<T>) -> (Array2<T>, GruCache<T>) {
        let r = (x.dot(&self.w_r) + h.dot(&self.u_r) + &self.b_r).mapv(sigmoid);
        let u = (x.dot(&self.w_u) + h.dot(&self.u_u) + &self.b_u).mapv(sigmoid);
        let rh = &r * &h;
        let c = (x.dot(&self.w_c) + rh.dot(&self.u_c) + &self.b_c).mapv(T::tanh);
        let one = T::one();
        let h_new = &h * &u.mapv(|v| one - v) + &(&u * &c);
        let cache = GruCache {
            x: x.to_owned(),
            h: h.to_owned(),
            r,
            u,
            c,
        };
        (h_new, cache)
    }

    /// Accumulates parameter gradients into `grads` and returns the
    /// gradients with respect to the step's input and previous state.
    pub(crate) fn backward(
        &self,
        cache: &GruCache<T>,
        dh_new: &Array2<T>,
        grads: &mut Gru<T>,
    ) -> (Array2<T>, Array2<T>) {
        let one = T::one();
        let GruCache { x, h, r, u, c } = cache;
        let dc = dh_new * u;
        let du = dh_new * &(c - h);
        let mut dh = dh_new * &u.mapv(|v| one - v);

        let da_c = &dc * &c.mapv(|v| one - v * v);
        let da_u = &du * &u.mapv(|v| v * (one - v));
        let rh = r * h;
        let drh = da_c.dot(&self.u_c.t());
        let dr = &drh * h;
        dh += &(&drh * r);
        let da_r = &dr * &r.mapv(|v| v * (one - v));

        grads.w_c += &x.t().dot(&da_c);
        grads.w_u += &x.t().dot(&da_u);
        grads.w_r += &x.t().dot(&da_r);
        grads.u_c += &rh.t().dot(&da_c);
        grads.u_u += &h.t().dot(&da_u);
        grads.u_r += &h.t().dot(&da_r);
        grads.b_c += &da_c.sum_axis(Axis(0));
        grads.b_u += &da_u.sum_axis(Axis(0));
        grads.b_r += &da_r.sum_axis(Axis(0));

        dh += &da_u.dot(&self.u_u.t());
        dh += &da_r.dot(&self.u_r.t());
        let mut dx = da_c.dot(&self.w_c.t());
        dx += &da_u.dot(&self.w_u.t());
        dx += &da_r.dot(&self.w_r.t());
        (dx, dh)
    }

    pub(crate) fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, ArrayViewD<'a, T>)>) {
        let mats = [&self.w_r, &self.w_u, &self.w_c, &self.u_r, &self.u_u, &self.u_c];
        for (name, m) in MATRICES.iter().zip(mats) {
            out.push((format!("{prefix}.{name}"), m.view().into_dyn()));
        }
        for (name, b) in BIASES.iter().zip([&self.b_r, &self.b_u, &self.b_c]) {
            out.push((format!("{prefix}.{name}"), b.view().into_dyn()));
        }
    }

    pub(crate) fn tensors_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(String, ArrayViewMutD<'a, T>)>,
    ) {
        let mats = [
            &mut self.w_r,
            &mut self.w_u,
            &mut self.w_c,
            &mut self.u_r,
            &mut self.u_u,
            &mut self.u_c,
        ];
        for (name, m) in MATRICES.iter().zip(mats) {
            out.push((format!("{prefix}.{name}"), m.view_mut().into_dyn()));
        }
        for (name, b) in BIASES
            .iter()
            .zip([&mut self.b_r, &mut self.b_u, &mut self.b_c])
        {
            out.push((format!("{prefix}.{name}"), b.view_mut().into_dyn()));
        }
    }
}

const MATRICES: [&str; 6] = ["w_r", "w_u", "w_c", "u_r", "u_u", "u_c"];
const BIASES: [&str; 3] = ["b_r", "b_u", "b_c"];
