use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::real::Real;

pub(crate) const INIT_SCALE: f64 = 0.08;

/// Entries uniform in [-0.08, 0.08].
pub(crate) fn uniform<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || {
        T::lit(rng.random_range(-INIT_SCALE..=INIT_SCALE))
    })
}

/// Random orthogonal matrix: Gram-Schmidt on a Gaussian matrix.
pub(crate) fn orthogonal<T: Real>(n: usize, rng: &mut impl Rng) -> Array2<T> {
    let mut q = Array2::<f64>::from_shape_simple_fn((n, n), || rng.sample(StandardNormal));
    for i in 0..n {
        for _ in 0..2 {
            for k in 0..i {
                let proj = q.row(i).dot(&q.row(k));
                let qk = q.row(k).to_owned();
                q.row_mut(i).scaled_add(-proj, &qk);
            }
        }
        let norm = q.row(i).dot(&q.row(i)).sqrt();
        q.row_mut(i).mapv_inplace(|v| v / norm);
    }
    q.mapv(T::lit)
}
