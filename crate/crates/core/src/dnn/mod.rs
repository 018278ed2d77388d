//! Feed-forward model of the self-interference channel.
//!
//! The network maps a window of transmitted samples to one channel-output
//! component:
//!
//! ```text
//! o1 = x W1 + b1      a1 = relu(o1)      (in_dim -> 20)
//! o2 = a1 W2 + b2     a2 = relu(o2)      (20 -> 5)
//! y  = a2 W3 + b3                        (5 -> 1, no activation)
//! ```
//!
//! Inputs are row vectors and weights are stored `fan_in x fan_out`.

mod dataset;
mod format;
mod train;

pub use dataset::{build_dataset, window_features, Component, FeatureMode, SlidingDataset};
pub use format::{decode_arrays, encode_arrays, load_params, read_arrays, save_params, write_arrays, PARAMS_MAGIC};
pub use train::{evaluate_loss, train, train_from, TrainConfig};

use rand::Rng;

use crate::{Error, Result};

pub const HIDDEN1: usize = 20;
pub const HIDDEN2: usize = 5;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}

/// Weights and biases of the three linear blocks. Gradients use the same
/// layout.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub in_dim: usize,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub w3: Matrix,
    pub b3: Vec<f64>,
}

pub type Gradients = MlpParams;

/// Intermediate values kept by [`MlpParams::forward`] for backpropagation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForwardCache {
    pub x: Vec<f64>,
    pub o1: Vec<f64>,
    pub a1: Vec<f64>,
    pub o2: Vec<f64>,
    pub a2: Vec<f64>,
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Matrix { rows, cols, data }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(in_dim: usize, rng: &mut impl Rng) -> Result<MlpParams> {
    if in_dim < 1 {
        return Err(Error::InvalidParameter("network input width must be at least 1".into()));
    }
    Ok(MlpParams {
        in_dim,
        w1: glorot(in_dim, HIDDEN1, rng),
        b1: vec![0.0; HIDDEN1],
        w2: glorot(HIDDEN1, HIDDEN2, rng),
        b2: vec![0.0; HIDDEN2],
        w3: glorot(HIDDEN2, 1, rng),
        b3: vec![0.0; 1],
    })
}

/// `sum_m (y_real[m] - y_e[m])^2` over one mini-batch.
pub fn mse_loss(y_e: &[f64], y_real: &[f64]) -> Result<f64> {
    if y_e.len() != y_real.len() {
        return Err(Error::LengthMismatch {
            left: y_e.len(),
            right: y_real.len(),
        });
    }
    Ok(y_e.iter().zip(y_real).map(|(e, r)| (r - e).powi(2)).sum())
}

impl MlpParams {
    pub fn zeros(in_dim: usize) -> Self {
        MlpParams {
            in_dim,
            w1: Matrix::zeros(in_dim, HIDDEN1),
            b1: vec![0.0; HIDDEN1],
            w2: Matrix::zeros(HIDDEN1, HIDDEN2),
            b2: vec![0.0; HIDDEN2],
            w3: Matrix::zeros(HIDDEN2, 1),
            b3: vec![0.0; 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Flat views of all parameter arrays in the order W1, b1, W2, b2, W3, b3.
    pub fn slices(&self) -> [&[f64]; 6] {
        [&self.w1.data, &self.b1, &self.w2.data, &self.b2, &self.w3.data, &self.b3]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.w1.data,
            &mut self.b1,
            &mut self.w2.data,
            &mut self.b2,
            &mut self.w3.data,
            &mut self.b3,
        ]
    }

    pub(crate) fn check_shapes(&self) -> Result<()> {
        let expect = [
            ("W1", &self.w1, self.in_dim, HIDDEN1),
            ("W2", &self.w2, HIDDEN1, HIDDEN2),
            ("W3", &self.w3, HIDDEN2, 1),
        ];
        for (name, m, r, c) in expect {
            if m.rows != r || m.cols != c || m.data.len() != r * c {
                return Err(Error::ShapeMismatch {
                    name: name.into(),
                    expected: format!("{r}x{c}"),
                    found: m.shape_str(),
                });
            }
        }
        for (name, b, n) in [("b1", &self.b1, HIDDEN1), ("b2", &self.b2, HIDDEN2), ("b3", &self.b3, 1)] {
            if b.len() != n {
                return Err(Error::ShapeMismatch {
                    name: name.into(),
                    expected: format!("1x{n}"),
                    found: format!("1x{}", b.len()),
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        if x.len() != self.in_dim {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: self.in_dim,
            });
        }
        let mut cache = ForwardCache::default();
        let y = self.forward_into(x, &mut cache);
        Ok((y, cache))
    }

    /// Forward pass reusing `cache` storage. `x.len()` must equal `in_dim`.
    pub(crate) fn forward_into(&self, x: &[f64], cache: &mut ForwardCache) -> f64 {
        debug_assert_eq!(x.len(), self.in_dim);
        cache.x.clear();
        cache.x.extend_from_slice(x);

        cache.o1.clear();
        cache.o1.extend_from_slice(&self.b1);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, w) in cache.o1.iter_mut().zip(self.w1.row(r)) {
                *o += xr * w;
            }
        }
        cache.a1.clear();
        cache.a1.extend(cache.o1.iter().map(|&v| relu(v)));

        cache.o2.clear();
        cache.o2.extend_from_slice(&self.b2);
        for (i, &a) in cache.a1.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, w) in cache.o2.iter_mut().zip(self.w2.row(i)) {
                *o += a * w;
            }
        }
        cache.a2.clear();
        cache.a2.extend(cache.o2.iter().map(|&v| relu(v)));

        self.b3[0] + cache.a2.iter().zip(&self.w3.data).map(|(a, w)| a * w).sum::<f64>()
    }

    /// Inference only.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Exact gradients for upstream derivative `grad_out = dL/dy`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: f64) -> Gradients {
        let mut grads = MlpParams::zeros(self.in_dim);
        self.backward_accumulate(cache, grad_out, &mut grads);
        grads
    }

    /// Adds this sample's gradients into `grads`. The ReLU derivative at 0 is 0.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn backward_accumulate(&self, cache: &ForwardCache, grad_out: f64, grads: &mut Gradients) {
        if grad_out == 0.0 {
            return;
        }
        grads.b3[0] += grad_out;
        let mut d2 = [0.0; HIDDEN2];
        for j in 0..HIDDEN2 {
            grads.w3.data[j] += cache.a2[j] * grad_out;
            if cache.o2[j] > 0.0 {
                d2[j] = self.w3.data[j] * grad_out;
            }
        }

        let mut d1 = [0.0; HIDDEN1];
        for i in 0..HIDDEN1 {
            let a = cache.a1[i];
            let w_row = self.w2.row(i);
            let g_row = &mut grads.w2.data[i * HIDDEN2..(i + 1) * HIDDEN2];
            let mut back = 0.0;
            for j in 0..HIDDEN2 {
                g_row[j] += a * d2[j];
                back += w_row[j] * d2[j];
            }
            if cache.o1[i] > 0.0 {
                d1[i] = back;
            }
        }
        for (g, d) in grads.b2.iter_mut().zip(&d2) {
            *g += d;
        }
        for (g, d) in grads.b1.iter_mut().zip(&d1) {
            *g += d;
        }
        for (r, &xr) in cache.x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let g_row = &mut grads.w1.data[r * HIDDEN1..(r + 1) * HIDDEN1];
            for (g, d) in g_row.iter_mut().zip(&d1) {
                *g += xr * d;
            }
        }
    }

    /// `w <- w - lr * g` for every parameter.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self.slices_mut().into_iter().zip(grads.slices()) {
            for (w, d) in p.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
    }

    pub(crate) fn zero(&mut self) {
        for s in self.slices_mut() {
            s.fill(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line evaluation written directly from the layer equations,
    /// with explicit index loops and no shared helpers.
    #[allow(clippy::needless_range_loop)]
    fn reference_forward(p: &MlpParams, x: &[f64]) -> f64 {
        let mut a1 = [0.0; HIDDEN1];
        for i in 0..HIDDEN1 {
            let mut s = p.b1[i];
            for r in 0..p.in_dim {
                s += x[r] * p.w1.get(r, i);
            }
            a1[i] = s.max(0.0);
        }
        let mut a2 = [0.0; HIDDEN2];
        for j in 0..HIDDEN2 {
            let mut s = p.b2[j];
            for i in 0..HIDDEN1 {
                s += a1[i] * p.w2.get(i, j);
            }
            a2[j] = s.max(0.0);
        }
        let mut y = p.b3[0];
        for j in 0..HIDDEN2 {
            y += a2[j] * p.w3.get(j, 0);
        }
        y
    }

    fn random_input(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(p.predict(&random_input(7, &mut rng)).unwrap(), 0.0);
    }

    #[test]
    fn single_path_passes_positive_input() {
        let mut p = MlpParams::zeros(3);
        p.w1.set(1, 4, 1.0);
        p.w2.set(4, 2, 1.0);
        p.w3.set(2, 0, 1.0);
        assert!((p.predict(&[-5.0, 0.75, 9.0]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(p.predict(&[0.0, -0.75, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..50 {
            let in_dim = 1 + trial % 13;
            let mut p = init_params(in_dim, &mut rng).unwrap();
            for s in p.slices_mut() {
                for v in s.iter_mut() {
                    *v += rng.random_range(-0.3..0.3);
                }
            }
            let x = random_input(in_dim, &mut rng);
            let y = p.predict(&x).unwrap();
            assert!((y - reference_forward(&p, &x)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let p = MlpParams::zeros(4);
        assert!(matches!(p.forward(&[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_params(10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = init_params(10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.b1.iter().all(|&v| v == 0.0));
        let limit = (6.0 / 30.0f64).sqrt();
        assert!(a.w1.data.iter().all(|v| v.abs() <= limit));
        a.check_shapes().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(a.predict(&random_input(10, &mut rng)).unwrap().is_finite());
        assert!(init_params(0, &mut rng).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0], &[2.0]).unwrap(), 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_input(64, &mut rng);
        let b = random_input(64, &mut rng);
        let mut expect = 0.0;
        for i in 0..64 {
            expect += (b[i] - a[i]) * (b[i] - a[i]);
        }
        assert!((mse_loss(&a, &b).unwrap() - expect).abs() < 1e-12);
        assert!(mse_loss(&a, &b[..3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = init_params(6, &mut rng).unwrap();
        let (_, cache) = p.forward(&random_input(6, &mut rng)).unwrap();
        assert_eq!(p.backward(&cache, 0.0), MlpParams::zeros(6));
    }

    #[test]
    fn last_layer_gradient_in_linear_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = init_params(4, &mut rng).unwrap();
        // Large positive biases keep every unit active.
        p.b1.fill(10.0);
        p.b2.fill(10.0);
        for v in p.w2.data.iter_mut() {
            *v = v.abs();
        }
        let (_, cache) = p.forward(&random_input(4, &mut rng)).unwrap();
        assert!(cache.o1.iter().chain(&cache.o2).all(|&v| v > 0.0));
        let g = p.backward(&cache, 0.7);
        for j in 0..HIDDEN2 {
            assert!((g.w3.data[j] - cache.a2[j] * 0.7).abs() < 1e-15);
        }
    }
}
