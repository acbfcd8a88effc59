//! Fully connected ReLU networks with a hand-written backward pass.
//!
//! Parameters of all layers live in one flat vector (per layer: weights
//! `out × in` row-major, then biases), so optimizers and checkpoints can treat
//! a network as a single slice.

use std::fmt::Debug;

use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Scalar type the networks are generic over: `f32` for training, `f64` for
/// gradient checks.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    /// `C = alpha·A·B + beta·C` with arbitrary strides (see `matrixmultiply`).
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                // The largest index touched must be in bounds for all three operands.
                let last = |r: usize, cc: usize, rs: isize, cs: isize| {
                    if r == 0 || cc == 0 {
                        0
                    } else {
                        (r as isize - 1) * rs + (cc as isize - 1) * cs
                    }
                };
                assert!(rsa >= 0 && csa >= 0 && rsb >= 0 && csb >= 0 && rsc >= 0 && csc >= 0);
                if m > 0 && k > 0 {
                    assert!((last(m, k, rsa, csa) as usize) < a.len());
                }
                if k > 0 && n > 0 {
                    assert!((last(k, n, rsb, csb) as usize) < b.len());
                }
                if m > 0 && n > 0 {
                    assert!((last(m, n, rsc, csc) as usize) < c.len());
                }
                // SAFETY: strides are non-negative and every index reachable
                // through them was bounds-checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }

            fn of(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                f64::from(self)
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// A multilayer perceptron: ReLU after every hidden layer, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct MlpCache<T> {
    batch: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`
    /// (after ReLU for hidden layers).
    acts: Vec<Vec<T>>,
}

impl<T> MlpCache<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl<T: Real> Mlp<T> {
    /// All-zero network with layer widths `sizes` (input first, output last).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![T::zero(); n],
        })
    }

    /// Uniform fan-in initialization `±sqrt(6 / in)` for hidden layers (He
    /// uniform for ReLU), scaled by `output_gain` on the last layer; zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        let layers = mlp.num_layers();
        for l in 0..layers {
            let (inp, _) = mlp.layer_shape(l);
            let mut bound = (6.0 / inp as f64).sqrt();
            if l + 1 == layers {
                bound *= output_gain;
            }
            let (w, _) = mlp.layer_range(l);
            for p in &mut mlp.params[w] {
                *p = T::of(rng.gen_range(-bound..=bound));
            }
        }
        Ok(mlp)
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        if params.len() != mlp.params.len() {
            return Err(Error::Contract(format!(
                "expected {} parameters for {sizes:?}, got {}",
                mlp.params.len(),
                params.len()
            )));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `(in, out)` of layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.sizes[l], self.sizes[l + 1])
    }

    /// Index ranges of the weights and biases of layer `l` in [`Self::params`].
    pub fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start: usize = self.sizes[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = self.layer_shape(l);
        (start..start + i * o, start + i * o..start + i * o + o)
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Forward pass on `batch` row-major inputs, keeping activations.
    pub fn forward_cached(&self, input: &[T], batch: usize, cache: &mut MlpCache<T>) -> Result<()> {
        if input.len() != batch * self.input_dim() {
            return Err(Error::Contract(format!(
                "input has {} values, expected {batch}×{}",
                input.len(),
                self.input_dim()
            )));
        }
        let layers = self.num_layers();
        cache.batch = batch;
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        for l in 0..layers {
            let (inp, out) = self.layer_shape(l);
            let (wr, br) = self.layer_range(l);
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let x = &head[l];
            let y = &mut tail[0];
            y.clear();
            let bias = &self.params[br];
            for _ in 0..batch {
                y.extend_from_slice(bias);
            }
            // Y (batch×out) += X (batch×in) · Wᵀ (in×out)
            T::gemm(
                batch,
                inp,
                out,
                T::one(),
                x,
                inp as isize,
                1,
                &self.params[wr],
                1,
                inp as isize,
                T::one(),
                y,
                out as isize,
                1,
            );
            if l + 1 < layers {
                for v in y.iter_mut() {
                    if *v < T::zero() {
                        *v = T::zero();
                    }
                }
            }
        }
        Ok(())
    }

    /// Forward pass without keeping activations.
    pub fn forward(&self, input: &[T], batch: usize) -> Result<Vec<T>> {
        let mut cache = MlpCache::default();
        self.forward_cached(input, batch, &mut cache)?;
        Ok(cache.acts.pop().unwrap_or_default())
    }

    /// Accumulates parameter gradients into `grad` given `d loss / d output`
    /// for the batch in `cache`. Returns `d loss / d input` when `want_input`.
    pub fn backward(&self, cache: &MlpCache<T>, grad_output: &[T], grad: &mut [T], want_input: bool) -> Option<Vec<T>> {
        let batch = cache.batch;
        assert_eq!(grad.len(), self.params.len());
        assert_eq!(grad_output.len(), batch * self.output_dim());
        let mut delta = grad_output.to_vec();
        let layers = self.num_layers();
        for l in (0..layers).rev() {
            let (inp, out) = self.layer_shape(l);
            let (wr, br) = self.layer_range(l);
            let x = &cache.acts[l];
            // dW (out×in) += δᵀ (out×batch) · X (batch×in)
            T::gemm(
                out,
                batch,
                inp,
                T::one(),
                &delta,
                1,
                out as isize,
                x,
                inp as isize,
                1,
                T::one(),
                &mut grad[wr.clone()],
                inp as isize,
                1,
            );
            let gb = &mut grad[br];
            for row in delta.chunks_exact(out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g = *g + *d;
                }
            }
            if l == 0 && !want_input {
                return None;
            }
            // δ_prev (batch×in) = δ (batch×out) · W (out×in)
            let mut prev = vec![T::zero(); batch * inp];
            T::gemm(
                batch,
                out,
                inp,
                T::one(),
                &delta,
                out as isize,
                1,
                &self.params[wr],
                inp as isize,
                1,
                T::zero(),
                &mut prev,
                inp as isize,
                1,
            );
            if l > 0 {
                for (p, a) in prev.iter_mut().zip(x) {
                    if *a <= T::zero() {
                        *p = T::zero();
                    }
                }
            }
            delta = prev;
        }
        Some(delta)
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            sizes: self.sizes.clone(),
            params: self.params.iter().map(|p| U::of(p.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::<f64>::zeros(&[26, 256, 256, 6]).unwrap();
        let out = mlp.forward(&[0.7; 26], 1).unwrap();
        assert_eq!(out, vec![0.0; 6]);
    }

    #[test]
    fn doubling_head_weights_doubles_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::<f64>::init(&[8, 16, 16, 3], 1.0, &mut rng).unwrap();
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let y1 = mlp.forward(&x, 1).unwrap();
        let (w, b) = mlp.layer_range(2);
        for i in w.chain(b) {
            mlp.params_mut()[i] *= 2.0;
        }
        let y2 = mlp.forward(&x, 1).unwrap();
        for (a, b) in y1.iter().zip(&y2) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_forward_matches_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::<f64>::init(&[5, 7, 2], 1.0, &mut rng).unwrap();
        let x: Vec<f64> = (0..15).map(|i| (i as f64).cos()).collect();
        let all = mlp.forward(&x, 3).unwrap();
        for r in 0..3 {
            let one = mlp.forward(&x[5 * r..5 * r + 5], 1).unwrap();
            for c in 0..2 {
                assert!((one[c] - all[2 * r + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wrong_input_size_is_contract_error() {
        let mlp = Mlp::<f32>::zeros(&[4, 3]).unwrap();
        assert!(matches!(mlp.forward(&[0.0; 5], 1), Err(Error::Contract(_))));
        assert!(Mlp::<f32>::zeros(&[4]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sizes = [8, 8, 8, 3];
        let mlp = Mlp::<f64>::init(&sizes, 1.0, &mut rng).unwrap();
        let batch = 4;
        let x: Vec<f64> = (0..batch * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..batch * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // loss = Σ w ⊙ y
        let loss = |m: &Mlp<f64>| -> f64 { m.forward(&x, batch).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum() };
        let mut cache = MlpCache::default();
        mlp.forward_cached(&x, batch, &mut cache).unwrap();
        let mut grad = vec![0.0; mlp.params().len()];
        let gin = mlp.backward(&cache, &w, &mut grad, true).unwrap();
        let h = 1e-6;
        for i in 0..grad.len() {
            let mut p = mlp.clone();
            p.params_mut()[i] += h;
            let up = loss(&p);
            p.params_mut()[i] -= 2.0 * h;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!(
                rel_err(fd, grad[i]) < 1e-4 || (fd - grad[i]).abs() < 1e-9,
                "param {i}: {fd} vs {}",
                grad[i]
            );
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let up: f64 = mlp
                .forward(&xp, batch)
                .unwrap()
                .iter()
                .zip(&w)
                .map(|(a, b)| a * b)
                .sum();
            xp[i] -= 2.0 * h;
            let down: f64 = mlp
                .forward(&xp, batch)
                .unwrap()
                .iter()
                .zip(&w)
                .map(|(a, b)| a * b)
                .sum();
            let fd = (up - down) / (2.0 * h);
            assert!(rel_err(fd, gin[i]) < 1e-4 || (fd - gin[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn f32_and_f64_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m64 = Mlp::<f64>::init(&[26, 64, 64, 7], 0.01, &mut rng).unwrap();
        let m32: Mlp<f32> = m64.cast();
        let x: Vec<f64> = (0..26).map(|i| (i as f64 * 0.1).sin()).collect();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let a = m64.forward(&x, 1).unwrap();
        let b = m32.forward(&x32, 1).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - f64::from(*q)).abs() < 1e-5);
        }
    }
}
