//! Dense tanh networks over a flat parameter slice, with manual backprop.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Layer sizes of a fully connected network. Hidden layers use tanh, the
/// output layer is linear. Parameters for layer `l` are stored as a row-major
/// `(in, out)` weight block followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpLayout {
    sizes: Vec<usize>,
}

/// Inputs and post-activation outputs of every layer for one batch.
pub struct Activations {
    layers: Vec<Array2<f64>>,
}

impl Activations {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().expect("at least the input layer")
    }
}

impl MlpLayout {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self { sizes }
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer<'a>(&self, params: &'a [f64], l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>, usize) {
        let offset: usize = self.sizes[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let w = ArrayView2::from_shape((i, o), &params[offset..offset + i * o]).unwrap();
        let b = ArrayView1::from(&params[offset + i * o..offset + i * o + o]);
        (w, b, offset)
    }

    /// Orthogonal-ish scaled Gaussian init; the last layer is scaled by `out_scale`.
    pub fn init(&self, params: &mut [f64], out_scale: f64, rng: &mut impl Rng) {
        let last = self.sizes.len() - 2;
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (i, o) = (w[0], w[1]);
            let scale = if l == last { out_scale } else { 1.0 } / (i as f64).sqrt();
            for p in &mut params[offset..offset + i * o] {
                let z: f64 = StandardNormal.sample(rng);
                *p = z * scale;
            }
            params[offset + i * o..offset + i * o + o].fill(0.0);
            offset += i * o + o;
        }
    }

    pub fn forward(&self, params: &[f64], x: ArrayView2<f64>) -> Activations {
        debug_assert_eq!(params.len(), self.param_count());
        let n = self.sizes.len() - 1;
        let mut layers = Vec::with_capacity(n + 1);
        layers.push(x.to_owned());
        for l in 0..n {
            let (w, b, _) = self.layer(params, l);
            let mut z = layers[l].dot(&w);
            z += &b;
            if l + 1 < n {
                z.mapv_inplace(f64::tanh);
            }
            layers.push(z);
        }
        Activations { layers }
    }

    /// Single-input forward pass into `out`.
    pub fn forward_one(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        let x = ArrayView2::from_shape((1, x.len()), x).unwrap();
        let acts = self.forward(params, x);
        out.copy_from_slice(acts.output().as_slice().unwrap());
    }

    /// Accumulate parameter gradients into `grad` given the loss gradient
    /// with respect to the network output.
    pub fn backward(&self, params: &[f64], acts: &Activations, d_out: Array2<f64>, grad: &mut [f64]) {
        let n = self.sizes.len() - 1;
        let mut delta = d_out;
        for l in (0..n).rev() {
            let (w, _, offset) = self.layer(params, l);
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts.layers[l];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            for (g, v) in grad[offset..offset + i * o].iter_mut().zip(gw.iter()) {
                *g += v;
            }
            for (g, v) in grad[offset + i * o..offset + i * o + o].iter_mut().zip(gb.iter()) {
                *g += v;
            }
            if l > 0 {
                let mut prev = delta.dot(&w.t());
                // input to this layer is a tanh output
                prev.zip_mut_with(input, |d, a| *d *= 1.0 - a * a);
                delta = prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_count_matches_layout() {
        let m = MlpLayout::new(58, &[128, 128], 10);
        assert_eq!(m.param_count(), 58 * 128 + 128 + 128 * 128 + 128 + 128 * 10 + 10);
    }

    #[test]
    fn backward_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpLayout::new(3, &[4, 5], 2);
        let mut params = vec![0.0; m.param_count()];
        m.init(&mut params, 1.0, &mut rng);
        for p in params.iter_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let x = Array2::from_shape_fn((6, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        // loss = sum of out * c
        let c = Array2::from_shape_fn((6, 2), |(i, j)| 0.5 + (i as f64) - (j as f64) * 0.3);
        let loss = |p: &[f64]| (m.forward(p, x.view()).output() * &c).sum();
        let acts = m.forward(&params, x.view());
        let mut grad = vec![0.0; params.len()];
        m.backward(&params, &acts, c.clone(), &mut grad);
        let h = 1e-6;
        for k in 0..params.len() {
            let mut p = params.clone();
            p[k] += h;
            let up = loss(&p);
            p[k] -= 2.0 * h;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn forward_one_agrees_with_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = MlpLayout::new(4, &[8], 3);
        let mut params = vec![0.0; m.param_count()];
        m.init(&mut params, 0.5, &mut rng);
        let x = [0.1, -0.4, 2.0, 0.0];
        let mut out = [0.0; 3];
        m.forward_one(&params, &x, &mut out);
        let batch = m.forward(&params, ArrayView2::from_shape((1, 4), &x).unwrap());
        assert_eq!(batch.output().as_slice().unwrap(), &out);
    }
}
