//! Dense neural-network substrate: MLP forward/backward with hand-derived
//! gradients, the Adam optimizer, and flat parameter handling.
//!
//! Networks are fixed-shape multilayer perceptrons with tanh hidden
//! activations and identity outputs, sized for small policy/value heads.
//! All arithmetic is `f64`. Parameters live in a single flat [`ParamVector`]
//! with a deterministic layout so that optimizers, checkpoints, and
//! finite-difference checks all see the same coordinates.
//!
//! # Parameter layout
//!
//! For each layer in input→output order: the weight matrix in row-major
//! order (shape `out × in`, entry `(o, i)` at offset `o * in + i`), followed
//! by the bias vector (length `out`). Layers are concatenated.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{read_param_block, write_param_block, ParamBlock, ParamSection, CHECKPOINT_MAGIC};

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Architecture of one dense network.
///
/// Hidden layers use tanh; the output layer is linear. `hidden_dims` may be
/// empty, in which case the network is a single affine map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::Config("mlp dimensions must be positive".into()));
        }
        Ok(Self { input_dim, hidden_dims, output_dim })
    }

    /// `(in, out)` dimensions of each layer, input→output order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    /// Total trainable parameter count: Σ (in + 1) · out over layers.
    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| (i + 1) * o).sum()
    }

    /// All dims as one sequence: input, hidden…, output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.output_dim);
        d
    }

    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("mlp needs at least input and output dims".into()));
        }
        MlpSpec::new(dims[0], dims[1..dims.len() - 1].to_vec(), dims[dims.len() - 1])
    }
}

/// Flat sequence of 64-bit floats holding all trainable parameters of one
/// network, in the layout documented at the module level.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Per-layer weight/bias views into a flat parameter vector.
///
/// This is the "unflatten" direction; [`flatten_layers`] goes back. The
/// round trip is the identity.
pub fn unflatten<'a>(spec: &MlpSpec, params: &'a [f64]) -> Result<Vec<(&'a [f64], &'a [f64])>> {
    if params.len() != spec.param_count() {
        return Err(Error::Config(format!(
            "param vector length {} does not match spec ({} expected)",
            params.len(),
            spec.param_count()
        )));
    }
    let mut out = Vec::new();
    let mut off = 0;
    for (i, o) in spec.layer_dims() {
        let w = &params[off..off + i * o];
        off += i * o;
        let b = &params[off..off + o];
        off += o;
        out.push((w, b));
    }
    Ok(out)
}

/// Concatenate per-layer (weights, biases) slices back into a flat vector.
pub fn flatten_layers(layers: &[(Vec<f64>, Vec<f64>)]) -> ParamVector {
    let mut v = Vec::new();
    for (w, b) in layers {
        v.extend_from_slice(w);
        v.extend_from_slice(b);
    }
    ParamVector(v)
}

/// Activation record from [`mlp_forward`]: the input seen by every layer
/// (original input first, then each post-tanh hidden activation). Enough to
/// run [`mlp_backward`] against the same spec/params.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_inputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Input of the first layer (the network input).
    pub fn network_input(&self) -> &[f64] {
        &self.layer_inputs[0]
    }
}

/// Evaluate the network. Returns the output and the activation cache needed
/// by [`mlp_backward`].
pub fn mlp_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if input.len() != spec.input_dim {
        return Err(Error::Config(format!(
            "input length {} does not match spec input_dim {}",
            input.len(),
            spec.input_dim
        )));
    }
    let layers = unflatten(spec, params)?;
    let n_layers = layers.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut x = input.to_vec();
    for (idx, (w, b)) in layers.iter().enumerate() {
        let in_dim = x.len();
        let out_dim = b.len();
        let mut z = vec![0.0; out_dim];
        for o in 0..out_dim {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let mut acc = b[o];
            for i in 0..in_dim {
                acc += row[i] * x[i];
            }
            z[o] = acc;
        }
        let last = idx == n_layers - 1;
        if !last {
            for zo in z.iter_mut() {
                *zo = zo.tanh();
            }
        }
        layer_inputs.push(std::mem::replace(&mut x, z));
    }
    Ok((x, ForwardCache { layer_inputs }))
}

/// Backward pass: given the cotangent of the network output, produce the
/// gradient with respect to every parameter, in [`ParamVector`] layout.
///
/// `params` must be the vector that produced `cache`.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<ParamVector> {
    let mut out = ParamVector::zeros(spec.param_count());
    mlp_backward_into(spec, params, cache, upstream, 1.0, &mut out.0)?;
    Ok(out)
}

/// Like [`mlp_backward`] but accumulates `weight ·` the gradient into `out`,
/// which must already have the spec's full parameter length. Used to fold
/// many per-sample gradients into one accumulator without reallocating.
pub fn mlp_backward_into(
    spec: &MlpSpec,
    params: &[f64],
    cache: &ForwardCache,
    upstream: &[f64],
    weight: f64,
    out: &mut [f64],
) -> Result<()> {
    if upstream.len() != spec.output_dim {
        return Err(Error::Config(format!(
            "upstream length {} does not match spec output_dim {}",
            upstream.len(),
            spec.output_dim
        )));
    }
    let dims = spec.layer_dims();
    if cache.layer_inputs.len() != dims.len() {
        return Err(Error::Config("cache does not match spec".into()));
    }
    if out.len() != spec.param_count() {
        return Err(Error::Config("gradient accumulator has wrong length".into()));
    }
    let layers = unflatten(spec, params)?;

    // Offsets of each layer's weight block in the flat vector.
    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &(i, o) in &dims {
        offsets.push(off);
        off += (i + 1) * o;
    }

    let mut g = upstream.to_vec();
    for l in (0..dims.len()).rev() {
        let (in_dim, out_dim) = dims[l];
        let x = &cache.layer_inputs[l];
        let w = layers[l].0;
        let base = offsets[l];
        // dW = g xᵀ, db = g
        for o in 0..out_dim {
            let go = g[o] * weight;
            let row = base + o * in_dim;
            for i in 0..in_dim {
                out[row + i] += go * x[i];
            }
            out[base + in_dim * out_dim + o] += go;
        }
        if l > 0 {
            // Propagate: g ← Wᵀ g, then through the previous layer's tanh
            // using its cached post-activation a (tanh' = 1 − a²).
            let mut gprev = vec![0.0; in_dim];
            for o in 0..out_dim {
                let row = &w[o * in_dim..(o + 1) * in_dim];
                let go = g[o];
                for i in 0..in_dim {
                    gprev[i] += row[i] * go;
                }
            }
            for i in 0..in_dim {
                gprev[i] *= 1.0 - x[i] * x[i];
            }
            g = gprev;
        }
    }
    Ok(())
}

/// Seeded parameter initialization.
///
/// Hidden and output weights are drawn from U(−1/√fan_in, 1/√fan_in); the
/// final layer's weights are additionally multiplied by `final_layer_scale`
/// so a freshly built policy head starts near zero. Biases are zero.
pub fn init_params(spec: &MlpSpec, seed: u64, final_layer_scale: f64) -> Result<ParamVector> {
    if final_layer_scale <= 0.0 {
        return Err(Error::Config("final_layer_scale must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = spec.layer_dims();
    let mut v = Vec::with_capacity(spec.param_count());
    for (l, &(in_dim, out_dim)) in dims.iter().enumerate() {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let scale = if l == dims.len() - 1 { final_layer_scale } else { 1.0 };
        for _ in 0..in_dim * out_dim {
            let u: f64 = rng.random();
            v.push(scale * bound * (2.0 * u - 1.0));
        }
        v.extend(std::iter::repeat(0.0).take(out_dim));
    }
    Ok(ParamVector(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(i: usize, h: &[usize], o: usize) -> MlpSpec {
        MlpSpec::new(i, h.to_vec(), o).unwrap()
    }

    #[test]
    fn param_count_matches_layout() {
        let s = spec(4, &[64, 64], 2);
        assert_eq!(s.param_count(), (4 + 1) * 64 + (64 + 1) * 64 + (64 + 1) * 2);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let s = spec(3, &[5], 2);
        let p = ParamVector::zeros(s.param_count());
        let (y, _) = mlp_forward(&s, p.as_slice(), &[0.7, -1.3, 2.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer() {
        // no hidden layers, W = I, b = 0 → output = input
        let s = spec(3, &[], 3);
        let mut p = ParamVector::zeros(s.param_count());
        for i in 0..3 {
            p.0[i * 3 + i] = 1.0;
        }
        let x = [0.3, -0.9, 4.2];
        let (y, _) = mlp_forward(&s, p.as_slice(), &x).unwrap();
        assert_eq!(y, x.to_vec());
    }

    /// Independent forward oracle: plain per-layer matrix multiply written
    /// separately from the production code path.
    fn forward_oracle(s: &MlpSpec, p: &ParamVector, input: &[f64]) -> Vec<f64> {
        let mut off = 0;
        let mut x = input.to_vec();
        let dims = s.layer_dims();
        for (l, &(i_dim, o_dim)) in dims.iter().enumerate() {
            let mut y = vec![0.0; o_dim];
            for o in 0..o_dim {
                let mut acc = 0.0;
                for i in 0..i_dim {
                    acc += p.0[off + o * i_dim + i] * x[i];
                }
                y[o] = acc + p.0[off + i_dim * o_dim + o];
            }
            off += (i_dim + 1) * o_dim;
            if l + 1 < dims.len() {
                for yo in y.iter_mut() {
                    *yo = yo.tanh();
                }
            }
            x = y;
        }
        x
    }

    #[test]
    fn forward_matches_independent_oracle() {
        let s = spec(2, &[3], 1);
        let p = init_params(&s, 7, 1.0).unwrap();
        let (y, _) = mlp_forward(&s, p.as_slice(), &[0.4, -0.8]).unwrap();
        let y2 = forward_oracle(&s, &p, &[0.4, -0.8]);
        assert!((y[0] - y2[0]).abs() < 1e-12);
    }

    #[test]
    fn backward_zero_cotangent() {
        let s = spec(3, &[4], 2);
        let p = init_params(&s, 1, 1.0).unwrap();
        let (_, cache) = mlp_forward(&s, p.as_slice(), &[1.0, 2.0, 3.0]).unwrap();
        let g = mlp_backward(&s, p.as_slice(), &cache, &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_single_linear_layer() {
        // single affine layer: dW = g xᵀ, db = g
        let s = spec(2, &[], 2);
        let p = ParamVector(vec![0.5, -0.5, 1.0, 2.0, 0.1, 0.2]);
        let x = [3.0, -1.0];
        let (_, cache) = mlp_forward(&s, p.as_slice(), &x).unwrap();
        let g = mlp_backward(&s, p.as_slice(), &cache, &[2.0, -1.0]).unwrap();
        // dW rows: g0·x = [6, -2]; g1·x = [-3, 1]; db = [2, -1]
        assert_eq!(g.0, vec![6.0, -2.0, -3.0, 1.0, 2.0, -1.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::gradcheck::central_diff;
        let s = spec(3, &[64, 64], 2);
        let p = init_params(&s, 42, 1.0).unwrap();
        let x = [0.3, -0.7, 1.1];
        let up = [0.8, -1.4];
        let (_, cache) = mlp_forward(&s, p.as_slice(), &x).unwrap();
        let analytic = mlp_backward(&s, p.as_slice(), &cache, &up).unwrap();
        let f = |q: &ParamVector| {
            let (y, _) = mlp_forward(&s, q.as_slice(), &x).unwrap();
            y.iter().zip(up.iter()).map(|(a, b)| a * b).sum::<f64>()
        };
        let numeric = central_diff(f, &p, 1e-6);
        for (a, n) in analytic.iter().zip(numeric.iter()) {
            let denom = a.abs().max(n.abs()).max(1e-8);
            assert!((a - n).abs() / denom < 1e-5, "analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let s = spec(4, &[8], 2);
        let a = init_params(&s, 9, 0.01).unwrap();
        let b = init_params(&s, 9, 0.01).unwrap();
        assert_eq!(a, b);
        // bias blocks are zero
        let layers = unflatten(&s, a.as_slice()).unwrap();
        for (_, bias) in layers {
            assert!(bias.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn init_rejects_zero_scale() {
        let s = spec(4, &[8], 2);
        assert!(init_params(&s, 0, 0.0).is_err());
    }

    #[test]
    fn final_layer_scale_shrinks_rms() {
        // 10k final-layer draws: RMS ratio between scale 1e-2 and scale 1
        // builds should be 1e-2 within 5%.
        let s = spec(100, &[100], 100); // final layer has 10k weights
        let base = init_params(&s, 3, 1.0).unwrap();
        let scaled = init_params(&s, 3, 1e-2).unwrap();
        let dims = s.layer_dims();
        let final_w_len = dims[1].0 * dims[1].1;
        let final_off = (dims[0].0 + 1) * dims[0].1;
        let rms = |v: &ParamVector| {
            let w = &v.0[final_off..final_off + final_w_len];
            (w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64).sqrt()
        };
        let ratio = rms(&scaled) / rms(&base);
        assert!((ratio - 1e-2).abs() < 5e-4, "ratio {ratio}");
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut st = AdamState::new(1, 0.1);
        let mut p = ParamVector(vec![0.0]);
        adam_step(&mut st, &mut p, &ParamVector(vec![1.0]), false).unwrap();
        let delta = p.0[0].abs();
        assert!(delta <= 0.1 && delta >= 0.0999, "delta {delta}");
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn adam_null_gradient_is_noop() {
        let mut st = AdamState::new(3, 0.1);
        let mut p = ParamVector(vec![1.0, -2.0, 3.0]);
        adam_step(&mut st, &mut p, &ParamVector::zeros(3), false).unwrap();
        assert_eq!(p.0, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn adam_matches_independent_loop() {
        // 10 steps minimizing f(x)=x² from x=1, stepsize 0.1, against a
        // standalone Adam transcription.
        let mut st = AdamState::new(1, 0.1);
        let mut p = ParamVector(vec![1.0]);
        for _ in 0..10 {
            let g = ParamVector(vec![2.0 * p.0[0]]);
            adam_step(&mut st, &mut p, &g, false).unwrap();
        }

        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=10i32 {
            let g = 2.0 * x;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p.0[0] - x).abs() < 1e-12, "{} vs {}", p.0[0], x);
    }

    #[test]
    fn adam_maximize_equals_minimize_negated() {
        let g = ParamVector(vec![0.3, -1.7, 0.0, 5.0]);
        let neg = ParamVector(g.iter().map(|x| -x).collect());
        let mut st1 = AdamState::new(4, 0.05);
        let mut st2 = AdamState::new(4, 0.05);
        let mut p1 = ParamVector(vec![1.0, 2.0, 3.0, 4.0]);
        let mut p2 = p1.clone();
        for _ in 0..5 {
            adam_step(&mut st1, &mut p1, &g, true).unwrap();
            adam_step(&mut st2, &mut p2, &neg, false).unwrap();
        }
        assert_eq!(p1.0, p2.0);
    }

    #[test]
    fn adam_rejects_non_finite_grad() {
        let mut st = AdamState::new(2, 0.1);
        let mut p = ParamVector(vec![0.0, 0.0]);
        let err = adam_step(&mut st, &mut p, &ParamVector(vec![1.0, f64::NAN]), false);
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn flatten_unflatten_roundtrip(seed in 0u64..1000, i in 1usize..5, h in 1usize..6, o in 1usize..4) {
            let s = spec(i, &[h], o);
            let p = init_params(&s, seed, 0.5).unwrap();
            let layers: Vec<(Vec<f64>, Vec<f64>)> = unflatten(&s, p.as_slice())
                .unwrap()
                .into_iter()
                .map(|(w, b)| (w.to_vec(), b.to_vec()))
                .collect();
            let back = flatten_layers(&layers);
            prop_assert_eq!(p, back);
        }
    }
}
