//! Fixed-topology multilayer perceptron: affine layers with ELU between them
//! and an identity output layer.
//!
//! All passes are generic over the activation scalar `T` and the weight scalar
//! `W`. Running the reverse pass on [`Dual`] activations seeded with an input
//! tangent yields the directional derivative of the parameter gradient, which
//! is how the input-gradient penalty is differentiated exactly
//! (forward-over-reverse).

use std::ops::Mul;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dual::{Dual, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Widths from input to output, inclusive. `[in, out]` is a single affine layer.
    pub layer_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of the row-major `fan_out × fan_in` weight block.
    pub weights: usize,
    /// Offset of the `fan_out` bias block.
    pub biases: usize,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        let spec = Self { layer_sizes };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds `[input, hidden.., output]`.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least an input and an output width, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be positive, got {:?}",
                self.layer_sizes
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn layers(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let layout = LayerLayout {
                    fan_in,
                    fan_out,
                    weights: offset,
                    biases: offset + fan_in * fan_out,
                };
                offset += fan_in * fan_out + fan_out;
                layout
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Flat parameter storage; the layout is given by the owning [`MlpSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self(vec![0.0; spec.num_params()])
    }

    pub fn check(&self, spec: &MlpSpec) -> Result<()> {
        if self.0.len() != spec.num_params() {
            return Err(Error::Dimension {
                expected: spec.num_params(),
                got: self.0.len(),
            });
        }
        if let Some(i) = self.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weights uniform in `±sqrt(1/fan_in)`, biases zero.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamVector::zeros(spec);
    for layer in spec.layers() {
        let bound = (1.0 / layer.fan_in as f64).sqrt();
        for w in &mut params.0[layer.weights..layer.biases] {
            *w = rng.random_range(-bound..=bound);
        }
    }
    params
}

#[inline]
pub fn elu<T: Scalar>(z: T) -> T {
    if z.re() > 0.0 {
        z
    } else {
        z.exp() - T::from(1.0)
    }
}

#[inline]
pub fn elu_grad<T: Scalar>(z: T) -> T {
    if z.re() > 0.0 {
        T::from(1.0)
    } else {
        z.exp()
    }
}

/// Activations retained by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// `inputs[l]` is the input of affine layer `l` (post-activation of the layer before).
    pub inputs: Vec<Vec<T>>,
    /// `pre[l]` is the affine output of layer `l`; the last entry is the network output.
    pub pre: Vec<Vec<T>>,
}

impl<T: Copy> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.pre.last().expect("nonempty cache")
    }
}

pub fn forward_cached<T, W>(spec: &MlpSpec, params: &[W], input: &[T]) -> Result<ForwardCache<T>>
where
    W: Scalar,
    T: Scalar + From<W> + Mul<W, Output = T>,
{
    if input.len() != spec.input_dim() {
        return Err(Error::Dimension {
            expected: spec.input_dim(),
            got: input.len(),
        });
    }
    if params.len() != spec.num_params() {
        return Err(Error::Dimension {
            expected: spec.num_params(),
            got: params.len(),
        });
    }
    let layers = spec.layers();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut current = input.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let weights = &params[layer.weights..layer.biases];
        let biases = &params[layer.biases..layer.biases + layer.fan_out];
        let z: Vec<T> = weights
            .chunks_exact(layer.fan_in)
            .zip(biases)
            .map(|(row, &b)| {
                let mut acc = T::from(b);
                for (&a, &w) in current.iter().zip(row) {
                    acc += a * w;
                }
                acc
            })
            .collect();
        let next = if l + 1 < layers.len() {
            z.iter().map(|&v| elu(v)).collect()
        } else {
            Vec::new()
        };
        inputs.push(std::mem::replace(&mut current, next));
        pre.push(z);
    }
    Ok(ForwardCache { inputs, pre })
}

/// Reverse pass for `⟨output_grad, output⟩`. Parameter gradients are added
/// into `param_grad` (which must have the spec's parameter count); the input
/// gradient is returned.
pub fn backward_into<T, W>(
    spec: &MlpSpec,
    params: &[W],
    cache: &ForwardCache<T>,
    output_grad: &[T],
    param_grad: &mut [T],
) -> Vec<T>
where
    W: Scalar,
    T: Scalar + From<W> + Mul<W, Output = T>,
{
    assert_eq!(output_grad.len(), spec.output_dim(), "output gradient width");
    assert_eq!(param_grad.len(), spec.num_params(), "parameter gradient length");
    let layers = spec.layers();
    let mut delta = output_grad.to_vec();
    for (l, layer) in layers.iter().enumerate().rev() {
        let input = &cache.inputs[l];
        {
            let (gw, gb) = param_grad[layer.weights..layer.biases + layer.fan_out]
                .split_at_mut(layer.fan_in * layer.fan_out);
            for ((row, b), &d) in gw.chunks_exact_mut(layer.fan_in).zip(gb).zip(&delta) {
                *b += d;
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
        }
        let weights = &params[layer.weights..layer.biases];
        let mut prev = vec![T::default(); layer.fan_in];
        for (row, &d) in weights.chunks_exact(layer.fan_in).zip(&delta) {
            for (p, &w) in prev.iter_mut().zip(row) {
                *p += d * w;
            }
        }
        if l > 0 {
            for (p, &z) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                *p = *p * elu_grad(z);
            }
        }
        delta = prev;
    }
    delta
}

pub fn forward(params: &ParamVector, spec: &MlpSpec, input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward_cached(spec, &params.0, input)?.pre.pop().expect("nonempty"))
}

/// Exact gradient of `⟨output_grad, output⟩` with respect to the parameters.
pub fn backward_params(
    params: &ParamVector,
    spec: &MlpSpec,
    cache: &ForwardCache<f64>,
    output_grad: &[f64],
) -> Vec<f64> {
    let mut grad = vec![0.0; spec.num_params()];
    backward_into(spec, &params.0, cache, output_grad, &mut grad);
    grad
}

fn require_scalar(spec: &MlpSpec) -> Result<()> {
    match spec.output_dim() {
        1 => Ok(()),
        n => Err(Error::NonScalarOutput(n)),
    }
}

/// `∇_x D(x)` for a scalar-output network.
pub fn input_gradient(params: &ParamVector, spec: &MlpSpec, input: &[f64]) -> Result<Vec<f64>> {
    require_scalar(spec)?;
    let cache = forward_cached(spec, &params.0, input)?;
    let mut scratch = vec![0.0; spec.num_params()];
    Ok(backward_into(spec, &params.0, &cache, &[1.0], &mut scratch))
}

/// Output value, `‖∇_x D‖²`, and the exact parameter gradient of that
/// penalty added into `param_grad` with weight `scale`.
///
/// The parameter gradient is `2·∇_φ⟨v, ∇_x D⟩` with `v = ∇_x D` held fixed,
/// obtained by running the reverse pass on dual activations seeded with `v`.
pub fn grad_penalty_into(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    scale: f64,
    param_grad: &mut [f64],
    dual_scratch: &mut Vec<Dual>,
) -> Result<(f64, f64)> {
    grad_penalty_with_value_into(spec, params, input, scale, |_| 0.0, param_grad, dual_scratch)
}

/// As [`grad_penalty_into`], additionally adding `value_weight(D)·∇_φ D`.
pub fn grad_penalty_with_value_into(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    scale: f64,
    value_weight: impl Fn(f64) -> f64,
    param_grad: &mut [f64],
    dual_scratch: &mut Vec<Dual>,
) -> Result<(f64, f64)> {
    require_scalar(spec)?;
    let cache = forward_cached(spec, params, input)?;
    let value = cache.output()[0];
    let mut dvalue = vec![0.0; spec.num_params()];
    let gx = backward_into(spec, params, &cache, &[1.0], &mut dvalue);
    let penalty: f64 = gx.iter().map(|g| g * g).sum();

    let seeded: Vec<Dual> = input.iter().zip(&gx).map(|(&x, &v)| Dual::new(x, v)).collect();
    let dcache = forward_cached(spec, params, &seeded)?;
    dual_scratch.clear();
    dual_scratch.resize(spec.num_params(), Dual::default());
    backward_into(spec, params, &dcache, &[Dual::from(1.0)], dual_scratch);
    let w = value_weight(value);
    for ((g, d), dv) in param_grad.iter_mut().zip(dual_scratch.iter()).zip(&dvalue) {
        *g += scale * 2.0 * d.eps + w * dv;
    }
    Ok((value, penalty))
}

/// `(‖∇_x D‖², ∇_φ ‖∇_x D‖²)`.
pub fn grad_penalty_backward(
    params: &ParamVector,
    spec: &MlpSpec,
    input: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; spec.num_params()];
    let mut scratch = Vec::new();
    let (_, penalty) = grad_penalty_into(spec, &params.0, input, 1.0, &mut grad, &mut scratch)?;
    Ok((penalty, grad))
}

/// Parameter-space variant: `‖∇_φ D‖²` and its exact gradient `2·H_φφ ∇_φ D`
/// (Hessian-vector product via dual parameters).
pub fn param_grad_penalty_into(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    scale: f64,
    param_grad: &mut [f64],
) -> Result<(f64, f64)> {
    param_grad_penalty_with_value_into(spec, params, input, scale, |_| 0.0, param_grad)
}

/// As [`param_grad_penalty_into`], additionally adding `value_weight(D)·∇_φ D`.
pub fn param_grad_penalty_with_value_into(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    scale: f64,
    value_weight: impl Fn(f64) -> f64,
    param_grad: &mut [f64],
) -> Result<(f64, f64)> {
    require_scalar(spec)?;
    let cache = forward_cached(spec, params, input)?;
    let value = cache.output()[0];
    let mut gp = vec![0.0; spec.num_params()];
    backward_into(spec, params, &cache, &[1.0], &mut gp);
    let penalty: f64 = gp.iter().map(|g| g * g).sum();

    let dparams: Vec<Dual> = params.iter().zip(&gp).map(|(&p, &v)| Dual::new(p, v)).collect();
    let dinput: Vec<Dual> = input.iter().map(|&x| Dual::from(x)).collect();
    let dcache = forward_cached(spec, &dparams, &dinput)?;
    let mut dgrad = vec![Dual::default(); spec.num_params()];
    backward_into(spec, &dparams, &dcache, &[Dual::from(1.0)], &mut dgrad);
    let w = value_weight(value);
    for ((g, d), dv) in param_grad.iter_mut().zip(&dgrad).zip(&gp) {
        *g += scale * 2.0 * d.eps + w * dv;
    }
    Ok((value, penalty))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_params(spec: &MlpSpec, rng: &mut impl Rng) -> ParamVector {
        ParamVector(
            (0..spec.num_params())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn spec_validation() {
        assert!(MlpSpec::new(vec![3]).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1]).is_err());
        let spec = MlpSpec::new(vec![3, 4, 2]).unwrap();
        assert_eq!(spec.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
        let layers = spec.layers();
        assert_eq!(layers[1].weights, 16);
        assert_eq!(layers[1].biases, 24);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let spec = MlpSpec::new(vec![5, 7, 3]).unwrap();
        let a = init_params(&spec, 11);
        assert_eq!(a, init_params(&spec, 11));
        assert_ne!(a, init_params(&spec, 12));
        for layer in spec.layers() {
            assert!(a.0[layer.biases..layer.biases + layer.fan_out]
                .iter()
                .all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_weight_bound() {
        let spec = MlpSpec::new(vec![400, 250]).unwrap();
        let p = init_params(&spec, 3);
        let bound = (1.0f64 / 400.0).sqrt();
        let layer = spec.layers()[0];
        let weights = &p.0[layer.weights..layer.biases];
        assert_eq!(weights.len(), 100_000);
        let max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(max <= bound);
        assert!(max > 0.99 * bound);
    }

    #[test]
    fn affine_net_is_exact() {
        let spec = MlpSpec::new(vec![2, 2]).unwrap();
        let p = ParamVector(vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]);
        let y = forward(&p, &spec, &[1.0, -1.0]).unwrap();
        assert_eq!(y, vec![1.0 - 2.0 + 0.5, 3.0 - 4.0 - 0.5]);
    }

    #[test]
    fn elu_values() {
        assert!((elu(-1.0f64) - (-0.632_120_558_828_557_7)).abs() < 1e-12);
        assert_eq!(elu(0.0f64), 0.0);
        assert_eq!(elu(2.5f64), 2.5);
        assert_eq!(elu_grad(0.0f64), 1.0);
        assert_eq!(elu_grad(1e-300f64), 1.0);
        for eps in [1e-3, 1e-6, 1e-9] {
            assert!((elu(eps) - elu(-eps)).abs() < 2.0 * eps);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = MlpSpec::new(vec![3, 2]).unwrap();
        let p = ParamVector::zeros(&spec);
        assert!(matches!(
            forward(&p, &spec, &[1.0, 2.0]),
            Err(Error::Dimension { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn input_gradient_requires_scalar_output() {
        let spec = MlpSpec::new(vec![3, 2]).unwrap();
        let p = ParamVector::zeros(&spec);
        assert!(matches!(
            input_gradient(&p, &spec, &[0.0; 3]),
            Err(Error::NonScalarOutput(2))
        ));
    }

    #[test]
    fn affine_gradients_are_analytic() {
        let spec = MlpSpec::new(vec![3, 1]).unwrap();
        let p = ParamVector(vec![0.5, -1.5, 2.0, 0.25]);
        let x = [1.0, 2.0, -3.0];
        let gx = input_gradient(&p, &spec, &x).unwrap();
        assert_eq!(gx, vec![0.5, -1.5, 2.0]);

        let cache = forward_cached(&spec, &p.0, &x[..]).unwrap();
        let g = backward_params(&p, &spec, &cache, &[0.7]);
        assert_eq!(g[3], 0.7);
        assert!(backward_params(&p, &spec, &cache, &[0.0]).iter().all(|&v| v == 0.0));

        let (pen, gp) = grad_penalty_backward(&p, &spec, &x).unwrap();
        assert!((pen - (0.25 + 2.25 + 4.0)).abs() < 1e-15);
        assert_eq!(&gp[..3], &[1.0, -3.0, 4.0]);
        assert_eq!(gp[3], 0.0);

        let scaled = ParamVector(vec![1.5, -4.5, 6.0, 0.25]);
        let (pen3, _) = grad_penalty_backward(&scaled, &spec, &x).unwrap();
        assert!((pen3 - 9.0 * pen).abs() < 1e-12);
    }

    #[test]
    fn linear_regime_gradient_is_weight_product() {
        // Positive weights and inputs keep every ELU in its identity branch.
        let spec = MlpSpec::new(vec![2, 3, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ParamVector(
            (0..spec.num_params())
                .map(|_| rng.random_range(0.1..1.0))
                .collect(),
        );
        let gx = input_gradient(&p, &spec, &[10.0, 20.0]).unwrap();
        let l = spec.layers();
        let w1 = &p.0[l[0].weights..l[0].biases];
        let w2 = &p.0[l[1].weights..l[1].biases];
        for i in 0..2 {
            let expect: f64 = (0..3).map(|h| w2[h] * w1[h * 2 + i]).sum();
            assert!((gx[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let sizes = vec![
                rng.random_range(1..=8),
                rng.random_range(1..=8),
                rng.random_range(1..=4),
            ];
            let spec = MlpSpec::new(sizes).unwrap();
            let p = random_params(&spec, &mut rng);
            let x: Vec<f64> = (0..spec.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g_out: Vec<f64> = (0..spec.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cache = forward_cached(&spec, &p.0, &x[..]).unwrap();
            let grad = backward_params(&p, &spec, &cache, &g_out);
            let objective = |q: &ParamVector| -> f64 {
                forward(q, &spec, &x).unwrap().iter().zip(&g_out).map(|(a, b)| a * b).sum()
            };
            let h = 1e-6;
            for k in 0..spec.num_params() {
                let mut plus = p.clone();
                plus.0[k] += h;
                let mut minus = p.clone();
                minus.0[k] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                if fd.abs().max(grad[k].abs()) > 1e-7 {
                    worst = worst.max(rel_err(grad[k], fd));
                }
            }
        }
        assert!(worst <= 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn penalty_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let spec = MlpSpec::new(vec![rng.random_range(1..=6), rng.random_range(1..=8), 1]).unwrap();
            let p = random_params(&spec, &mut rng);
            let x: Vec<f64> = (0..spec.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, grad) = grad_penalty_backward(&p, &spec, &x).unwrap();
            let penalty = |q: &ParamVector| -> f64 {
                input_gradient(q, &spec, &x).unwrap().iter().map(|g| g * g).sum()
            };
            let h = 1e-6;
            for k in 0..spec.num_params() {
                let mut plus = p.clone();
                plus.0[k] += h;
                let mut minus = p.clone();
                minus.0[k] -= h;
                let fd = (penalty(&plus) - penalty(&minus)) / (2.0 * h);
                if fd.abs().max(grad[k].abs()) > 1e-7 {
                    worst = worst.max(rel_err(grad[k], fd));
                }
            }
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn param_space_penalty_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = MlpSpec::new(vec![3, 5, 1]).unwrap();
        for _ in 0..20 {
            let p = random_params(&spec, &mut rng);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut grad = vec![0.0; spec.num_params()];
            param_grad_penalty_into(&spec, &p.0, &x, 1.0, &mut grad).unwrap();
            let penalty = |q: &[f64]| -> f64 {
                let cache = forward_cached(&spec, q, &x[..]).unwrap();
                let mut g = vec![0.0; spec.num_params()];
                backward_into(&spec, q, &cache, &[1.0], &mut g);
                g.iter().map(|v| v * v).sum()
            };
            let h = 1e-6;
            for k in 0..spec.num_params() {
                let mut plus = p.0.clone();
                plus[k] += h;
                let mut minus = p.0.clone();
                minus[k] -= h;
                let fd = (penalty(&plus) - penalty(&minus)) / (2.0 * h);
                if fd.abs().max(grad[k].abs()) > 1e-7 {
                    assert!(rel_err(grad[k], fd) < 1e-4, "param {k}: {} vs {fd}", grad[k]);
                }
            }
        }
    }
}
