//! Fixed-topology dense networks with explicit forward and backward passes.
//!
//! Layer weights are row-major `(out, in)`; batches are `(n, in)`.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activations,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::spec("an MLP needs at least an input and an output layer"));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::spec("layer sizes must be positive"));
        }
        if self.activations.len() != self.layer_sizes.len() - 1 {
            return Err(Error::spec(format!(
                "{} activations for {} weight layers",
                self.activations.len(),
                self.layer_sizes.len() - 1
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// One affine layer. Also used as the gradient container for that layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros_like(&self) -> Dense {
        Dense {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn all_finite(&self) -> bool {
        self.weights.all_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub layers: Vec<Dense>,
}

/// Parameter gradients, shaped like [`MlpParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params.layers.iter().map(Dense::zeros_like).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Dense::all_finite)
    }

    /// Accumulate `other` into `self`.
    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.as_mut_slice().iter_mut().zip(b.weights.as_slice()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).copied())
    }
}

/// Intermediate values of a forward pass, consumed by [`mlp_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    /// `activations[0]` is the input batch, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Matrix>,
    pre: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("non-empty cache")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }
}

pub fn init_params(spec: &MlpSpec, rng: &mut Rand) -> Result<MlpParams> {
    spec.validate()?;
    let mut layers = Vec::with_capacity(spec.num_layers());
    for (l, act) in spec.activations.iter().enumerate() {
        let fan_in = spec.layer_sizes[l];
        let fan_out = spec.layer_sizes[l + 1];
        let std = match act {
            Activation::Relu => (2.0 / fan_in as f64).sqrt(),
            _ => (1.0 / fan_in as f64).sqrt(),
        };
        let data = (0..fan_in * fan_out).map(|_| std * rng.normal()).collect();
        layers.push(Dense {
            weights: Matrix::from_vec(fan_out, fan_in, data)?,
            bias: vec![0.0; fan_out],
        });
    }
    Ok(MlpParams {
        spec: spec.clone(),
        layers,
    })
}

impl MlpParams {
    /// Checks layer shapes against the spec and that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.layers.len() != self.spec.num_layers() {
            return Err(Error::spec(format!(
                "{} layers stored for a {}-layer spec",
                self.layers.len(),
                self.spec.num_layers()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (out, inp) = (self.spec.layer_sizes[l + 1], self.spec.layer_sizes[l]);
            if layer.weights.shape() != (out, inp) || layer.bias.len() != out {
                return Err(Error::spec(format!(
                    "layer {l} has weights {:?} and bias {}, expected ({out}, {inp}) and {out}",
                    layer.weights.shape(),
                    layer.bias.len()
                )));
            }
            if !layer.all_finite() {
                return Err(Error::numeric(format!("layer {l} holds non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.spec.input_width()
    }

    pub fn output_width(&self) -> usize {
        self.spec.output_width()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Forward pass for a single input vector without keeping a cache.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_width() {
            return Err(Error::spec(format!(
                "input width {} does not match network input {}",
                x.len(),
                self.input_width()
            )));
        }
        let mut current = x.to_vec();
        for (layer, &act) in self.layers.iter().zip(&self.spec.activations) {
            let w = &layer.weights;
            let next: Vec<f64> = (0..w.rows())
                .map(|o| act.apply(dot(w.row(o), &current) + layer.bias[o]))
                .collect();
            current = next;
        }
        if current.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("network produced a non-finite output"));
        }
        Ok(current)
    }

    /// Batched forward pass without keeping a cache.
    pub fn forward_batch(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(mlp_forward(self, batch)?.0)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn affine(input: &Matrix, layer: &Dense) -> Matrix {
    let n = input.rows();
    let out = layer.weights.rows();
    let mut z = Matrix::zeros(n, out);
    for i in 0..n {
        let x = input.row(i);
        let zi = z.row_mut(i);
        for (o, zo) in zi.iter_mut().enumerate() {
            *zo = dot(layer.weights.row(o), x) + layer.bias[o];
        }
    }
    z
}

pub fn mlp_forward(params: &MlpParams, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    if batch.cols() != params.input_width() {
        return Err(Error::spec(format!(
            "batch width {} does not match network input {}",
            batch.cols(),
            params.input_width()
        )));
    }
    if !batch.all_finite() {
        return Err(Error::numeric("non-finite value in network input"));
    }
    let mut activations = Vec::with_capacity(params.layers.len() + 1);
    let mut pre = Vec::with_capacity(params.layers.len());
    activations.push(batch.clone());
    for (layer, &act) in params.layers.iter().zip(&params.spec.activations) {
        let z = affine(activations.last().expect("input pushed"), layer);
        let a = z.map(|v| act.apply(v));
        pre.push(z);
        activations.push(a);
    }
    let output = activations.last().expect("at least one layer").clone();
    if !output.all_finite() {
        return Err(Error::numeric("network produced a non-finite output"));
    }
    Ok((
        output,
        ForwardCache {
            layer_sizes: params.spec.layer_sizes.clone(),
            activations,
            pre,
        },
    ))
}

/// Back-propagates `output_grad` (dLoss/dOutput) through the cached pass.
///
/// Returns parameter gradients and dLoss/dInput.
pub fn mlp_backward(
    params: &MlpParams,
    cache: &ForwardCache,
    output_grad: &Matrix,
) -> Result<(MlpGrads, Matrix)> {
    if cache.layer_sizes != params.spec.layer_sizes || cache.pre.len() != params.layers.len() {
        return Err(Error::spec("forward cache was produced by a different network"));
    }
    let n = cache.input().rows();
    if output_grad.shape() != (n, params.output_width()) {
        return Err(Error::spec(format!(
            "output gradient shape {:?} does not match cached output ({n}, {})",
            output_grad.shape(),
            params.output_width()
        )));
    }

    let mut grads: Vec<Dense> = Vec::with_capacity(params.layers.len());
    let mut upstream = output_grad.clone();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let act = params.spec.activations[l];
        let z = &cache.pre[l];
        let y = &cache.activations[l + 1];
        let a_in = &cache.activations[l];
        let (out, inp) = layer.weights.shape();

        let mut delta = upstream;
        for i in 0..n {
            let (dr, zr, yr) = (delta.row_mut(i), z.row(i), y.row(i));
            for o in 0..out {
                dr[o] *= act.derivative(zr[o], yr[o]);
            }
        }

        let mut gw = Matrix::zeros(out, inp);
        let mut gb = vec![0.0; out];
        let mut down = Matrix::zeros(n, inp);
        for i in 0..n {
            let d = delta.row(i);
            let x = a_in.row(i);
            for o in 0..out {
                let g = d[o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                for (w, xv) in gw.row_mut(o).iter_mut().zip(x) {
                    *w += g * xv;
                }
                for (dv, wv) in down.row_mut(i).iter_mut().zip(layer.weights.row(o)) {
                    *dv += g * wv;
                }
            }
        }
        grads.push(Dense {
            weights: gw,
            bias: gb,
        });
        upstream = down;
    }
    grads.reverse();
    let grads = MlpGrads { layers: grads };
    if !grads.all_finite() || !upstream.all_finite() {
        return Err(Error::numeric("non-finite gradient in backward pass"));
    }
    Ok((grads, upstream))
}
