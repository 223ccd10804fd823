use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Matrix, NeuralError, Parameters};
use crate::rng::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, NeuralError> {
        if weights.len() != inputs * outputs {
            return Err(NeuralError::ShapeMismatch {
                what: "layer weights",
                expected: inputs * outputs,
                got: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(NeuralError::ShapeMismatch { what: "layer bias", expected: outputs, got: bias.len() });
        }
        if !weights.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(NeuralError::NonFinite("layer parameters"));
        }
        Ok(Layer { inputs, outputs, weights, bias, activation })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn random(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let weights = (0..inputs * outputs).map(|_| rng::uniform(rng, -limit, limit)).collect();
        Layer { inputs, outputs, weights, bias: vec![0.0; outputs], activation }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = Matrix::zeros(x.rows, self.outputs);
        for b in 0..x.rows {
            let xr = x.row(b);
            let yr = y.row_mut(b);
            for (o, out) in yr.iter_mut().enumerate() {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                let z = self.bias[o] + dot(w, xr);
                *out = self.activation.apply(z);
            }
        }
        y
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociation.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Inputs to every layer plus the final output, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds at least the input")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NeuralError> {
        if layers.is_empty() {
            return Err(NeuralError::NoLayers);
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(NeuralError::ShapeMismatch {
                    what: "adjacent layer sizes",
                    expected: pair[0].outputs,
                    got: pair[1].inputs,
                });
            }
        }
        Ok(Mlp { layers })
    }

    /// Random network with sizes `[input, hidden.., output]`.
    pub fn random(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self, NeuralError> {
        if sizes.len() < 2 {
            return Err(NeuralError::NoLayers);
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                Layer::random(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Mlp::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    /// Multiplies the final layer's parameters by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let Some(layer) = self.layers.last_mut() else { return };
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w *= factor;
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<(), NeuralError> {
        if x.cols != self.input_dim() {
            return Err(NeuralError::ShapeMismatch { what: "network input", expected: self.input_dim(), got: x.cols });
        }
        if !x.data.iter().all(|v| v.is_finite()) {
            return Err(NeuralError::NonFinite("network input"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache), NeuralError> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("non-empty"));
            activations.push(next);
        }
        let out = activations.last().expect("non-empty").clone();
        Ok((out, ForwardCache { activations }))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, NeuralError> {
        self.check_input(x)?;
        let mut cur = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur);
        }
        Ok(cur)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        Ok(self.predict(&Matrix::row_vector(x))?.data)
    }

    /// Backpropagates `grad_out` (dL/dy, same shape as the output) and returns
    /// parameter gradients summed over the batch together with dL/dx.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Result<(MlpGrads, Matrix), NeuralError> {
        let out = cache.output();
        if grad_out.rows != out.rows || grad_out.cols != out.cols {
            return Err(NeuralError::ShapeMismatch {
                what: "output gradient",
                expected: out.rows * out.cols,
                got: grad_out.rows * grad_out.cols,
            });
        }
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_out.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];
            let mut dz = upstream;
            for (g, &yv) in dz.data.iter_mut().zip(&y.data) {
                *g *= layer.activation.derivative_from_output(yv);
            }
            let mut dw = vec![0.0; layer.weights.len()];
            let mut db = vec![0.0; layer.outputs];
            let mut dx = Matrix::zeros(x.rows, layer.inputs);
            for b in 0..x.rows {
                let xr = x.row(b);
                let dzr = dz.row(b);
                let dxr = dx.row_mut(b);
                for (o, &g) in dzr.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    db[o] += g;
                    axpy(g, xr, &mut dw[o * layer.inputs..(o + 1) * layer.inputs]);
                    axpy(g, &layer.weights[o * layer.inputs..(o + 1) * layer.inputs], dxr);
                }
            }
            grads.push(LayerGrads { weights: dw, bias: db });
            upstream = dx;
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, upstream))
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.outputs] })
                .collect(),
        }
    }
}

impl Parameters for Mlp {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn identity_layer_is_identity() {
        let layer = Layer::new(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.], vec![0.0; 3], Activation::Identity).unwrap();
        let mlp = Mlp::from_layers(vec![layer]).unwrap();
        assert_eq!(mlp.predict_one(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn half_squared_norm_gradient_is_wtwx() {
        // L = 0.5 |Wx|^2  =>  dL/dx = W^T W x.
        let w = vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0];
        let layer = Layer::new(3, 2, w.clone(), vec![0.0; 2], Activation::Identity).unwrap();
        let mlp = Mlp::from_layers(vec![layer]).unwrap();
        let x = [0.3, -0.7, 1.1];
        let (y, cache) = mlp.forward(&Matrix::row_vector(&x)).unwrap();
        let (_, dx) = mlp.backward(&cache, &y).unwrap();
        let wx = [w[0] * x[0] + w[1] * x[1] + w[2] * x[2], w[3] * x[0] + w[4] * x[1] + w[5] * x[2]];
        let expected: Vec<f64> = (0..3).map(|i| w[i] * wx[0] + w[3 + i] * wx[1]).collect();
        for (a, b) in dx.data.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let mut r = rng::seeded(0);
        let mlp = Mlp::random(&[3, 4, 2], Activation::Relu, Activation::Identity, &mut r).unwrap();
        assert!(matches!(mlp.predict_one(&[1.0, 2.0]), Err(NeuralError::ShapeMismatch { .. })));
        assert!(matches!(mlp.predict_one(&[1.0, f64::NAN, 0.0]), Err(NeuralError::NonFinite(_))));
        let a = Layer::random(3, 4, Activation::Relu, &mut r);
        let b = Layer::random(5, 2, Activation::Relu, &mut r);
        assert!(Mlp::from_layers(vec![a, b]).is_err());
        assert!(Layer::new(2, 1, vec![1.0], vec![0.0], Activation::Relu).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let mut r = rng::seeded(1);
        let mlp = Mlp::random(&[5, 8, 8, 3], Activation::Tanh, Activation::Identity, &mut r).unwrap();
        let x = Matrix::from_vec(2, 5, (0..10).map(|i| i as f64 * 0.1).collect()).unwrap();
        let a = mlp.predict(&x).unwrap();
        let b = mlp.predict(&x).unwrap();
        assert_eq!(a.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(mlp.forward(&x).unwrap().0, a);
    }
}
