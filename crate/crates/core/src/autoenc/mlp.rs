use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Loss;
use crate::math::{sigmoid, sqrt, tanh};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => tanh(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and the output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture of a mirrored autoencoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    /// Encoder hidden widths from the input side; the decoder uses them
    /// reversed.
    pub encoder: Vec<usize>,
    pub bottleneck: usize,
    pub encoder_activation: Activation,
    pub decoder_activation: Activation,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.bottleneck == 0 {
            return Err(Error::config("input and bottleneck widths must be positive"));
        }
        if self.bottleneck >= self.input {
            return Err(Error::config(format!(
                "bottleneck width {} must be smaller than input width {}",
                self.bottleneck, self.input
            )));
        }
        if self.encoder.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        Ok(())
    }

    /// Layer widths from input to output, e.g. `[8, 4, 2, 4, 8]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input];
        w.extend(&self.encoder);
        w.push(self.bottleneck);
        w.extend(self.encoder.iter().rev());
        w.push(self.input);
        w
    }

    /// Decoder hidden widths.
    pub fn decoder(&self) -> Vec<usize> {
        self.encoder.iter().rev().copied().collect()
    }

    fn activations(&self) -> Vec<Activation> {
        let n_enc = self.encoder.len() + 1;
        let n_dec = self.encoder.len() + 1;
        let mut acts = vec![self.encoder_activation; n_enc];
        acts.extend(vec![self.decoder_activation; n_dec - 1]);
        acts.push(Activation::Identity);
        acts
    }
}

/// Dense layer; `weights` is row-major with shape `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn affine(&self, x: &[f64], z: &mut [f64]) {
        for (o, zo) in z.iter_mut().enumerate() {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *zo = self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `None` for networks assembled directly from layers.
    pub spec: Option<MlpSpec>,
    pub seed: u64,
    pub layers: Vec<Layer>,
}

/// Gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &Mlp) -> Self {
        Self {
            weights: m.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: m.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|v| v.fill(0.0));
    }

    /// Flattened in the order of [`Mlp::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend(w);
            out.extend(b);
        }
        out
    }
}

/// Reusable buffers for one forward/backward pass.
pub(crate) struct Workspace {
    z: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    pub(crate) grads: Gradients,
}

impl Workspace {
    pub(crate) fn new(m: &Mlp) -> Self {
        let outs: Vec<usize> = m.layers.iter().map(|l| l.outputs).collect();
        let mut a = vec![vec![0.0; m.input_width()]];
        a.extend(outs.iter().map(|&o| vec![0.0; o]));
        Self {
            z: outs.iter().map(|&o| vec![0.0; o]).collect(),
            a,
            delta: outs.iter().map(|&o| vec![0.0; o]).collect(),
            grads: Gradients::zeros_like(m),
        }
    }

    pub(crate) fn clear(&mut self) {
        self.grads.clear();
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: &MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut r = rng::seeded(seed);
        let widths = spec.widths();
        let layers = widths
            .windows(2)
            .zip(spec.activations())
            .map(|(w, activation)| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = sqrt(6.0 / (inputs + outputs) as f64);
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| r.random_range(-limit..=limit)).collect(),
                    bias: vec![0.0; outputs],
                    activation,
                }
            })
            .collect();
        Ok(Self {
            spec: Some(spec.clone()),
            seed,
            layers,
        })
    }

    /// Assembles a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::config("network needs at least one layer"))?;
        let mut width = first.inputs;
        for l in &layers {
            if l.inputs != width || l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::config("layer shapes do not chain"));
            }
            width = l.outputs;
        }
        Ok(Self {
            spec: None,
            seed: 0,
            layers,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.inputs, l.outputs)).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(&l.weights);
            out.extend(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::Dimension {
                expected: self.input_width(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut cur = x.to_vec();
        for l in &self.layers {
            let mut z = vec![0.0; l.outputs];
            l.affine(&cur, &mut z);
            z.iter_mut().for_each(|v| *v = l.activation.apply(*v));
            cur = z;
        }
        Ok(cur)
    }

    /// Per-row reconstruction MAE.
    pub fn reconstruction_mae(&self, x: &[f64]) -> Result<f64> {
        let y = self.forward(x)?;
        Ok(Loss::Mae.value(x, &y))
    }

    fn forward_cached(&self, x: &[f64], ws: &mut Workspace) {
        ws.a[0].copy_from_slice(x);
        for (i, l) in self.layers.iter().enumerate() {
            let (prev, rest) = ws.a.split_at_mut(i + 1);
            l.affine(&prev[i], &mut ws.z[i]);
            for (a, z) in rest[0].iter_mut().zip(&ws.z[i]) {
                *a = l.activation.apply(*z);
            }
        }
    }

    /// Adds `scale` times the gradient of `loss(target, forward(x))` into
    /// `ws.grads` and returns the loss.
    pub(crate) fn accumulate(&self, x: &[f64], target: &[f64], loss: Loss, scale: f64, ws: &mut Workspace) -> f64 {
        self.forward_cached(x, ws);
        let last = self.layers.len() - 1;
        let out = &ws.a[last + 1];
        let value = loss.value(target, out);
        let width = out.len();
        for (o, d) in ws.delta[last].iter_mut().enumerate() {
            let a = ws.a[last + 1][o];
            *d = loss.derivative(target[o], a, width) * self.layers[last].activation.derivative(ws.z[last][o], a);
        }
        for i in (0..=last).rev() {
            let l = &self.layers[i];
            let input = &ws.a[i];
            let gw = &mut ws.grads.weights[i];
            let gb = &mut ws.grads.bias[i];
            for o in 0..l.outputs {
                let d = ws.delta[i][o] * scale;
                gb[o] += d;
                if d != 0.0 {
                    for (g, xi) in gw[o * l.inputs..(o + 1) * l.inputs].iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
            }
            if i > 0 {
                let prev = &self.layers[i - 1];
                let (lower, upper) = ws.delta.split_at_mut(i);
                for (j, dj) in lower[i - 1].iter_mut().enumerate() {
                    let mut s = 0.0;
                    for o in 0..l.outputs {
                        s += l.weights[o * l.inputs + j] * upper[0][o];
                    }
                    *dj = s * prev.activation.derivative(ws.z[i - 1][j], ws.a[i][j]);
                }
            }
        }
        value
    }

    /// Gradient of the reconstruction loss of a single row.
    pub fn gradient(&self, x: &[f64], loss: Loss) -> Result<(f64, Gradients)> {
        self.check(x)?;
        if self.output_width() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                actual: self.output_width(),
            });
        }
        let mut ws = Workspace::new(self);
        let value = self.accumulate(x, x, loss, 1.0, &mut ws);
        Ok((value, ws.grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, enc: &[usize], b: usize) -> MlpSpec {
        MlpSpec {
            input: d,
            encoder: enc.to_vec(),
            bottleneck: b,
            encoder_activation: Activation::Tanh,
            decoder_activation: Activation::Relu,
        }
    }

    #[test]
    fn mirrored_shapes() {
        let m = Mlp::init(&spec(8, &[4], 2), 1).unwrap();
        assert_eq!(m.shapes(), vec![(8, 4), (4, 2), (2, 4), (4, 8)]);
        assert_eq!(spec(8, &[6, 4], 2).widths(), vec![8, 6, 4, 2, 4, 6, 8]);
        assert_eq!(spec(8, &[6, 4], 2).decoder(), vec![4, 6]);
        let acts: Vec<Activation> = m.layers.iter().map(|l| l.activation).collect();
        assert_eq!(acts, vec![Activation::Tanh, Activation::Tanh, Activation::Relu, Activation::Identity]);
    }

    #[test]
    fn init_is_seeded_with_zero_bias() {
        let a = Mlp::init(&spec(5, &[3], 2), 9).unwrap();
        let b = Mlp::init(&spec(5, &[3], 2), 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), Mlp::init(&spec(5, &[3], 2), 10).unwrap().params());
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|v| *v == 0.0)));
        let limit = sqrt(6.0 / 8.0);
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn bottleneck_must_be_narrower() {
        assert!(Mlp::init(&spec(3, &[], 3), 0).is_err());
        assert!(Mlp::init(&spec(3, &[0], 2), 0).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = Mlp::init(&spec(4, &[3], 2), 0).unwrap();
        m.layers.iter_mut().for_each(|l| l.activation = Activation::Identity);
        let zeros = vec![0.0; m.n_params()];
        m.set_params(&zeros);
        assert_eq!(m.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let m = Mlp::from_layers(vec![Layer {
            inputs: 3,
            outputs: 3,
            weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            bias: vec![0.0; 3],
            activation: Activation::Identity,
        }])
        .unwrap();
        assert_eq!(m.forward(&[0.3, -2.0, 7.5]).unwrap(), vec![0.3, -2.0, 7.5]);
        assert!(m.forward(&[0.3]).is_err());
    }

    #[test]
    fn hand_computed_tanh_net() {
        let mut m = Mlp::init(
            &MlpSpec {
                input: 2,
                encoder: vec![],
                bottleneck: 1,
                encoder_activation: Activation::Tanh,
                decoder_activation: Activation::Tanh,
            },
            0,
        )
        .unwrap();
        m.set_params(&[0.5, -0.3, 0.1, 0.7, -1.2, 0.05, -0.2]);
        let y = m.forward(&[0.4, 0.9]).unwrap();
        assert!((y[0] - 0.07099370226717411).abs() < 1e-12);
        assert!((y[1] - -0.23598920388658418).abs() < 1e-12);
    }

    #[test]
    fn chain_check() {
        let l = |i, o| Layer {
            inputs: i,
            outputs: o,
            weights: vec![0.0; i * o],
            bias: vec![0.0; o],
            activation: Activation::Identity,
        };
        assert!(Mlp::from_layers(vec![l(3, 2), l(3, 3)]).is_err());
        assert!(Mlp::from_layers(vec![]).is_err());
    }
}
