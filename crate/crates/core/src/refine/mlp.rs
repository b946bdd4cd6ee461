//! Small fully-connected ReLU network with manual backprop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Start of the row-major `outputs x inputs` weights; biases follow.
    offset: usize,
}

impl Layer {
    fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }
    fn end(&self) -> usize {
        self.bias_offset() + self.outputs
    }
}

/// `input -> hidden (ReLU) -> hidden (ReLU) -> output`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    /// Post-ReLU outputs of each hidden layer.
    hidden: Vec<Vec<f64>>,
}

impl Mlp {
    /// He-uniform hidden layers, zero output layer.
    pub fn new(inputs: usize, width: usize, outputs: usize, seed: u64) -> Self {
        let dims = [inputs, width, width, outputs];
        let mut layers = Vec::new();
        let mut offset = 0;
        for w in dims.windows(2) {
            let l = Layer { inputs: w[0], outputs: w[1], offset };
            offset = l.end();
            layers.push(l);
        }
        let mut params = vec![0.0; offset];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &layers[..layers.len() - 1] {
            let bound = (6.0 / l.inputs as f64).sqrt();
            for p in &mut params[l.offset..l.bias_offset()] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Mlp { layers, params }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameter range of the output layer (weights and biases).
    pub fn output_layer_range(&self) -> std::ops::Range<usize> {
        let l = self.layers[self.layers.len() - 1];
        l.offset..l.end()
    }

    pub fn forward(&self, x: &[f64], acts: &mut Activations, out: &mut [f64]) {
        let n = self.layers.len();
        acts.hidden.resize(n - 1, Vec::new());
        for (li, l) in self.layers.iter().enumerate() {
            let (done, rest) = acts.hidden.split_at_mut(li);
            let input: &[f64] = if li == 0 { x } else { &done[li - 1] };
            let w = &self.params[l.offset..l.bias_offset()];
            let b = &self.params[l.bias_offset()..l.end()];
            let last = li + 1 == n;
            let y: &mut [f64] = if last {
                out
            } else {
                rest[0].resize(l.outputs, 0.0);
                &mut rest[0]
            };
            for o in 0..l.outputs {
                let row = &w[o * l.inputs..(o + 1) * l.inputs];
                let v = row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + b[o];
                y[o] = if last { v } else { v.max(0.0) };
            }
            if last {
                break;
            }
        }
    }

    /// Accumulates parameter gradients into `grad` and writes the input
    /// gradient to `dx`.
    pub fn backward(&self, x: &[f64], acts: &Activations, dout: &[f64], grad: &mut [f64], dx: &mut [f64]) {
        let mut delta: Vec<f64> = dout.to_vec();
        for li in (0..self.layers.len()).rev() {
            let l = self.layers[li];
            let input: &[f64] = if li == 0 { x } else { &acts.hidden[li - 1] };
            let w = &self.params[l.offset..l.bias_offset()];
            let (gw, gb) = grad[l.offset..l.end()].split_at_mut(l.inputs * l.outputs);
            let mut next = vec![0.0; l.inputs];
            for o in 0..l.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &w[o * l.inputs..(o + 1) * l.inputs];
                let grow = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                for i in 0..l.inputs {
                    grow[i] += d * input[i];
                    next[i] += d * row[i];
                }
            }
            if li > 0 {
                // ReLU derivative of the previous layer's output.
                for (n, &a) in next.iter_mut().zip(&acts.hidden[li - 1]) {
                    if a <= 0.0 {
                        *n = 0.0;
                    }
                }
            } else {
                dx.copy_from_slice(&next);
            }
            delta = next;
        }
    }
}
