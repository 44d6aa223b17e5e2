use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBSERVATION_DIM: usize = 9;
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            weights: DMatrix::zeros(outputs, inputs),
            biases: DVector::zeros(outputs),
        }
    }
}

/// Multilayer perceptron `9 → hidden… → 2` with ReLU hidden units and a
/// tanh output, giving the policy mean `μ_θ(s) ∈ [−1, 1]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkRepr", try_from = "NetworkRepr")]
pub struct PolicyNetwork {
    layers: Vec<Layer>,
}

/// Activations of a batched forward pass; column `k` belongs to sample `k`.
pub struct ForwardCache {
    /// `inputs[l]` feeds layer `l`; the last entry is the network output.
    activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("non-empty cache")
    }
}

impl PolicyNetwork {
    pub fn sizes_for(hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![OBSERVATION_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(ACTION_DIM);
        sizes
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid("layer sizes", format!("{sizes:?} needs >= 2 positive entries")));
        }
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(PolicyNetwork { layers })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let (fan_out, fan_in) = layer.weights.shape();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            // row-major draw order so the stream does not depend on storage
            for r in 0..fan_out {
                for c in 0..fan_in {
                    layer.weights[(r, c)] = rng.random_range(-limit..=limit);
                }
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.ncols()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Forward pass on the columns of `inputs`.
    pub fn forward_batch(&self, inputs: DMatrix<f64>) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * activations.last().expect("seeded");
            for mut col in z.column_iter_mut() {
                col += &layer.biases;
            }
            if l == last {
                z.apply(|v| *v = v.tanh());
            } else {
                z.apply(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let x = DMatrix::from_column_slice(input.len(), 1, input);
        self.forward_batch(x).output().column(0).iter().copied().collect()
    }

    /// Backpropagates `d_output` (∂C/∂μ per column) through a cached pass and
    /// returns ∂C/∂θ summed over the columns.
    pub fn backward(&self, cache: &ForwardCache, d_output: &DMatrix<f64>) -> Gradient {
        let mut grads = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        let mut delta = d_output.clone();
        for l in (0..self.layers.len()).rev() {
            let out = &cache.activations[l + 1];
            if l == last {
                delta.zip_apply(out, |d, y| *d *= 1.0 - y * y);
            } else {
                delta.zip_apply(out, |d, y| {
                    if y <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            let input = &cache.activations[l];
            let weights = &delta * input.transpose();
            let biases = delta.column_sum();
            if l > 0 {
                delta = self.layers[l].weights.transpose() * &delta;
            }
            grads.push(Layer { weights, biases });
        }
        grads.reverse();
        Gradient { layers: grads }
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::invalid("parameters", format!("expected {} values", self.parameter_count())));
        }
        let mut it = flat.iter().copied();
        for layer in &mut self.layers {
            let (rows, cols) = layer.weights.shape();
            for r in 0..rows {
                for c in 0..cols {
                    layer.weights[(r, c)] = it.next().expect("length checked");
                }
            }
            for b in layer.biases.iter_mut() {
                *b = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        for r in 0..layer.weights.nrows() {
            out.extend(layer.weights.row(r).iter());
        }
        out.extend(layer.biases.iter());
    }
    out
}

/// Gradient with the same shape as a [`PolicyNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(net: &PolicyNetwork) -> Self {
        Gradient {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.weights.ncols(), l.weights.nrows()))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights *= k;
            l.biases *= k;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    sizes: Vec<usize>,
    layers: Vec<LayerRepr>,
}

impl From<PolicyNetwork> for NetworkRepr {
    fn from(net: PolicyNetwork) -> Self {
        NetworkRepr {
            sizes: net.sizes(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerRepr {
                    weights: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    biases: l.biases.iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkRepr> for PolicyNetwork {
    type Error = Error;

    fn try_from(repr: NetworkRepr) -> Result<Self> {
        let mut net = PolicyNetwork::zeros(&repr.sizes)?;
        if repr.layers.len() != net.layers.len() {
            return Err(Error::invalid("layers", "count does not match sizes"));
        }
        for (layer, r) in net.layers.iter_mut().zip(repr.layers) {
            let (rows, cols) = layer.weights.shape();
            if r.weights.len() != rows || r.weights.iter().any(|w| w.len() != cols) || r.biases.len() != rows {
                return Err(Error::invalid("layers", "shape does not match sizes"));
            }
            for (i, row) in r.weights.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    layer.weights[(i, j)] = *v;
                }
            }
            layer.biases = DVector::from_vec(r.biases);
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = PolicyNetwork::xavier(&PolicyNetwork::sizes_for(&[100, 50]), &mut rng).unwrap();
        let b = PolicyNetwork::xavier(&PolicyNetwork::sizes_for(&[100, 50, 30]), &mut rng).unwrap();
        assert_eq!(a.parameter_count(), 6152);
        assert_eq!(b.parameter_count(), 7642);
    }

    #[test]
    fn zero_network_outputs_zero_and_output_is_bounded() {
        let net = PolicyNetwork::zeros(&PolicyNetwork::sizes_for(&[4])).unwrap();
        assert_eq!(net.forward(&[1.0; 9]), vec![0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut big = PolicyNetwork::xavier(&PolicyNetwork::sizes_for(&[8, 8]), &mut rng).unwrap();
        let scaled: Vec<f64> = big.flatten().iter().map(|v| v * 50.0).collect();
        big.set_flat(&scaled).unwrap();
        for k in 0..20 {
            let x: Vec<f64> = (0..9).map(|i| ((i * 7 + k) as f64).sin() * 10.0).collect();
            assert!(big.forward(&x).iter().all(|m| m.abs() <= 1.0));
        }
    }

    #[test]
    fn xavier_limits_and_zero_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = PolicyNetwork::xavier(&[9, 100, 2], &mut rng).unwrap();
        let limit = (6.0f64 / 109.0).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(net.layers().iter().all(|l| l.biases.iter().all(|b| *b == 0.0)));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = PolicyNetwork::xavier(&[9, 4, 3, 2], &mut rng).unwrap();
        let x = DMatrix::from_fn(9, 3, |i, j| ((i + 3 * j) as f64 * 0.37).cos());
        let weights = DMatrix::from_fn(2, 3, |i, j| 0.5 - (i * 3 + j) as f64 * 0.2);
        let loss = |n: &PolicyNetwork| -> f64 { n.forward_batch(x.clone()).output().component_mul(&weights).sum() };
        let cache = net.forward_batch(x.clone());
        let grad = net.backward(&cache, &weights).flatten();
        let theta = net.flatten();
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] += h;
            net.set_flat(&p).unwrap();
            let up = loss(&net);
            p[i] -= 2.0 * h;
            net.set_flat(&p).unwrap();
            let down = loss(&net);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5 * fd.abs().max(1e-3), "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = PolicyNetwork::xavier(&[9, 3, 2], &mut rng).unwrap();
        let text = serde_json::to_string(&net).unwrap();
        let back: PolicyNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let bad = text.replace("[9,3,2]", "[9,4,2]");
        assert!(serde_json::from_str::<PolicyNetwork>(&bad).is_err());
    }
}
