use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::env::{compute_returns, EpisodeTrace};
use super::mlp::{Gradient, PolicyNetwork, OBSERVATION_DIM};
use crate::error::{Error, Result};

/// Update rule applied to `∇C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub const ADAM_DEFAULT: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };
}

/// Optimizer with its running state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: i32,
    first: Option<Gradient>,
    second: Option<Gradient>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            step: 0,
            first: None,
            second: None,
        }
    }

    /// Descends along `grad`.
    pub fn apply(&mut self, net: &mut PolicyNetwork, grad: &Gradient) {
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, g) in net.layers_mut().iter_mut().zip(&grad.layers) {
                    layer.weights -= &g.weights * lr;
                    layer.biases -= &g.biases * lr;
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let m = self.first.get_or_insert_with(|| Gradient::zeros_like(net));
                let v = self.second.get_or_insert_with(|| Gradient::zeros_like(net));
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for (((layer, g), m), v) in net
                    .layers_mut()
                    .iter_mut()
                    .zip(&grad.layers)
                    .zip(&mut m.layers)
                    .zip(&mut v.layers)
                {
                    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    };
                    for (((p, g), m), v) in layer
                        .weights
                        .iter_mut()
                        .zip(g.weights.iter())
                        .zip(m.weights.iter_mut())
                        .zip(v.weights.iter_mut())
                    {
                        update(p, *g, m, v);
                    }
                    for (((p, g), m), v) in layer
                        .biases
                        .iter_mut()
                        .zip(g.biases.iter())
                        .zip(m.biases.iter_mut())
                        .zip(v.biases.iter_mut())
                    {
                        update(p, *g, m, v);
                    }
                }
            }
        }
    }
}

struct Stacked {
    inputs: DMatrix<f64>,
    actions: DMatrix<f64>,
    returns: Vec<f64>,
}

fn stack(batch: &[EpisodeTrace], discount: f64) -> Stacked {
    let total: usize = batch.iter().map(EpisodeTrace::len).sum();
    let mut inputs = DMatrix::zeros(OBSERVATION_DIM, total);
    let mut actions = DMatrix::zeros(2, total);
    let mut returns = Vec::with_capacity(total);
    let mut col = 0;
    for trace in batch {
        let g = compute_returns(trace, discount);
        for (t, (s, a)) in trace.observations.iter().zip(&trace.actions).enumerate() {
            for i in 0..OBSERVATION_DIM {
                inputs[(i, col)] = s[i];
            }
            actions[(0, col)] = a[0];
            actions[(1, col)] = a[1];
            returns.push(g[t]);
            col += 1;
        }
    }
    Stacked {
        inputs,
        actions,
        returns,
    }
}

/// `C = (1/B) Σ_b Σ_j G_j/(2σ²) |a_j − μ_θ(s_j)|²`.
pub fn surrogate_cost(net: &PolicyNetwork, batch: &[EpisodeTrace], sigma: f64, discount: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let st = stack(batch, discount);
    let mu = net.forward_batch(st.inputs).output().clone();
    let mut total = 0.0;
    for (k, g) in st.returns.iter().enumerate() {
        let d2 = (st.actions[(0, k)] - mu[(0, k)]).powi(2) + (st.actions[(1, k)] - mu[(1, k)]).powi(2);
        total += g / (2.0 * sigma * sigma) * d2;
    }
    Ok(total / batch.len() as f64)
}

/// `∇_θ C` by backpropagation.
pub fn surrogate_gradient(net: &PolicyNetwork, batch: &[EpisodeTrace], sigma: f64, discount: f64) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let st = stack(batch, discount);
    let cache = net.forward_batch(st.inputs);
    let mu = cache.output();
    let scale = 1.0 / (sigma * sigma * batch.len() as f64);
    let d_mu = DMatrix::from_fn(2, st.returns.len(), |i, k| {
        -st.returns[k] * scale * (st.actions[(i, k)] - mu[(i, k)])
    });
    Ok(net.backward(&cache, &d_mu))
}

/// `∇_θ log π_θ(a|s)` for a single observation-action pair.
pub fn log_prob_gradient(net: &PolicyNetwork, observation: &[f64], action: [f64; 2], sigma: f64) -> Gradient {
    let cache = net.forward_batch(DMatrix::from_column_slice(observation.len(), 1, observation));
    let mu = cache.output();
    let d = DMatrix::from_fn(2, 1, |i, _| (action[i] - mu[(i, 0)]) / (sigma * sigma));
    net.backward(&cache, &d)
}

/// One descent step on the surrogate cost of `batch`.
pub fn reinforce_update(
    net: &mut PolicyNetwork,
    batch: &[EpisodeTrace],
    sigma: f64,
    discount: f64,
    optimizer: &mut Optimizer,
) -> Result<()> {
    let grad = surrogate_gradient(net, batch, sigma, discount)?;
    optimizer.apply(net, &grad);
    if !net.is_finite() {
        return Err(Error::NonFinite("policy parameters"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::env::rollout;
    use crate::dynamics::SystemParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (PolicyNetwork, Vec<EpisodeTrace>) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = PolicyNetwork::xavier(&[9, 4, 2], &mut rng).unwrap();
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let batch = (0..3).map(|_| rollout(&net, 0.5, 6, &p, &mut rng).unwrap()).collect();
        (net, batch)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (mut net, batch) = toy();
        let grad = surrogate_gradient(&net, &batch, 0.5, 1.0).unwrap().flatten();
        let theta = net.flatten();
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] += h;
            net.set_flat(&p).unwrap();
            let up = surrogate_cost(&net, &batch, 0.5, 1.0).unwrap();
            p[i] -= 2.0 * h;
            net.set_flat(&p).unwrap();
            let down = surrogate_cost(&net, &batch, 0.5, 1.0).unwrap();
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-6);
            assert!(rel < 1e-4, "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn surrogate_step_is_minus_return_times_score() {
        let (net, batch) = toy();
        let trace = &batch[0];
        let g = compute_returns(trace, 1.0);
        for j in 0..trace.len() {
            let single = EpisodeTrace {
                observations: vec![trace.observations[j]],
                actions: vec![trace.actions[j]],
                rewards: vec![g[j]],
            };
            let c = surrogate_gradient(&net, &[single], 0.5, 1.0).unwrap().flatten();
            let s = log_prob_gradient(&net, &trace.observations[j], trace.actions[j], 0.5).flatten();
            for (ci, si) in c.iter().zip(&s) {
                assert!((ci + g[j] * si).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_reward_and_exact_mean_give_zero_gradient() {
        let (mut net, mut batch) = toy();
        for t in &mut batch {
            t.rewards.iter_mut().for_each(|r| *r = 0.0);
        }
        let before = net.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.05);
        reinforce_update(&mut net, &batch, 0.5, 1.0, &mut opt).unwrap();
        assert_eq!(net, before);

        let (net, batch) = toy();
        let mut trace = batch[0].clone();
        for (s, a) in trace.observations.iter().zip(trace.actions.iter_mut()) {
            let mu = net.forward(s);
            *a = [mu[0], mu[1]];
        }
        let g = surrogate_gradient(&net, &[trace], 0.5, 1.0).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(matches!(surrogate_gradient(&net, &[], 0.5, 1.0), Err(Error::EmptyBatch)));
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let (mut net, batch) = toy();
        let before = net.flatten();
        let grad = surrogate_gradient(&net, &batch, 0.5, 1.0).unwrap().flatten();
        let mut opt = Optimizer::new(OptimizerKind::ADAM_DEFAULT, 1e-3);
        reinforce_update(&mut net, &batch, 0.5, 1.0, &mut opt).unwrap();
        for ((a, b), g) in net.flatten().iter().zip(&before).zip(&grad) {
            if g.abs() > 1e-6 {
                assert!(((b - a) - 1e-3 * g.signum()).abs() < 1e-5);
            }
        }
    }
}
