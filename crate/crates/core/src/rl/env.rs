use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{PolicyNetwork, OBSERVATION_DIM};
use crate::dynamics::{fidelity, DensityMatrix, Level, Propagation, PulseSchedule, SegmentMap, SystemParams};
use crate::error::{Error, Result};

pub type Observation = [f64; OBSERVATION_DIM];

/// `(ρ_gg, ρ_rr, ρ_ee, Re ρ_ge, Im ρ_ge, Re ρ_gr, Im ρ_gr, Re ρ_er, Im ρ_er)`;
/// the sink is not observed.
pub fn observe(state: &DensityMatrix) -> Observation {
    use Level::*;
    let ge = state.get(G, E);
    let gr = state.get(G, R);
    let er = state.get(E, R);
    [
        state.population(G),
        state.population(R),
        state.population(E),
        ge.re,
        ge.im,
        gr.re,
        gr.im,
        er.re,
        er.im,
    ]
}

/// `Ω₀ / (1 + e^{−3a})` for each component of `a = (a_S, a_P)`; returns
/// `(Ω_s, Ω_p)`.
pub fn action_to_controls(action: [f64; 2], omega_0: f64) -> (f64, f64) {
    let squash = |a: f64| omega_0 / (1.0 + (-3.0 * a).exp());
    (squash(action[0]), squash(action[1]))
}

pub fn sample_action<R: Rng + ?Sized>(mu: [f64; 2], sigma: f64, rng: &mut R) -> [f64; 2] {
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    [mu[0] + sigma * z0, mu[1] + sigma * z1]
}

/// Log-density of the isotropic Gaussian policy.
pub fn log_prob(action: [f64; 2], mu: [f64; 2], sigma: f64) -> f64 {
    let d2 = (action[0] - mu[0]).powi(2) + (action[1] - mu[1]).powi(2);
    -(2.0 * std::f64::consts::PI * sigma * sigma).ln() - d2 / (2.0 * sigma * sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub observations: Vec<Observation>,
    pub actions: Vec<[f64; 2]>,
    /// `R_1 … R_N`: zero except the last, which is `ρ_rr(T)`.
    pub rewards: Vec<f64>,
}

impl EpisodeTrace {
    pub fn reward(&self) -> f64 {
        self.rewards.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Pulses the actions encode, one segment per step.
    pub fn schedule(&self, params: &SystemParams) -> Result<PulseSchedule> {
        actions_to_schedule(&self.actions, params)
    }
}

pub fn actions_to_schedule(actions: &[[f64; 2]], params: &SystemParams) -> Result<PulseSchedule> {
    let (stokes, pump): (Vec<f64>, Vec<f64>) = actions
        .iter()
        .map(|a| action_to_controls(*a, params.omega_max))
        .unzip();
    PulseSchedule::piecewise_constant(params.t_final, pump, stokes)
}

/// `G_t = Σ_k Γ^k R_{t+k+1}`.
pub fn compute_returns(trace: &EpisodeTrace, discount: f64) -> Vec<f64> {
    let mut returns = vec![0.0; trace.rewards.len()];
    let mut acc = 0.0;
    for t in (0..trace.rewards.len()).rev() {
        acc = trace.rewards[t] + discount * acc;
        returns[t] = acc;
    }
    returns
}

fn step(state: &DensityMatrix, action: [f64; 2], params: &SystemParams, dt: f64) -> Result<DensityMatrix> {
    let (omega_s, omega_p) = action_to_controls(action, params.omega_max);
    let next = SegmentMap::new(params, omega_p, omega_s, dt, Propagation::EffectiveHamiltonian)?.apply(state);
    if !next.is_finite() {
        return Err(Error::NonFinite("environment state"));
    }
    Ok(next)
}

fn finish(state: &DensityMatrix, observations: Vec<Observation>, actions: Vec<[f64; 2]>) -> Result<EpisodeTrace> {
    let mut rewards = vec![0.0; actions.len()];
    if let Some(last) = rewards.last_mut() {
        *last = fidelity(state)?;
    }
    Ok(EpisodeTrace {
        observations,
        actions,
        rewards,
    })
}

/// One episode from `|g⟩⟨g|` with `n_steps` equal segments.
pub fn rollout<R: Rng + ?Sized>(
    net: &PolicyNetwork,
    sigma: f64,
    n_steps: usize,
    params: &SystemParams,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    let dt = params.t_final / n_steps as f64;
    let mut state = DensityMatrix::pure(Level::G);
    let mut observations = Vec::with_capacity(n_steps);
    let mut actions = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let s = observe(&state);
        let mu = net.forward(&s);
        let a = sample_action([mu[0], mu[1]], sigma, rng);
        state = step(&state, a, params, dt)?;
        observations.push(s);
        actions.push(a);
    }
    finish(&state, observations, actions)
}

/// Runs one episode per RNG, stepping all agents together so the policy is
/// evaluated as one matrix product per step. Agent `k` produces exactly
/// what [`rollout`] would with `rngs[k]`.
pub fn rollout_batch<R: Rng + Send>(
    net: &PolicyNetwork,
    sigma: f64,
    n_steps: usize,
    params: &SystemParams,
    rngs: &mut [R],
) -> Result<Vec<EpisodeTrace>> {
    use rayon::prelude::*;
    let dt = params.t_final / n_steps as f64;
    let batch = rngs.len();
    let mut states = vec![DensityMatrix::pure(Level::G); batch];
    let mut observations: Vec<Vec<Observation>> = vec![Vec::with_capacity(n_steps); batch];
    let mut actions: Vec<Vec<[f64; 2]>> = vec![Vec::with_capacity(n_steps); batch];
    for _ in 0..n_steps {
        let obs: Vec<Observation> = states.iter().map(observe).collect();
        let inputs = DMatrix::from_fn(OBSERVATION_DIM, batch, |i, k| obs[k][i]);
        let mu = net.forward_batch(inputs).output().clone();
        let step_actions: Vec<[f64; 2]> = rngs
            .iter_mut()
            .enumerate()
            .map(|(k, rng)| sample_action([mu[(0, k)], mu[(1, k)]], sigma, rng))
            .collect();
        states = states
            .par_iter()
            .zip(&step_actions)
            .map(|(state, a)| step(state, *a, params, dt))
            .collect::<Result<Vec<_>>>()?;
        for k in 0..batch {
            observations[k].push(obs[k]);
            actions[k].push(step_actions[k]);
        }
    }
    states
        .iter()
        .zip(observations)
        .zip(actions)
        .map(|((state, o), a)| finish(state, o, a))
        .collect()
}
