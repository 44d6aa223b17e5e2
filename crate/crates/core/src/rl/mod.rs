//! REINFORCE with a Gaussian policy whose mean is an MLP.
//!
//! Each step of an episode observes the 9 real components of the
//! `(g, e, r)` block, samples an action around `μ_θ(s)`, squashes it into
//! `(Ω_s, Ω_p)` and propagates one segment. The only reward is `ρ_rr(T)`.
//! A batch of agents runs the same episode index in parallel, each with its
//! own random stream, and their surrogate costs are averaged for one update.

mod env;
mod mlp;
mod reinforce;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{transfer_fidelity, PulseSchedule, SystemParams};
use crate::error::{Error, Result};

pub use env::{
    action_to_controls, actions_to_schedule, compute_returns, log_prob, observe, rollout, rollout_batch, sample_action,
    EpisodeTrace, Observation,
};
pub use mlp::{ForwardCache, Gradient, Layer, PolicyNetwork, ACTION_DIM, OBSERVATION_DIM};
pub use reinforce::{
    log_prob_gradient, reinforce_update, surrogate_cost, surrogate_gradient, Optimizer, OptimizerKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Hidden (100, 50), σ = 0.5, batch 200, SGD with η = 0.05.
    ReinforceSgd,
    /// Hidden (100, 50, 30), σ = 0.5, batch 2, Adam with η = 1e-3.
    ReinforceAdam,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::ReinforceSgd => "reinforce-sgd",
            Preset::ReinforceAdam => "reinforce-adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub hidden: Vec<usize>,
    pub sigma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_steps: usize,
    pub discount: f64,
    pub optimizer: OptimizerKind,
    pub max_episodes: usize,
    /// Stop once the best reward has not improved for this many episodes.
    #[serde(default)]
    pub patience: Option<usize>,
    pub seed: u64,
}

impl TrainerConfig {
    pub fn preset(preset: Preset, seed: u64) -> Self {
        let base = TrainerConfig {
            hidden: vec![100, 50],
            sigma: 0.5,
            batch_size: 200,
            learning_rate: 0.05,
            n_steps: 30,
            discount: 1.0,
            optimizer: OptimizerKind::Sgd,
            max_episodes: 2000,
            patience: None,
            seed,
        };
        match preset {
            Preset::ReinforceSgd => base,
            Preset::ReinforceAdam => TrainerConfig {
                hidden: vec![100, 50, 30],
                batch_size: 2,
                learning_rate: 1e-3,
                optimizer: OptimizerKind::ADAM_DEFAULT,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::invalid("discount", "must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "layer widths must be positive"));
        }
        Ok(())
    }
}

/// Random stream of agent `agent` in episode `episode`.
pub fn agent_rng(seed: u64, episode: usize, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((episode as u64) << 24) | agent as u64);
    rng
}

/// Stream used to initialize the network weights.
fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

/// The highest-reward action sequence seen during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestPulses {
    pub reward: f64,
    pub episode: usize,
    pub agent: usize,
    pub actions: Vec<[f64; 2]>,
    pub schedule: PulseSchedule,
}

impl BestPulses {
    /// Re-evolves the schedule through the exact propagator.
    pub fn replay(&self, params: &SystemParams) -> Result<f64> {
        transfer_fidelity(&self.schedule, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean_reward: f64,
    pub best_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub network: PolicyNetwork,
    pub best: Option<BestPulses>,
    pub curve: Vec<CurvePoint>,
}

pub fn initial_network(config: &TrainerConfig) -> Result<PolicyNetwork> {
    PolicyNetwork::xavier(&PolicyNetwork::sizes_for(&config.hidden), &mut init_rng(config.seed))
}

pub fn train(config: &TrainerConfig, params: &SystemParams) -> Result<TrainOutcome> {
    train_with(config, params, |_| {})
}

/// Like [`train`], calling `progress` after every episode.
pub fn train_with(
    config: &TrainerConfig,
    params: &SystemParams,
    mut progress: impl FnMut(&CurvePoint),
) -> Result<TrainOutcome> {
    config.validate()?;
    params.validate()?;
    let mut network = initial_network(config)?;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let mut best: Option<BestPulses> = None;
    let mut curve = Vec::with_capacity(config.max_episodes);
    let mut since_improvement = 0;

    for episode in 0..config.max_episodes {
        let mut rngs: Vec<ChaCha8Rng> = (0..config.batch_size)
            .map(|agent| agent_rng(config.seed, episode, agent))
            .collect();
        let batch = rollout_batch(&network, config.sigma, config.n_steps, params, &mut rngs)?;

        let mean_reward = batch.iter().map(EpisodeTrace::reward).sum::<f64>() / batch.len() as f64;
        // first agent wins ties
        let (agent, leader) = batch
            .iter()
            .enumerate()
            .fold((0, &batch[0]), |acc, (k, t)| if t.reward() > acc.1.reward() { (k, t) } else { acc });
        if best.as_ref().is_none_or(|b| leader.reward() > b.reward) {
            best = Some(BestPulses {
                reward: leader.reward(),
                episode,
                agent,
                actions: leader.actions.clone(),
                schedule: leader.schedule(params)?,
            });
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        let point = CurvePoint {
            episode,
            mean_reward,
            best_reward: best.as_ref().map_or(0.0, |b| b.reward),
        };
        progress(&point);
        curve.push(point);

        reinforce_update(&mut network, &batch, config.sigma, config.discount, &mut optimizer)?;
        if config.patience.is_some_and(|p| since_improvement >= p) {
            break;
        }
    }
    Ok(TrainOutcome { network, best, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> TrainerConfig {
        TrainerConfig {
            hidden: vec![8],
            batch_size: 4,
            n_steps: 5,
            max_episodes: 6,
            ..TrainerConfig::preset(Preset::ReinforceSgd, seed)
        }
    }

    #[test]
    fn presets() {
        let sgd = TrainerConfig::preset(Preset::ReinforceSgd, 1);
        assert_eq!((sgd.sigma, sgd.batch_size, sgd.learning_rate), (0.5, 200, 0.05));
        assert_eq!(initial_network(&sgd).unwrap().parameter_count(), 6152);
        let adam = TrainerConfig::preset(Preset::ReinforceAdam, 1);
        assert_eq!(adam.batch_size, 2);
        assert_eq!(initial_network(&adam).unwrap().parameter_count(), 7642);
        assert!(matches!(adam.optimizer, OptimizerKind::Adam { .. }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        for broken in [
            TrainerConfig { sigma: 0.0, ..tiny(0) },
            TrainerConfig { batch_size: 0, ..tiny(0) },
            TrainerConfig { discount: 1.5, ..tiny(0) },
            TrainerConfig { n_steps: 0, ..tiny(0) },
        ] {
            assert!(train(&broken, &p).is_err());
        }
    }

    #[test]
    fn zero_episodes() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let config = TrainerConfig { max_episodes: 0, ..tiny(3) };
        let out = train(&config, &p).unwrap();
        assert!(out.curve.is_empty());
        assert!(out.best.is_none());
        assert_eq!(out.network, initial_network(&config).unwrap());
    }

    #[test]
    fn training_is_reproducible_and_best_replays() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let a = train(&tiny(4), &p).unwrap();
        let b = train(&tiny(4), &p).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let best = a.best.unwrap();
        assert!((best.replay(&p).unwrap() - best.reward).abs() < 1e-9);
        for w in a.curve.windows(2) {
            assert!(w[1].best_reward >= w[0].best_reward);
        }
        let c = train(&tiny(5), &p).unwrap();
        assert_ne!(c.curve, a.curve);
    }

    #[test]
    fn patience_stops_early() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let config = TrainerConfig {
            patience: Some(1),
            max_episodes: 50,
            ..tiny(6)
        };
        assert!(train(&config, &p).unwrap().curve.len() < 50);
    }

    #[test]
    fn agent_streams_differ() {
        use rand::Rng;
        let draw = |e, a| agent_rng(1, e, a).random::<u64>();
        assert_ne!(draw(0, 0), draw(0, 1));
        assert_ne!(draw(0, 0), draw(1, 0));
        assert_eq!(draw(3, 7), draw(3, 7));
    }
}
