//! Experiment orchestration behind the `qctrl` binary: configuration,
//! parameter sweeps, the scaling check and result files.
//!
//! Every output is a pure function of the configuration and seed. Worker
//! count only changes how fast results arrive, never their bytes.

mod config;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, fidelity, transfer_fidelity, DensityMatrix, Level, PulseSchedule, SystemParams};
use crate::error::{Error, Result};
use crate::oct::{self, Budget, OctMethod, OptimizationResult};
use crate::rl::{self, BestPulses, CurvePoint, PolicyNetwork, Preset, TrainerConfig};
use crate::stirap::{self, StirapDiagnostics, StirapShape};

pub use config::{
    default_grid, load_config, parse_config, ExperimentConfig, GridPoint, Mode, OctOptions, RlOptions, StirapOptions,
};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "QCTRL_WORKERS";

/// Points the sweep always covers once `Tγ = 5` is requested.
pub const REFERENCE_POINTS: [GridPoint; 3] = [
    GridPoint { t_gamma: 5.0, t_omega_max: 7.4 },
    GridPoint { t_gamma: 5.0, t_omega_max: 13.8 },
    GridPoint { t_gamma: 5.0, t_omega_max: 100.0 },
];

pub fn params_for(point: GridPoint) -> Result<SystemParams> {
    point.validate()?;
    SystemParams::dimensionless(point.t_gamma, point.t_omega_max)
}

/// The requested grid with any missing reference point appended.
pub fn sweep_grid(grid: &[GridPoint]) -> Vec<GridPoint> {
    let mut points = grid.to_vec();
    if grid.iter().any(|p| p.t_gamma == 5.0) {
        for reference in REFERENCE_POINTS {
            if !points.contains(&reference) {
                points.push(reference);
            }
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t_gamma: f64,
    pub t_omega_max: f64,
    pub inefficiency: Option<f64>,
    pub fidelity: Option<f64>,
    pub seed: u64,
    pub method: OctMethod,
    pub restart: Option<usize>,
    /// `ok`, or the error that stopped this point.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t_gamma: f64,
    pub t_omega_max: f64,
    pub result: Option<OptimizationResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub points: Vec<SweepPoint>,
}

/// One multistart per grid point, returned in grid order. A failing point
/// is recorded and the sweep carries on.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    if config.grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let grid = sweep_grid(&config.grid);
    let opts = &config.oct;
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&point| {
            let outcome = params_for(point).and_then(|params| {
                oct::multistart(
                    &params,
                    opts.segments,
                    opts.method,
                    opts.restarts,
                    config.seed,
                    Budget::evaluations(opts.budget),
                )
            });
            let (result, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepPoint {
                t_gamma: point.t_gamma,
                t_omega_max: point.t_omega_max,
                result,
                error,
            }
        })
        .collect();
    let records = points
        .iter()
        .map(|p| SweepRecord {
            t_gamma: p.t_gamma,
            t_omega_max: p.t_omega_max,
            inefficiency: p.result.as_ref().map(|r| r.best_cost),
            fidelity: p.result.as_ref().map(|r| r.fidelity),
            seed: config.seed,
            method: opts.method,
            restart: p.result.as_ref().map(|r| r.restart_index),
            status: p.error.clone().unwrap_or_else(|| "ok".into()),
        })
        .collect();
    Ok(SweepOutput { records, points })
}

pub fn write_sweep_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Fidelities of `schedule` on `params` and of the equivalent protocol with
/// `T → αT`, `γ → γ/α` and amplitudes divided by `α`.
pub fn verify_scaling(params: &SystemParams, schedule: &PulseSchedule, alpha_scale: f64) -> Result<(f64, f64)> {
    let scaled_params = params.rescaled(alpha_scale)?;
    let scaled_schedule = schedule.rescaled(alpha_scale)?;
    Ok((
        transfer_fidelity(schedule, params)?,
        transfer_fidelity(&scaled_schedule, &scaled_params)?,
    ))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub params: SystemParams,
    pub schedule: PulseSchedule,
    pub fidelity: f64,
    /// Populations `(g, e, r, s)` at every segment boundary.
    pub populations: Vec<[f64; 4]>,
    pub trajectory: Vec<DensityMatrix>,
}

pub fn simulate(params: &SystemParams, schedule: &PulseSchedule) -> Result<SimulateReport> {
    let trajectory = evolve(&DensityMatrix::pure(Level::G), schedule, params)?;
    Ok(SimulateReport {
        params: *params,
        schedule: schedule.clone(),
        fidelity: fidelity(trajectory.last().expect("non-empty trajectory"))?,
        populations: trajectory.iter().map(DensityMatrix::populations).collect(),
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StirapReport {
    pub t_gamma: f64,
    pub t_omega_max: f64,
    pub shape: StirapShape,
    pub schedule: PulseSchedule,
    pub diagnostics: StirapDiagnostics,
}

/// Shape for `params`: `tau` and `width` are in units of `T`.
pub fn stirap_shape(params: &SystemParams, options: &StirapOptions) -> Result<StirapShape> {
    let base = StirapShape::default_for(params);
    StirapShape::new(
        base.omega_peak,
        options.tau.map_or(base.tau, |t| t * params.t_final),
        options.width.map_or(base.width, |w| w * params.t_final),
        base.alpha_scale,
    )
}

pub fn run_stirap(point: GridPoint, options: &StirapOptions) -> Result<StirapReport> {
    let params = params_for(point)?;
    let shape = stirap_shape(&params, options)?;
    let schedule = stirap::gaussian_schedule(&shape, &params, options.segments.unwrap_or(oct::DEFAULT_SEGMENTS))?;
    let diagnostics = stirap::diagnostics(&shape, &schedule, &params)?;
    Ok(StirapReport {
        t_gamma: point.t_gamma,
        t_omega_max: point.t_omega_max,
        shape,
        schedule,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OctReport {
    pub t_gamma: f64,
    pub t_omega_max: f64,
    pub result: OptimizationResult,
    /// Best cost reached by each restart, in restart order.
    pub restart_costs: Vec<f64>,
    pub schedule: PulseSchedule,
    pub populations: Vec<[f64; 4]>,
}

pub fn run_oct(point: GridPoint, options: &OctOptions, seed: u64) -> Result<OctReport> {
    let params = params_for(point)?;
    let all = oct::multistart_all(
        &params,
        options.segments,
        options.method,
        options.restarts,
        seed,
        Budget::evaluations(options.budget),
    )?;
    let restart_costs = all.iter().map(|r| r.best_cost).collect();
    let result = oct::best_of(all).expect("at least one restart");
    Ok(OctReport {
        t_gamma: point.t_gamma,
        t_omega_max: point.t_omega_max,
        schedule: result.schedule(&params)?,
        populations: oct::population_trajectory(&result, &params)?,
        restart_costs,
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlEvaluation {
    pub t_gamma: f64,
    pub t_omega_max: f64,
    pub preset: Preset,
    pub seed: u64,
    pub episodes_run: usize,
    pub best_reward: Option<f64>,
    pub best_episode: Option<usize>,
    /// Best pulses re-evolved with the training decay rate.
    pub replay_fidelity: Option<f64>,
    /// Best pulses re-evolved with `γ = 0`.
    pub closed_system_fidelity: Option<f64>,
    pub closed_system_populations: Option<Vec<[f64; 4]>>,
    pub counter_intuitive: Option<bool>,
    pub final_mean_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlRun {
    pub config: TrainerConfig,
    pub network: PolicyNetwork,
    pub best: Option<BestPulses>,
    pub curve: Vec<CurvePoint>,
    pub evaluation: RlEvaluation,
}

pub fn trainer_config(options: &RlOptions, seed: u64) -> TrainerConfig {
    let mut config = TrainerConfig::preset(options.preset, seed);
    if let Some(episodes) = options.episodes {
        config.max_episodes = episodes;
    }
    if let Some(steps) = options.steps {
        config.n_steps = steps;
    }
    config.patience = options.patience;
    config
}

pub fn run_rl(point: GridPoint, options: &RlOptions, seed: u64, progress: impl FnMut(&CurvePoint)) -> Result<RlRun> {
    let params = params_for(point)?;
    let config = trainer_config(options, seed);
    let outcome = rl::train_with(&config, &params, progress)?;
    let closed = SystemParams { gamma: 0.0, ..params };
    let (replay, closed_fidelity, closed_populations) = match &outcome.best {
        Some(best) => {
            let report = simulate(&closed, &best.schedule)?;
            (Some(best.replay(&params)?), Some(report.fidelity), Some(report.populations))
        }
        None => (None, None, None),
    };
    let evaluation = RlEvaluation {
        t_gamma: point.t_gamma,
        t_omega_max: point.t_omega_max,
        preset: options.preset,
        seed,
        episodes_run: outcome.curve.len(),
        best_reward: outcome.best.as_ref().map(|b| b.reward),
        best_episode: outcome.best.as_ref().map(|b| b.episode),
        replay_fidelity: replay,
        closed_system_fidelity: closed_fidelity,
        closed_system_populations: closed_populations,
        counter_intuitive: outcome.best.as_ref().map(|b| b.schedule.is_counter_intuitive()),
        final_mean_reward: outcome.curve.last().map(|c| c.mean_reward),
    };
    Ok(RlRun {
        config,
        network: outcome.network,
        best: outcome.best,
        curve: outcome.curve,
        evaluation,
    })
}

pub fn write_learning_curve(curve: &[CurvePoint], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for point in curve {
        writer.serialize(point)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes `learning_curve.csv`, `best_pulses.json`, `policy.json` and
/// `evaluation.json` into `dir`.
pub fn write_rl_outputs(run: &RlRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_learning_curve(&run.curve, &dir.join("learning_curve.csv"))?;
    write_json(&run.best, &dir.join("best_pulses.json"))?;
    write_json(&run.network, &dir.join("policy.json"))?;
    write_json(&run.evaluation, &dir.join("evaluation.json"))?;
    Ok(())
}

/// Writes `sweep.csv` and `sweep_results.json` into `dir`.
pub fn write_sweep_outputs(output: &SweepOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_sweep_csv(&output.records, &dir.join("sweep.csv"))?;
    write_json(&output.points, &dir.join("sweep_results.json"))?;
    Ok(())
}
