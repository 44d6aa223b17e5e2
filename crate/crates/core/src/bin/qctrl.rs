use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qctrl::dynamics::PulseSchedule;
use qctrl::harness::{self, ExperimentConfig, GridPoint, Mode};
use qctrl::oct::OctMethod;
use qctrl::rl::Preset;

/// Three-level population transfer: propagation, STIRAP, optimal control
/// and reinforcement learning.
#[derive(Parser)]
#[command(name = "qctrl", version)]
struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; required here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (simulate, stirap, oct) or directory (rl, sweep).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = harness::WORKERS_ENV)]
    workers: Option<usize>,

    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Point {
    /// Decay rate times duration, Tγ.
    #[arg(long, allow_negative_numbers = true)]
    t_gamma: Option<f64>,
    /// Amplitude bound times duration, TΩ_max.
    #[arg(long, allow_negative_numbers = true)]
    t_omega_max: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve |g⟩ under a schedule (default: the reference STIRAP pair).
    Simulate {
        #[command(flatten)]
        point: Point,
        /// Schedule JSON to evolve.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        segments: Option<usize>,
    },
    /// Reference Gaussian STIRAP schedule and its adiabaticity diagnostics.
    Stirap {
        #[command(flatten)]
        point: Point,
        /// Half-separation of the pulses, in units of T.
        #[arg(long)]
        tau: Option<f64>,
        /// 1/e half-width of each pulse, in units of T.
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        segments: Option<usize>,
    },
    /// Multi-start optimization of piecewise-constant pulses.
    Oct {
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<OctMethod>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Cost evaluations allowed per restart.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Train a REINFORCE agent.
    Rl {
        #[command(flatten)]
        point: Point,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Steps (segments) per episode.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Stop after this many episodes without a new best reward.
        #[arg(long)]
        patience: Option<usize>,
    },
    /// OCT over the cartesian grid of Tγ and TΩ_max values.
    Sweep {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        t_gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        t_omega_max: Vec<f64>,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<OctMethod>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Simulate { .. } => Mode::Simulate,
            Command::Stirap { .. } => Mode::Stirap,
            Command::Oct { .. } => Mode::Oct,
            Command::Rl { .. } => Mode::Rl,
            Command::Sweep { .. } => Mode::Sweep,
        }
    }
}

fn base_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => harness::load_config(path)?,
        None => {
            let seed = cli
                .seed
                .ok_or_else(|| qctrl::Error::Config("a seed is required (--seed or config)".into()))?;
            ExperimentConfig::new(cli.command.mode(), seed)
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.out.is_some() {
        config.out = cli.out.clone();
    }
    Ok(config)
}

/// Flags first, then the first grid point of an explicit config, then the
/// command default.
fn resolve_point(cli: &Cli, config: &ExperimentConfig, point: Point, default: GridPoint) -> GridPoint {
    let from_config = cli.config.as_ref().and_then(|_| config.grid.first().copied());
    let fallback = from_config.unwrap_or(default);
    GridPoint {
        t_gamma: point.t_gamma.unwrap_or(fallback.t_gamma),
        t_omega_max: point.t_omega_max.unwrap_or(fallback.t_omega_max),
    }
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>, name: &str) -> anyhow::Result<()> {
    match out {
        Some(path) if path.is_dir() => harness::write_json(value, &path.join(name))?,
        Some(path) => harness::write_json(value, path)?,
        None => print!("{}", harness::to_json(value)?),
    }
    Ok(())
}

fn output_dir(config: &ExperimentConfig) -> anyhow::Result<&Path> {
    config
        .out
        .as_deref()
        .ok_or_else(|| anyhow!(qctrl::Error::Config("--out <dir> is required".into())))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .context("configuring worker pool")?;
    }
    let mut config = base_config(&cli)?;
    let quiet = cli.quiet;
    let default_point = GridPoint { t_gamma: 5.0, t_omega_max: 20.0 };

    match &cli.command {
        Command::Simulate { point, schedule, segments } => {
            let point = resolve_point(&cli, &config, *point, default_point);
            let params = harness::params_for(point)?;
            let schedule: PulseSchedule = match schedule {
                Some(path) => harness::read_json(path)?,
                None => {
                    if let Some(n) = segments {
                        config.stirap.segments = Some(*n);
                    }
                    harness::run_stirap(point, &config.stirap)?.schedule
                }
            };
            let report = harness::simulate(&params, &schedule)?;
            emit_json(&report, config.out.as_deref(), "simulate.json")?;
        }
        Command::Stirap { point, tau, width, segments } => {
            let point = resolve_point(&cli, &config, *point, GridPoint { t_gamma: 0.0, t_omega_max: 100.0 });
            config.stirap.tau = tau.or(config.stirap.tau);
            config.stirap.width = width.or(config.stirap.width);
            config.stirap.segments = segments.or(config.stirap.segments);
            config.validate()?;
            let report = harness::run_stirap(point, &config.stirap)?;
            emit_json(&report, config.out.as_deref(), "stirap.json")?;
        }
        Command::Oct { point, segments, method, restarts, budget } => {
            let point = resolve_point(&cli, &config, *point, default_point);
            let opts = &mut config.oct;
            opts.segments = segments.unwrap_or(opts.segments);
            opts.method = method.unwrap_or(opts.method);
            opts.restarts = restarts.unwrap_or(opts.restarts);
            opts.budget = budget.unwrap_or(opts.budget);
            config.validate()?;
            let report = harness::run_oct(point, &config.oct, config.seed)?;
            if !quiet {
                eprintln!("oct: best cost {:.6e} (restart {})", report.result.best_cost, report.result.restart_index);
            }
            emit_json(&report, config.out.as_deref(), "oct.json")?;
        }
        Command::Rl { point, preset, steps, episodes, patience } => {
            let point = resolve_point(&cli, &config, *point, default_point);
            let opts = &mut config.rl;
            opts.preset = preset.unwrap_or(opts.preset);
            opts.steps = steps.or(opts.steps);
            opts.episodes = episodes.or(opts.episodes);
            opts.patience = patience.or(opts.patience);
            config.validate()?;
            let dir = output_dir(&config)?.to_path_buf();
            let run = harness::run_rl(point, &config.rl, config.seed, |p| {
                if !quiet && p.episode % 100 == 0 {
                    eprintln!("rl: episode {} mean {:.4} best {:.4}", p.episode, p.mean_reward, p.best_reward);
                }
            })?;
            harness::write_rl_outputs(&run, &dir)?;
        }
        Command::Sweep { t_gamma, t_omega_max, segments, method, restarts, budget } => {
            if !t_gamma.is_empty() || !t_omega_max.is_empty() {
                if t_gamma.is_empty() || t_omega_max.is_empty() {
                    return Err(qctrl::Error::Config("give both --t-gamma and --t-omega-max".into()).into());
                }
                config.grid = t_gamma
                    .iter()
                    .flat_map(|&g| t_omega_max.iter().map(move |&w| GridPoint { t_gamma: g, t_omega_max: w }))
                    .collect();
            }
            let opts = &mut config.oct;
            opts.segments = segments.unwrap_or(opts.segments);
            opts.method = method.unwrap_or(opts.method);
            opts.restarts = restarts.unwrap_or(opts.restarts);
            opts.budget = budget.unwrap_or(opts.budget);
            config.validate()?;
            let dir = output_dir(&config)?.to_path_buf();
            let output = harness::run_sweep(&config)?;
            for record in &output.records {
                if record.status != "ok" && !quiet {
                    eprintln!("sweep: ({}, {}) failed: {}", record.t_gamma, record.t_omega_max, record.status);
                }
            }
            harness::write_sweep_outputs(&output, &dir)?;
        }
    }
    Ok(())
}

fn report(kind: &str, message: String) {
    let body = json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.to_string().trim_end().to_owned());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<qctrl::Error>().map_or("runtime", qctrl::Error::kind);
            report(kind, format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
