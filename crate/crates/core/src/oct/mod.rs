//! Optimal control over piecewise-constant pulses.
//!
//! The decision vector holds `N` pump and `N` Stokes step heights in
//! `[0, Ω_max]`. Three box-constrained minimizers are available, and
//! [`multistart`] keeps the best of several seeded random starts.

mod lbfgsb;
mod nelder_mead;
mod objective;
mod powell;
mod problem;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve, fidelity, DensityMatrix, Level, Propagation, PulseSchedule, SystemParams,
};
use crate::error::{Error, Result};

pub use objective::{
    alpha_to_schedule, cost, cost_with, numeric_gradient, numeric_gradient_with_step, FdStep, Objective, ParamVector,
    BOUND_SLACK,
};
pub use problem::{projected_gradient, BoxProblem, Outcome, Settings};

pub mod minimizers {
    //! The raw minimizers, usable on any [`BoxProblem`](super::BoxProblem).
    pub use super::lbfgsb::minimize as lbfgsb;
    pub use super::nelder_mead::minimize as nelder_mead;
    pub use super::powell::minimize as powell;
}

/// Default number of segments per control.
pub const DEFAULT_SEGMENTS: usize = 30;
/// Default number of random starts.
pub const DEFAULT_RESTARTS: usize = 4;
/// Default cost-evaluation budget per start.
pub const DEFAULT_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OctMethod {
    NelderMead,
    Powell,
    Lbfgsb,
}

impl OctMethod {
    pub fn name(self) -> &'static str {
        match self {
            OctMethod::NelderMead => "nelder-mead",
            OctMethod::Powell => "powell",
            OctMethod::Lbfgsb => "lbfgsb",
        }
    }
}

impl std::fmt::Display for OctMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OctMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nelder-mead" => Ok(OctMethod::NelderMead),
            "powell" => Ok(OctMethod::Powell),
            "lbfgsb" => Ok(OctMethod::Lbfgsb),
            other => Err(Error::invalid("method", format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationResult {
    pub best_alpha: ParamVector,
    pub best_cost: f64,
    pub fidelity: f64,
    pub method: OctMethod,
    pub restart_index: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl OptimizationResult {
    pub fn schedule(&self, params: &SystemParams) -> Result<PulseSchedule> {
        alpha_to_schedule(&self.best_alpha, params)
    }
}

/// Limits for one [`minimize`] run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_evaluations: usize,
    pub route: Propagation,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_evaluations: DEFAULT_BUDGET,
            route: Propagation::EffectiveHamiltonian,
        }
    }
}

impl Budget {
    pub fn evaluations(max_evaluations: usize) -> Self {
        Budget {
            max_evaluations,
            ..Budget::default()
        }
    }
}

/// Minimizes the cost from `initial`. The returned cost is never worse than
/// the initial one, and the returned fidelity is recomputed with the exact
/// Liouvillian propagator.
pub fn minimize(
    initial: &ParamVector,
    params: &SystemParams,
    method: OctMethod,
    budget: Budget,
) -> Result<OptimizationResult> {
    params.validate()?;
    initial.check_bounds(params.omega_max)?;
    let mut objective = Objective::new(params, initial.n_per_control, budget.route)?;
    let settings = Settings {
        max_evaluations: budget.max_evaluations,
        ..Settings::default()
    };
    let outcome = match method {
        OctMethod::Lbfgsb => lbfgsb::minimize(&mut objective, &initial.alpha, &settings)?,
        OctMethod::NelderMead => {
            nelder_mead::minimize(&mut objective, &initial.alpha, 0.1 * params.omega_max, &settings)?
        }
        OctMethod::Powell => powell::minimize(&mut objective, &initial.alpha, &settings)?,
    };
    let evaluations = objective.evaluations();

    let mut start = initial.clone();
    objective.clip(&mut start.alpha);
    let candidate = ParamVector::new(outcome.x, initial.n_per_control)?;
    let start_cost = cost(&start, params)?;
    let candidate_cost = cost(&candidate, params)?;
    let (best_alpha, best_cost) = if candidate_cost <= start_cost {
        (candidate, candidate_cost)
    } else {
        (start, start_cost)
    };
    Ok(OptimizationResult {
        best_alpha,
        best_cost,
        fidelity: 1.0 - best_cost,
        method,
        restart_index: 0,
        evaluations,
        converged: outcome.converged,
        seed: 0,
    })
}

/// The initial guess of restart `restart`, uniform on `[0, Ω_max]^{2N}`.
pub fn initial_guess(params: &SystemParams, n_per_control: usize, seed: u64, restart: usize) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let alpha = (0..2 * n_per_control)
        .map(|_| rng.random_range(0.0..=params.omega_max))
        .collect();
    ParamVector { alpha, n_per_control }
}

/// Runs every restart and returns all results in restart order.
pub fn multistart_all(
    params: &SystemParams,
    n_per_control: usize,
    method: OctMethod,
    n_restarts: usize,
    seed: u64,
    budget: Budget,
) -> Result<Vec<OptimizationResult>> {
    if n_restarts == 0 {
        return Err(Error::invalid("n_restarts", "must be >= 1"));
    }
    (0..n_restarts)
        .into_par_iter()
        .map(|restart| {
            let initial = initial_guess(params, n_per_control, seed, restart);
            let mut result = minimize(&initial, params, method, budget)?;
            result.restart_index = restart;
            result.seed = seed;
            Ok(result)
        })
        .collect()
}

/// Best of `n_restarts` seeded random starts; ties go to the lowest restart
/// index.
pub fn multistart(
    params: &SystemParams,
    n_per_control: usize,
    method: OctMethod,
    n_restarts: usize,
    seed: u64,
    budget: Budget,
) -> Result<OptimizationResult> {
    let results = multistart_all(params, n_per_control, method, n_restarts, seed, budget)?;
    Ok(best_of(results).expect("at least one restart"))
}

pub fn best_of(results: Vec<OptimizationResult>) -> Option<OptimizationResult> {
    results.into_iter().reduce(|best, r| if r.best_cost < best.best_cost { r } else { best })
}

/// Populations `(g, e, r, s)` at every segment boundary of the optimized
/// schedule.
pub fn population_trajectory(result: &OptimizationResult, params: &SystemParams) -> Result<Vec<[f64; 4]>> {
    let schedule = result.schedule(params)?;
    let trajectory = evolve(&DensityMatrix::pure(Level::G), &schedule, params)?;
    Ok(trajectory.iter().map(DensityMatrix::populations).collect())
}

/// Fidelity of the emitted schedule, re-evolved from scratch.
pub fn replay_fidelity(result: &OptimizationResult, params: &SystemParams) -> Result<f64> {
    let schedule = result.schedule(params)?;
    let trajectory = evolve(&DensityMatrix::pure(Level::G), &schedule, params)?;
    fidelity(trajectory.last().expect("non-empty trajectory"))
}
