use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve_with, fidelity, DensityMatrix, EvolveOptions, Level, Propagation, PulseSchedule, SegmentMap,
    SystemParams,
};
use crate::error::{Error, Result};

/// Slack allowed when checking the box `[0, Ω_max]`.
pub const BOUND_SLACK: f64 = 1e-12;

/// Decision vector: `N` pump step heights followed by `N` Stokes step
/// heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub alpha: Vec<f64>,
    pub n_per_control: usize,
}

impl ParamVector {
    pub fn new(alpha: Vec<f64>, n_per_control: usize) -> Result<Self> {
        if n_per_control == 0 || alpha.len() != 2 * n_per_control {
            return Err(Error::invalid(
                "alpha",
                format!("length {} is not 2 x {}", alpha.len(), n_per_control),
            ));
        }
        Ok(ParamVector { alpha, n_per_control })
    }

    pub fn zeros(n_per_control: usize) -> Self {
        ParamVector {
            alpha: vec![0.0; 2 * n_per_control],
            n_per_control,
        }
    }

    pub fn from_pulses(pump: &[f64], stokes: &[f64]) -> Result<Self> {
        let alpha = pump.iter().chain(stokes).copied().collect();
        Self::new(alpha, pump.len())
    }

    /// Step heights of a piecewise-constant schedule.
    pub fn from_schedule(schedule: &PulseSchedule) -> Result<Self> {
        if schedule.kind() != crate::dynamics::ScheduleKind::PiecewiseConstant {
            return Err(Error::invalid("schedule", "only step-function schedules map onto alpha"));
        }
        Self::from_pulses(&schedule.pump_values(), &schedule.stokes_values())
    }

    pub fn pump(&self) -> &[f64] {
        &self.alpha[..self.n_per_control]
    }

    pub fn stokes(&self) -> &[f64] {
        &self.alpha[self.n_per_control..]
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn check_bounds(&self, omega_max: f64) -> Result<()> {
        for (index, &value) in self.alpha.iter().enumerate() {
            if !(value >= -BOUND_SLACK && value <= omega_max + BOUND_SLACK) {
                return Err(Error::OutOfBounds {
                    index,
                    value,
                    bound: omega_max,
                });
            }
        }
        Ok(())
    }
}

pub fn alpha_to_schedule(alpha: &ParamVector, params: &SystemParams) -> Result<PulseSchedule> {
    alpha.check_bounds(params.omega_max)?;
    let clip = |v: &[f64]| v.iter().map(|x| x.clamp(0.0, params.omega_max)).collect::<Vec<_>>();
    PulseSchedule::piecewise_constant(params.t_final, clip(alpha.pump()), clip(alpha.stokes()))
}

/// `J̄(α) = 1 - Tr{|r⟩⟨r| ρ(T)}` with `ρ(0) = |g⟩⟨g|`.
pub fn cost(alpha: &ParamVector, params: &SystemParams) -> Result<f64> {
    cost_with(alpha, params, Propagation::Liouvillian)
}

pub fn cost_with(alpha: &ParamVector, params: &SystemParams, route: Propagation) -> Result<f64> {
    let schedule = alpha_to_schedule(alpha, params)?;
    let options = EvolveOptions {
        route,
        ..EvolveOptions::default()
    };
    let trajectory = evolve_with(&DensityMatrix::pure(Level::G), &schedule, params, &options)?;
    Ok(1.0 - fidelity(trajectory.last().expect("non-empty trajectory"))?)
}

/// Absolute floor and relative factor of the finite-difference step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdStep {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for FdStep {
    fn default() -> Self {
        FdStep {
            absolute: 1e-6,
            relative: 1e-6,
        }
    }
}

/// Finite-difference gradient of the cost: central in the interior,
/// one-sided where a central stencil would leave `[0, Ω_max]`.
pub fn numeric_gradient(alpha: &ParamVector, params: &SystemParams) -> Result<Vec<f64>> {
    let mut objective = Objective::new(params, alpha.n_per_control, Propagation::Liouvillian)?;
    Ok(objective.value_and_gradient(&alpha.alpha)?.1)
}

pub fn numeric_gradient_with_step(alpha: &ParamVector, params: &SystemParams, step: FdStep) -> Result<Vec<f64>> {
    let mut objective = Objective::new(params, alpha.n_per_control, Propagation::Liouvillian)?;
    objective.step = step;
    Ok(objective.value_and_gradient(&alpha.alpha)?.1)
}

/// The cost as a function of a raw slice, with evaluation counting.
///
/// Gradients reuse the forward states and backward-propagated target
/// observable, so each perturbed cost needs one new segment propagator
/// instead of a full re-evolution. The result is the same finite
/// difference as re-evolving from scratch.
pub struct Objective {
    params: SystemParams,
    n: usize,
    route: Propagation,
    pub step: FdStep,
    evaluations: usize,
}

impl Objective {
    pub fn new(params: &SystemParams, n_per_control: usize, route: Propagation) -> Result<Self> {
        params.validate()?;
        if n_per_control == 0 {
            return Err(Error::invalid("n_per_control", "must be >= 1"));
        }
        Ok(Objective {
            params: *params,
            n: n_per_control,
            route,
            step: FdStep::default(),
            evaluations: 0,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn upper(&self) -> f64 {
        self.params.omega_max
    }

    /// Cost evaluations so far; a gradient counts one per perturbed point.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn dt(&self) -> f64 {
        self.params.t_final / self.n as f64
    }

    fn map(&self, x: &[f64], j: usize) -> Result<SegmentMap> {
        SegmentMap::new(&self.params, x[j], x[self.n + j], self.dt(), self.route)
    }

    fn target() -> Matrix4<Complex64> {
        *DensityMatrix::pure(Level::R).matrix()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid("alpha", format!("expected length {}", self.dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("alpha"));
        }
        Ok(())
    }

    pub fn value(&mut self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.evaluations += 1;
        let mut rho = DensityMatrix::pure(Level::G);
        for j in 0..self.n {
            rho = self.map(x, j)?.apply(&rho);
        }
        if !rho.is_finite() {
            return Err(Error::NonFinite("cost"));
        }
        Ok(1.0 - fidelity(&rho)?)
    }

    pub fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        self.evaluations += 1;
        let n = self.n;
        let upper = self.params.omega_max;
        let maps = (0..n).map(|j| self.map(x, j)).collect::<Result<Vec<_>>>()?;

        let mut states = Vec::with_capacity(n + 1);
        states.push(DensityMatrix::pure(Level::G));
        for map in &maps {
            let next = map.apply(states.last().expect("seeded"));
            states.push(next);
        }
        // costates[j] = observable after segment j, so F = Tr(costates[j] ρ_{j+1})
        let mut costates = vec![Self::target(); n];
        for j in (0..n.saturating_sub(1)).rev() {
            costates[j] = maps[j + 1].apply_adjoint(&costates[j + 1]);
        }
        let final_state = states.last().expect("non-empty");
        if !final_state.is_finite() {
            return Err(Error::NonFinite("cost"));
        }
        let base_fidelity = final_state.get(Level::R, Level::R).re;
        let value = 1.0 - fidelity(final_state)?;

        let mut grad = vec![0.0; 2 * n];
        let mut scratch = x.to_vec();
        for (i, g) in grad.iter_mut().enumerate() {
            let j = i % n;
            let xi = x[i];
            let h = self.step.absolute.max(self.step.relative * xi.abs());
            let mut perturbed_fidelity = |v: f64| -> Result<f64> {
                scratch[i] = v;
                let map = self.map(&scratch, j)?;
                scratch[i] = xi;
                self.evaluations += 1;
                let rho = map.apply(&states[j]);
                Ok((costates[j] * rho.matrix()).trace().re)
            };
            let dfid = if xi - h >= 0.0 && xi + h <= upper {
                (perturbed_fidelity(xi + h)? - perturbed_fidelity(xi - h)?) / (2.0 * h)
            } else if xi - h < 0.0 {
                (perturbed_fidelity(xi + h)? - base_fidelity) / h
            } else {
                (base_fidelity - perturbed_fidelity(xi - h)?) / h
            };
            *g = -dfid;
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random_alpha(n: usize, upper: f64, seed: u64) -> ParamVector {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let alpha = (0..2 * n).map(|_| rng.random_range(0.1 * upper..0.9 * upper)).collect();
        ParamVector::new(alpha, n).unwrap()
    }

    // Re-evolves from scratch for every perturbed point.
    fn brute_force_gradient(alpha: &ParamVector, params: &SystemParams, h_abs: f64) -> Vec<f64> {
        (0..alpha.len())
            .map(|i| {
                let h = h_abs.max(1e-6 * alpha.alpha[i].abs());
                let mut plus = alpha.clone();
                let mut minus = alpha.clone();
                plus.alpha[i] += h;
                minus.alpha[i] -= h;
                if minus.alpha[i] < 0.0 {
                    (cost(&plus, params).unwrap() - cost(alpha, params).unwrap()) / h
                } else if plus.alpha[i] > params.omega_max {
                    (cost(alpha, params).unwrap() - cost(&minus, params).unwrap()) / h
                } else {
                    (cost(&plus, params).unwrap() - cost(&minus, params).unwrap()) / (2.0 * h)
                }
            })
            .collect()
    }

    #[test]
    fn zero_alpha_gives_zero_schedule_and_unit_cost() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let a = ParamVector::zeros(30);
        let s = alpha_to_schedule(&a, &p).unwrap();
        assert_eq!(s.n_segments(), 30);
        assert_eq!(s.max_amplitude(), 0.0);
        assert_eq!(a.len(), 60);
        assert_eq!(cost(&a, &p).unwrap(), 1.0);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let mut a = ParamVector::zeros(3);
        a.alpha[4] = 20.0 + 1e-9;
        assert!(matches!(alpha_to_schedule(&a, &p), Err(Error::OutOfBounds { index: 4, .. })));
        a.alpha[4] = -1e-13;
        assert!(alpha_to_schedule(&a, &p).is_ok());
        assert!(ParamVector::new(vec![0.0; 5], 3).is_err());
    }

    #[test]
    fn schedule_round_trip() {
        let p = SystemParams::dimensionless(5.0, 100.0).unwrap();
        let shape = crate::stirap::StirapShape::default_for(&p);
        let s = crate::stirap::gaussian_schedule(&shape, &p, 30).unwrap();
        let a = ParamVector::from_schedule(&s).unwrap();
        assert_eq!(alpha_to_schedule(&a, &p).unwrap(), s);
    }

    #[test]
    fn pi_pulse_pair_costs_nothing() {
        let p = SystemParams::dimensionless(0.0, 10.0).unwrap();
        let n = 30;
        let amp = PI / 0.5;
        let mut a = ParamVector::zeros(n);
        for j in 0..15 {
            a.alpha[j] = amp;
            a.alpha[n + 15 + j] = amp;
        }
        assert!(cost(&a, &p).unwrap() <= 1e-4);
    }

    #[test]
    fn cached_gradient_matches_brute_force() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let mut a = random_alpha(6, 20.0, 3);
        a.alpha[0] = 0.0;
        a.alpha[7] = 20.0;
        let fast = numeric_gradient(&a, &p).unwrap();
        let slow = brute_force_gradient(&a, &p, 1e-6);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() < 1e-8, "{f} vs {s}");
        }
    }

    #[test]
    fn effective_route_gives_same_gradient() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let a = random_alpha(5, 20.0, 9);
        let mut lv = Objective::new(&p, 5, Propagation::Liouvillian).unwrap();
        let mut eh = Objective::new(&p, 5, Propagation::EffectiveHamiltonian).unwrap();
        let (f1, g1) = lv.value_and_gradient(&a.alpha).unwrap();
        let (f2, g2) = eh.value_and_gradient(&a.alpha).unwrap();
        assert!((f1 - f2).abs() < 1e-13);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-7);
        }
        assert_eq!(lv.evaluations(), 1 + 20);
    }

    #[test]
    fn zero_alpha_gradient_is_non_positive_at_late_pump_segments() {
        let p = SystemParams::dimensionless(0.0, 20.0).unwrap();
        let a = ParamVector::zeros(10);
        let g = numeric_gradient(&a, &p).unwrap();
        let oracle = brute_force_gradient(&a, &p, 0.5e-6);
        for j in 5..10 {
            assert!(g[j] <= 0.0);
            assert!((g[j] - oracle[j]).abs() < 1e-9);
        }
    }
}
