use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::liouvillian::{assemble_liouvillian, build_hamiltonian, Liouvillian, Superoperator};
use super::params::SystemParams;
use super::schedule::PulseSchedule;
use super::state::{DensityMatrix, Level};
use crate::error::{Error, Result};
use crate::expm::expm;

/// Default number of midpoint sub-segments per segment for piecewise-linear
/// and analytic schedules.
pub const DEFAULT_SUBSTEPS: usize = 10;

/// How a constant-control segment is exponentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    /// `exp(L·dt)` of the 16×16 vectorized Liouvillian.
    #[default]
    Liouvillian,
    /// `U = exp(-i H_eff dt)` with `H_eff = H - iγ/2 |e⟩⟨e|`, and the lost
    /// trace deposited on the sink. Equal to the Liouvillian route for this
    /// model, at a fraction of the cost.
    EffectiveHamiltonian,
}

/// Exact propagator of one constant-control segment.
#[derive(Debug, Clone)]
pub enum SegmentMap {
    Superoperator(Box<Superoperator>),
    Effective(Matrix4<Complex64>),
}

impl SegmentMap {
    pub fn new(params: &SystemParams, omega_p: f64, omega_s: f64, dt: f64, route: Propagation) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        match route {
            Propagation::Liouvillian => {
                let l = assemble_liouvillian(params, omega_p, omega_s)?;
                Self::from_liouvillian(&l, dt)
            }
            Propagation::EffectiveHamiltonian => {
                let mut h = build_hamiltonian(params, omega_p, omega_s);
                let e = Level::E.index();
                h[(e, e)] -= Complex64::new(0.0, 0.5 * params.gamma);
                let generator = h * Complex64::new(0.0, -dt);
                let u = expm(&generator).ok_or(Error::NonFinite("segment propagator"))?;
                Ok(SegmentMap::Effective(u))
            }
        }
    }

    pub fn from_liouvillian(generator: &Liouvillian, dt: f64) -> Result<Self> {
        let scaled = generator.matrix() * Complex64::new(dt, 0.0);
        let p = expm(&scaled).ok_or(Error::NonFinite("segment propagator"))?;
        Ok(SegmentMap::Superoperator(Box::new(p)))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        match self {
            SegmentMap::Superoperator(p) => DensityMatrix::from_vec(&(**p * rho.to_vec())),
            SegmentMap::Effective(u) => {
                let mut out = u * rho.matrix() * u.adjoint();
                let lost = rho.trace() - out.trace();
                let s = Level::S.index();
                out[(s, s)] += lost;
                DensityMatrix::from_matrix_unchecked(out)
            }
        }
    }

    /// Heisenberg-picture adjoint: `Tr(O Φ(ρ)) = Tr(Φ†(O) ρ)`.
    pub fn apply_adjoint(&self, observable: &Matrix4<Complex64>) -> Matrix4<Complex64> {
        match self {
            SegmentMap::Superoperator(p) => {
                // Tr(Oρ) = vec(Oᵀ)ᵀ vec(ρ)
                let w = nalgebra::SVector::<Complex64, 16>::from_iterator(
                    observable.transpose().iter().copied(),
                );
                let back = p.transpose() * w;
                Matrix4::from_iterator(back.iter().copied()).transpose()
            }
            SegmentMap::Effective(u) => {
                let s = Level::S.index();
                let ud = u.adjoint();
                let leak = Matrix4::identity() - ud * u;
                ud * observable * u + leak * observable[(s, s)]
            }
        }
    }
}

/// Propagates `state` through one segment of duration `dt` under a constant
/// generator: `vec(ρ') = exp(L·dt) vec(ρ)`.
pub fn propagate_segment(state: &DensityMatrix, generator: &Liouvillian, dt: f64) -> Result<DensityMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let out = SegmentMap::from_liouvillian(generator, dt)?.apply(state);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite("propagate_segment"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvolveOptions {
    /// Midpoint sub-segments per segment for non-step schedules.
    pub substeps: usize,
    pub route: Propagation,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            substeps: DEFAULT_SUBSTEPS,
            route: Propagation::Liouvillian,
        }
    }
}

fn check_horizon(schedule: &PulseSchedule, params: &SystemParams) -> Result<()> {
    let (a, b) = (schedule.horizon(), params.t_final);
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::HorizonMismatch { schedule: a, system: b });
    }
    Ok(())
}

/// States at the `N′ + 1` segment boundaries, starting with `initial`.
pub fn evolve(initial: &DensityMatrix, schedule: &PulseSchedule, params: &SystemParams) -> Result<Vec<DensityMatrix>> {
    evolve_with(initial, schedule, params, &EvolveOptions::default())
}

pub fn evolve_with(
    initial: &DensityMatrix,
    schedule: &PulseSchedule,
    params: &SystemParams,
    options: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    params.validate()?;
    check_horizon(schedule, params)?;
    let mut trajectory = Vec::with_capacity(schedule.n_segments() + 1);
    trajectory.push(*initial);
    let mut rho = *initial;
    for j in 0..schedule.n_segments() {
        for (dt, p, s) in schedule.segment_pieces(j, options.substeps) {
            rho = SegmentMap::new(params, p, s, dt, options.route)?.apply(&rho);
        }
        if !rho.is_finite() {
            return Err(Error::NonFinite("evolve"));
        }
        trajectory.push(rho);
    }
    Ok(trajectory)
}

/// `F = Tr{ρ |r⟩⟨r|}`.
pub fn fidelity(state: &DensityMatrix) -> Result<f64> {
    let z = state.get(Level::R, Level::R);
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("fidelity"));
    }
    if z.im.abs() > 1e-8 {
        return Err(Error::Corruption(format!(
            "imaginary target population {:e}",
            z.im
        )));
    }
    Ok(z.re.clamp(0.0, 1.0))
}

/// Transfer fidelity from `|g⟩⟨g|` under `schedule`.
pub fn transfer_fidelity(schedule: &PulseSchedule, params: &SystemParams) -> Result<f64> {
    transfer_fidelity_with(schedule, params, &EvolveOptions::default())
}

pub fn transfer_fidelity_with(schedule: &PulseSchedule, params: &SystemParams, options: &EvolveOptions) -> Result<f64> {
    let trajectory = evolve_with(&DensityMatrix::pure(Level::G), schedule, params, options)?;
    fidelity(trajectory.last().expect("trajectory is never empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn resonant(gamma: f64) -> SystemParams {
        SystemParams::new(0.0, 0.0, gamma, 1.0, 100.0).unwrap()
    }

    #[test]
    fn zero_generator_is_identity() {
        let p = resonant(0.0);
        let l = assemble_liouvillian(&p, 0.0, 0.0).unwrap();
        let rho = DensityMatrix::from_amplitudes([
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        let out = propagate_segment(&rho, &l, 0.3).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-15);
    }

    #[test]
    fn resonant_pi_pulse() {
        let p = resonant(0.0);
        let dt = 0.25;
        let l = assemble_liouvillian(&p, PI / dt, 0.0).unwrap();
        let out = propagate_segment(&DensityMatrix::pure(Level::G), &l, dt).unwrap();
        assert!((out.matrix() - DensityMatrix::pure(Level::E).matrix()).norm() < 1e-9);
    }

    #[test]
    fn pure_decay() {
        let gamma = 1.7;
        let l = assemble_liouvillian(&resonant(gamma), 0.0, 0.0).unwrap();
        for &dt in &[0.01, 0.5, 2.0] {
            let out = propagate_segment(&DensityMatrix::pure(Level::E), &l, dt).unwrap();
            assert!((out.population(Level::E) - (-gamma * dt).exp()).abs() < 1e-12);
            assert!((out.population(Level::S) - (1.0 - (-gamma * dt).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_step_and_flags_overflow() {
        let l = assemble_liouvillian(&resonant(0.0), 1.0, 1.0).unwrap();
        assert!(propagate_segment(&DensityMatrix::pure(Level::G), &l, 0.0).is_err());
        let huge = SystemParams::new(0.0, 0.0, 1e300, 1.0, 1.0).unwrap();
        let l = assemble_liouvillian(&huge, 0.0, 0.0).unwrap();
        assert!(propagate_segment(&DensityMatrix::pure(Level::E), &l, 1e10).is_err());
    }

    #[test]
    fn routes_agree() {
        let p = SystemParams::new(0.7, 0.0, 3.0, 1.0, 20.0).unwrap();
        let rho = DensityMatrix::from_amplitudes([
            Complex64::new(0.5, 0.1),
            Complex64::new(0.2, -0.4),
            Complex64::new(0.3, 0.0),
            Complex64::new(0.0, 0.6),
        ])
        .unwrap();
        let a = SegmentMap::new(&p, 13.0, 7.0, 0.04, Propagation::Liouvillian).unwrap();
        let b = SegmentMap::new(&p, 13.0, 7.0, 0.04, Propagation::EffectiveHamiltonian).unwrap();
        assert!((a.apply(&rho).matrix() - b.apply(&rho).matrix()).norm() < 1e-13);

        let mut obs = Matrix4::zeros();
        obs[(2, 2)] = Complex64::new(1.0, 0.0);
        obs[(3, 3)] = Complex64::new(0.25, 0.0);
        obs[(0, 2)] = Complex64::new(0.1, 0.2);
        obs[(2, 0)] = Complex64::new(0.1, -0.2);
        let (oa, ob) = (a.apply_adjoint(&obs), b.apply_adjoint(&obs));
        assert!((oa - ob).norm() < 1e-13);
        // Tr(O Φ(ρ)) = Tr(Φ†(O) ρ)
        let lhs = (obs * a.apply(&rho).matrix()).trace();
        let rhs = (oa * rho.matrix()).trace();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn sequential_pi_pulses_reach_target() {
        let p = resonant(0.0);
        let n = 4;
        let dt = 1.0 / n as f64;
        let amp = PI / (2.0 * dt);
        let s = PulseSchedule::piecewise_constant(
            1.0,
            vec![amp, amp, 0.0, 0.0],
            vec![0.0, 0.0, amp, amp],
        )
        .unwrap();
        let traj = evolve(&DensityMatrix::pure(Level::G), &s, &p).unwrap();
        assert_eq!(traj.len(), n + 1);
        let last = traj.last().unwrap();
        assert!((last.matrix() - DensityMatrix::pure(Level::R).matrix()).norm() < 1e-6);
        assert!(fidelity(last).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn zero_schedule_keeps_ground_state() {
        let p = resonant(0.0);
        let s = PulseSchedule::zeros(1.0, 5).unwrap();
        let traj = evolve(&DensityMatrix::pure(Level::G), &s, &p).unwrap();
        for rho in traj {
            assert_eq!(rho, DensityMatrix::pure(Level::G));
        }
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let s = PulseSchedule::zeros(2.0, 5).unwrap();
        let err = evolve(&DensityMatrix::pure(Level::G), &s, &resonant(0.0)).unwrap_err();
        assert!(matches!(err, Error::HorizonMismatch { .. }));
    }

    #[test]
    fn fidelity_values() {
        assert_eq!(fidelity(&DensityMatrix::pure(Level::R)).unwrap(), 1.0);
        assert_eq!(fidelity(&DensityMatrix::pure(Level::G)).unwrap(), 0.0);
        let mixed = (DensityMatrix::pure(Level::G).matrix() + DensityMatrix::pure(Level::R).matrix())
            * Complex64::new(0.5, 0.0);
        assert_eq!(fidelity(&DensityMatrix::from_matrix_unchecked(mixed)).unwrap(), 0.5);

        let mut m = *DensityMatrix::pure(Level::R).matrix();
        m[(2, 2)] = Complex64::new(1.0, 1e-6);
        assert!(matches!(
            fidelity(&DensityMatrix::from_matrix_unchecked(m)),
            Err(Error::Corruption(_))
        ));
        m[(2, 2)] = Complex64::new(1.0 + 1e-12, 1e-11);
        assert_eq!(fidelity(&DensityMatrix::from_matrix_unchecked(m)).unwrap(), 1.0);
    }
}
