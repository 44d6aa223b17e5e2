//! Reference STIRAP pulses and the instantaneous eigensystem of the
//! resonant-Raman (Δ₃ = 0) Hamiltonian.
//!
//! With `Ω₀ = √(Ω_p² + Ω_s²)`, `tan θ = Ω_p/Ω_s` and
//! `tan φ = Ω₀ / (Δ_p + √(Δ_p² + Ω₀²))` the eigenvalues are `0`,
//! `-(Ω₀/2) tan φ` and `(Ω₀/2) cot φ`. The zero-energy state
//! `cos θ |g⟩ - sin θ |r⟩` has no weight on the lossy level.

use serde::{Deserialize, Serialize};

use crate::dynamics::{transfer_fidelity, GaussianPair, PulseSchedule, SystemParams};
use crate::error::{Error, Result};

/// Gaussian pump/Stokes pair centred on `T/2`: the Stokes pulse peaks at
/// `T/2 - tau`, the pump at `T/2 + tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirapShape {
    pub omega_peak: f64,
    pub tau: f64,
    /// 1/e half-width of each envelope.
    pub width: f64,
    pub alpha_scale: f64,
}

impl StirapShape {
    pub fn new(omega_peak: f64, tau: f64, width: f64, alpha_scale: f64) -> Result<Self> {
        let shape = StirapShape {
            omega_peak,
            tau,
            width,
            alpha_scale,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// Peak `Ω_max`, width `T/6` and half-separation `T/10`.
    pub fn default_for(params: &SystemParams) -> Self {
        StirapShape {
            omega_peak: params.omega_max,
            tau: params.t_final / 10.0,
            width: params.t_final / 6.0,
            alpha_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(
                "tau",
                format!("counter-intuitive order needs tau > 0, got {}", self.tau),
            ));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::invalid("width", format!("must be > 0, got {}", self.width)));
        }
        if !(self.omega_peak > 0.0 && self.omega_peak.is_finite()) {
            return Err(Error::invalid("omega_peak", "must be > 0"));
        }
        if !(self.alpha_scale > 0.0 && self.alpha_scale.is_finite()) {
            return Err(Error::invalid("alpha_scale", "must be > 0"));
        }
        Ok(())
    }

    pub fn pair(&self, params: &SystemParams) -> GaussianPair {
        GaussianPair {
            omega_peak: self.omega_peak,
            tau: self.tau,
            width: self.width,
            alpha_scale: self.alpha_scale,
            center: 0.5 * params.t_final,
        }
    }

    fn check_against(&self, params: &SystemParams) -> Result<()> {
        self.validate()?;
        let peak = self.omega_peak * self.alpha_scale.max(1.0);
        if peak > params.omega_max * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "omega_peak",
                format!("peak {peak} exceeds omega_max {}", params.omega_max),
            ));
        }
        Ok(())
    }
}

/// Step-function schedule sampling the Gaussian pair at segment midpoints.
pub fn gaussian_schedule(shape: &StirapShape, params: &SystemParams, n_segments: usize) -> Result<PulseSchedule> {
    shape.check_against(params)?;
    if n_segments < 2 {
        return Err(Error::invalid("n_segments", "must be >= 2"));
    }
    PulseSchedule::analytic(params.t_final, n_segments, shape.pair(params))?.to_piecewise_constant()
}

/// The closed-form pair itself, integrated with midpoint sub-stepping.
pub fn analytic_schedule(shape: &StirapShape, params: &SystemParams, n_segments: usize) -> Result<PulseSchedule> {
    shape.check_against(params)?;
    PulseSchedule::analytic(params.t_final, n_segments, shape.pair(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingAngles {
    pub theta: f64,
    pub phi: f64,
    pub omega_0: f64,
}

fn rms(omega_p: f64, omega_s: f64) -> Result<f64> {
    let omega_0 = omega_p.hypot(omega_s);
    if omega_0 > 0.0 && omega_0.is_finite() {
        Ok(omega_0)
    } else {
        Err(Error::Degenerate(format!(
            "mixing angles undefined for Ω_p = {omega_p}, Ω_s = {omega_s}"
        )))
    }
}

pub fn mixing_angles(omega_p: f64, omega_s: f64, delta_p: f64) -> Result<MixingAngles> {
    let omega_0 = rms(omega_p, omega_s)?;
    let root = delta_p.hypot(omega_0);
    // Δ + √(Δ² + Ω₀²), rewritten for Δ < 0 to avoid cancellation
    let denom = if delta_p >= 0.0 {
        delta_p + root
    } else {
        omega_0 * omega_0 / (root - delta_p)
    };
    Ok(MixingAngles {
        theta: omega_p.atan2(omega_s),
        phi: omega_0.atan2(denom),
        omega_0,
    })
}

/// Instantaneous eigenpairs on the `(g, e, r)` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigensystem {
    pub lambda_0: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub a_0: [f64; 3],
    pub a_minus: [f64; 3],
    pub a_plus: [f64; 3],
}

impl Eigensystem {
    pub fn pairs(&self) -> [(f64, [f64; 3]); 3] {
        [
            (self.lambda_minus, self.a_minus),
            (self.lambda_0, self.a_0),
            (self.lambda_plus, self.a_plus),
        ]
    }
}

pub fn eigensystem(omega_p: f64, omega_s: f64, delta_p: f64) -> Result<Eigensystem> {
    let MixingAngles { theta, phi, omega_0 } = mixing_angles(omega_p, omega_s, delta_p)?;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Ok(Eigensystem {
        lambda_0: 0.0,
        lambda_minus: -0.5 * omega_0 * phi.tan(),
        lambda_plus: 0.5 * omega_0 / phi.tan(),
        a_0: [ct, 0.0, -st],
        a_minus: [st * cp, -sp, ct * cp],
        a_plus: [st * sp, cp, ct * sp],
    })
}

/// Mixing angle `θ(t)` of a schedule, read from its smooth representation.
pub fn mixing_angle_at(schedule: &PulseSchedule, t: f64) -> f64 {
    let (p, s) = schedule.smooth_value_at(t);
    p.atan2(s)
}

/// Ratio of `½|Δ_p ± √(Δ_p² + Ω₀²)|` (smaller branch) to `|θ̇(t)|`.
///
/// Values above 1 satisfy the local adiabaticity condition; `+∞` when θ is
/// stationary. θ̇ is a central difference with step `T/10⁴`, one-sided at
/// the ends of the horizon.
pub fn local_adiabaticity_margin(schedule: &PulseSchedule, params: &SystemParams, t: f64) -> Result<f64> {
    let horizon = schedule.horizon();
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::invalid("t", format!("{t} outside [0, {horizon}]")));
    }
    let (p, s) = schedule.smooth_value_at(t);
    let omega_0 = rms(p, s)?;
    let h = horizon * 1e-4;
    let (lo, hi) = ((t - h).max(0.0), (t + h).min(horizon));
    let theta_dot = (mixing_angle_at(schedule, hi) - mixing_angle_at(schedule, lo)) / (hi - lo);
    let delta = params.delta_p;
    let gap = 0.5 * (delta.hypot(omega_0) - delta.abs());
    if theta_dot == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(gap / theta_dot.abs())
    }
}

/// `Ω_max · τ`.
pub fn global_adiabaticity_product(shape: &StirapShape) -> f64 {
    shape.omega_peak * shape.tau
}

/// Summary numbers emitted alongside a STIRAP schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirapDiagnostics {
    pub theta_initial: f64,
    pub theta_final: f64,
    pub global_product: f64,
    /// Minimum local margin over the overlap window `[T/4, 3T/4]`.
    pub min_margin: f64,
    pub fidelity: f64,
}

pub fn diagnostics(shape: &StirapShape, schedule: &PulseSchedule, params: &SystemParams) -> Result<StirapDiagnostics> {
    let horizon = schedule.horizon();
    let samples = 201;
    let mut min_margin = f64::INFINITY;
    for i in 0..samples {
        let t = horizon * (0.25 + 0.5 * i as f64 / (samples - 1) as f64);
        min_margin = min_margin.min(local_adiabaticity_margin(schedule, params, t)?);
    }
    Ok(StirapDiagnostics {
        theta_initial: mixing_angle_at(schedule, 0.0),
        theta_final: mixing_angle_at(schedule, horizon),
        global_product: global_adiabaticity_product(shape),
        min_margin,
        fidelity: transfer_fidelity(schedule, params)?,
    })
}
