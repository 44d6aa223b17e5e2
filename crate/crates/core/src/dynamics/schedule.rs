use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form pair of Gaussian envelopes, pump centred at `center + tau`
/// and Stokes at `center - tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPair {
    pub omega_peak: f64,
    pub tau: f64,
    pub width: f64,
    pub alpha_scale: f64,
    pub center: f64,
}

impl GaussianPair {
    pub fn pump(&self, t: f64) -> f64 {
        let x = (t - self.center - self.tau) / self.width;
        self.omega_peak * (-x * x).exp()
    }

    pub fn stokes(&self, t: f64) -> f64 {
        let x = (t - self.center + self.tau) / self.width;
        self.alpha_scale * self.omega_peak * (-x * x).exp()
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.omega_peak, self.tau, self.width, self.alpha_scale, self.center]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("shape", "non-finite Gaussian parameter"));
        }
        if self.width <= 0.0 {
            return Err(Error::invalid("width", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    PiecewiseConstant,
    PiecewiseLinear,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Constant { pump: Vec<f64>, stokes: Vec<f64> },
    Linear { pump: Vec<f64>, stokes: Vec<f64> },
    Analytic(GaussianPair),
}

/// Pump and Stokes Rabi frequencies on `[0, horizon]` over a uniform grid of
/// `n_segments` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    horizon: f64,
    n_segments: usize,
    body: Body,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("horizon", format!("must be > 0, got {horizon}")))
    }
}

fn check_values(name: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(name, "contains non-finite values"))
    }
}

impl PulseSchedule {
    /// Step functions: `pump[j]`, `stokes[j]` hold on `[t_j, t_{j+1})`.
    pub fn piecewise_constant(horizon: f64, pump: Vec<f64>, stokes: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if pump.is_empty() || pump.len() != stokes.len() {
            return Err(Error::invalid(
                "values",
                format!(
                    "need equal non-empty pump/Stokes arrays, got {} and {}",
                    pump.len(),
                    stokes.len()
                ),
            ));
        }
        check_values("values_p", &pump)?;
        check_values("values_s", &stokes)?;
        Ok(PulseSchedule {
            horizon,
            n_segments: pump.len(),
            body: Body::Constant { pump, stokes },
        })
    }

    /// Continuous linear interpolation of `N′ + 1` knots at `t_j = jT/N′`.
    pub fn piecewise_linear(horizon: f64, pump: Vec<f64>, stokes: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if pump.len() < 2 || pump.len() != stokes.len() {
            return Err(Error::invalid(
                "values",
                format!(
                    "need equal pump/Stokes knot arrays of length >= 2, got {} and {}",
                    pump.len(),
                    stokes.len()
                ),
            ));
        }
        check_values("values_p", &pump)?;
        check_values("values_s", &stokes)?;
        Ok(PulseSchedule {
            horizon,
            n_segments: pump.len() - 1,
            body: Body::Linear { pump, stokes },
        })
    }

    pub fn analytic(horizon: f64, n_segments: usize, pair: GaussianPair) -> Result<Self> {
        check_horizon(horizon)?;
        if n_segments == 0 {
            return Err(Error::invalid("n_segments", "must be >= 1"));
        }
        pair.validate()?;
        Ok(PulseSchedule {
            horizon,
            n_segments,
            body: Body::Analytic(pair),
        })
    }

    /// Constant zero controls.
    pub fn zeros(horizon: f64, n_segments: usize) -> Result<Self> {
        Self::piecewise_constant(horizon, vec![0.0; n_segments], vec![0.0; n_segments])
    }

    pub fn kind(&self) -> ScheduleKind {
        match self.body {
            Body::Constant { .. } => ScheduleKind::PiecewiseConstant,
            Body::Linear { .. } => ScheduleKind::PiecewiseLinear,
            Body::Analytic(_) => ScheduleKind::Analytic,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    /// Segment length `Δt = T/N′`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_segments as f64
    }

    pub fn gaussian(&self) -> Option<&GaussianPair> {
        match &self.body {
            Body::Analytic(pair) => Some(pair),
            _ => None,
        }
    }

    /// `(Ω_p(t), Ω_s(t))`; times outside `[0, T]` are clamped.
    pub fn value_at(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.horizon);
        match &self.body {
            Body::Constant { pump, stokes } => {
                let j = ((t / self.dt()).floor() as usize).min(self.n_segments - 1);
                (pump[j], stokes[j])
            }
            Body::Linear { pump, stokes } => {
                let x = t / self.dt();
                let j = (x.floor() as usize).min(self.n_segments - 1);
                let frac = x - j as f64;
                (
                    pump[j] + (pump[j + 1] - pump[j]) * frac,
                    stokes[j] + (stokes[j + 1] - stokes[j]) * frac,
                )
            }
            Body::Analytic(pair) => (pair.pump(t), pair.stokes(t)),
        }
    }

    /// A continuous representation used for derivatives: exact for linear
    /// and analytic schedules, linear interpolation between segment
    /// midpoints for step functions.
    pub fn smooth_value_at(&self, t: f64) -> (f64, f64) {
        match &self.body {
            Body::Constant { pump, stokes } => {
                let dt = self.dt();
                let x = (t / dt - 0.5).clamp(0.0, (self.n_segments - 1) as f64);
                let j = (x.floor() as usize).min(self.n_segments.saturating_sub(2));
                if self.n_segments == 1 {
                    return (pump[0], stokes[0]);
                }
                let frac = x - j as f64;
                (
                    pump[j] + (pump[j + 1] - pump[j]) * frac,
                    stokes[j] + (stokes[j + 1] - stokes[j]) * frac,
                )
            }
            _ => self.value_at(t),
        }
    }

    /// Constant pieces `(duration, Ω_p, Ω_s)` covering segment `j`. Step
    /// functions give one piece; other kinds are split into `substeps`
    /// pieces held at their midpoint values.
    pub fn segment_pieces(&self, j: usize, substeps: usize) -> Vec<(f64, f64, f64)> {
        let dt = self.dt();
        match &self.body {
            Body::Constant { pump, stokes } => vec![(dt, pump[j], stokes[j])],
            _ => {
                let k = substeps.max(1);
                let h = dt / k as f64;
                let t0 = j as f64 * dt;
                (0..k)
                    .map(|i| {
                        let (p, s) = self.value_at(t0 + (i as f64 + 0.5) * h);
                        (h, p, s)
                    })
                    .collect()
            }
        }
    }

    /// Stored pump values: step heights, knots, or midpoint samples.
    pub fn pump_values(&self) -> Vec<f64> {
        self.stored_values().0
    }

    pub fn stokes_values(&self) -> Vec<f64> {
        self.stored_values().1
    }

    fn stored_values(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.body {
            Body::Constant { pump, stokes } | Body::Linear { pump, stokes } => {
                (pump.clone(), stokes.clone())
            }
            Body::Analytic(pair) => self
                .sample_times()
                .into_iter()
                .map(|t| (pair.pump(t), pair.stokes(t)))
                .unzip(),
        }
    }

    /// Times associated with the stored values.
    pub fn sample_times(&self) -> Vec<f64> {
        let dt = self.dt();
        match self.body {
            Body::Linear { .. } => (0..=self.n_segments).map(|j| j as f64 * dt).collect(),
            _ => (0..self.n_segments).map(|j| (j as f64 + 0.5) * dt).collect(),
        }
    }

    /// Amplitude-weighted mean times `(t̄_p, t̄_s)` of the stored samples.
    /// `None` for a control that is identically zero.
    pub fn weighted_mean_times(&self) -> (Option<f64>, Option<f64>) {
        let times = self.sample_times();
        let (pump, stokes) = self.stored_values();
        let mean = |v: &[f64]| {
            let w: f64 = v.iter().map(|x| x.abs()).sum();
            (w > 0.0).then(|| v.iter().zip(&times).map(|(x, t)| x.abs() * t).sum::<f64>() / w)
        };
        (mean(&pump), mean(&stokes))
    }

    /// Counter-intuitive ordering: the Stokes weighted mean time precedes
    /// the pump's.
    pub fn is_counter_intuitive(&self) -> bool {
        matches!(self.weighted_mean_times(), (Some(p), Some(s)) if s < p)
    }

    pub fn max_amplitude(&self) -> f64 {
        let (p, s) = self.stored_values();
        p.iter().chain(&s).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Same protocol for the system with `T → αT` and rates divided by `α`.
    pub fn rescaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
        }
        let shrink = |v: &[f64]| v.iter().map(|x| x / alpha).collect::<Vec<_>>();
        let horizon = self.horizon * alpha;
        match &self.body {
            Body::Constant { pump, stokes } => {
                Self::piecewise_constant(horizon, shrink(pump), shrink(stokes))
            }
            Body::Linear { pump, stokes } => {
                Self::piecewise_linear(horizon, shrink(pump), shrink(stokes))
            }
            Body::Analytic(pair) => Self::analytic(
                horizon,
                self.n_segments,
                GaussianPair {
                    omega_peak: pair.omega_peak / alpha,
                    tau: pair.tau * alpha,
                    width: pair.width * alpha,
                    alpha_scale: pair.alpha_scale,
                    center: pair.center * alpha,
                },
            ),
        }
    }

    /// The schedule played backwards, `u(t) → u(T − t)`.
    pub fn time_reversed(&self) -> Self {
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
        let body = match &self.body {
            Body::Constant { pump, stokes } => Body::Constant {
                pump: rev(pump),
                stokes: rev(stokes),
            },
            Body::Linear { pump, stokes } => Body::Linear {
                pump: rev(pump),
                stokes: rev(stokes),
            },
            Body::Analytic(pair) => Body::Analytic(GaussianPair {
                tau: -pair.tau,
                center: self.horizon - pair.center,
                ..*pair
            }),
        };
        PulseSchedule {
            horizon: self.horizon,
            n_segments: self.n_segments,
            body,
        }
    }

    /// Step-function schedule with the same values on the same grid;
    /// analytic schedules are sampled at segment midpoints.
    pub fn to_piecewise_constant(&self) -> Result<Self> {
        match &self.body {
            Body::Constant { .. } => Ok(self.clone()),
            Body::Linear { pump, stokes } => {
                let mid = |v: &[f64]| v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                Self::piecewise_constant(self.horizon, mid(pump), mid(stokes))
            }
            Body::Analytic(_) => {
                let (p, s) = self.stored_values();
                Self::piecewise_constant(self.horizon, p, s)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleJson {
    kind: ScheduleKind,
    n_segments: usize,
    horizon: f64,
    values_p: Vec<f64>,
    values_s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<GaussianPair>,
}

impl Serialize for PulseSchedule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (values_p, values_s) = self.stored_values();
        ScheduleJson {
            kind: self.kind(),
            n_segments: self.n_segments,
            horizon: self.horizon,
            values_p,
            values_s,
            shape: self.gaussian().copied(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PulseSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ScheduleJson::deserialize(deserializer)?;
        let schedule = match raw.kind {
            ScheduleKind::PiecewiseConstant => {
                Self::piecewise_constant(raw.horizon, raw.values_p, raw.values_s)
            }
            ScheduleKind::PiecewiseLinear => {
                Self::piecewise_linear(raw.horizon, raw.values_p, raw.values_s)
            }
            ScheduleKind::Analytic => match raw.shape {
                Some(pair) => Self::analytic(raw.horizon, raw.n_segments, pair),
                None => return Err(D::Error::custom("analytic schedule requires `shape`")),
            },
        }
        .map_err(D::Error::custom)?;
        if schedule.n_segments != raw.n_segments {
            return Err(D::Error::custom(format!(
                "n_segments = {} inconsistent with values (implies {})",
                raw.n_segments, schedule.n_segments
            )));
        }
        Ok(schedule)
    }
}
