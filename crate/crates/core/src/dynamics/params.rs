use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical configuration of the driven three-level system plus loss sink.
///
/// All rates are angular frequencies in units of 1/time with ħ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Single-photon detuning of the pump.
    pub delta_p: f64,
    /// Two-photon detuning; zero in every shipped experiment.
    pub delta_3: f64,
    /// Decay rate of |e⟩ into the sink.
    pub gamma: f64,
    /// Protocol duration T.
    pub t_final: f64,
    /// Upper bound on either Rabi frequency.
    pub omega_max: f64,
}

impl SystemParams {
    pub fn new(delta_p: f64, delta_3: f64, gamma: f64, t_final: f64, omega_max: f64) -> Result<Self> {
        let params = SystemParams {
            delta_p,
            delta_3,
            gamma,
            t_final,
            omega_max,
        };
        params.validate()?;
        Ok(params)
    }

    /// Resonant system with `T = 1` described by the dimensionless pair
    /// `(Tγ, TΩ_max)`.
    pub fn dimensionless(t_gamma: f64, t_omega_max: f64) -> Result<Self> {
        Self::new(0.0, 0.0, t_gamma, 1.0, t_omega_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_p.is_finite() {
            return Err(Error::invalid("delta_p", "must be finite"));
        }
        if !self.delta_3.is_finite() {
            return Err(Error::invalid("delta_3", "must be finite"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("t_final", format!("must be > 0, got {}", self.t_final)));
        }
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::invalid(
                "omega_max",
                format!("must be > 0, got {}", self.omega_max),
            ));
        }
        Ok(())
    }

    pub fn t_gamma(&self) -> f64 {
        self.t_final * self.gamma
    }

    pub fn t_omega_max(&self) -> f64 {
        self.t_final * self.omega_max
    }

    /// The equivalent system under `T → αT`, `γ → γ/α`, `Ω_max → Ω_max/α`.
    /// Detunings are rates too and are divided by α as well.
    pub fn rescaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
        }
        Self::new(
            self.delta_p / alpha,
            self.delta_3 / alpha,
            self.gamma / alpha,
            self.t_final * alpha,
            self.omega_max / alpha,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid() {
        assert!(SystemParams::new(0.0, 0.0, -1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(0.0, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(SystemParams::new(0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(SystemParams::new(f64::NAN, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::dimensionless(0.0, 5.0).is_ok());
    }

    #[test]
    fn rescaling_keeps_products() {
        let p = SystemParams::dimensionless(5.0, 20.0).unwrap();
        let q = p.rescaled(4.0).unwrap();
        assert!((q.t_gamma() - 5.0).abs() < 1e-14);
        assert!((q.t_omega_max() - 20.0).abs() < 1e-14);
        assert!(p.rescaled(0.0).is_err());
    }
}
