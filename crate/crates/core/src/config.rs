use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the heat semigroup is applied to matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HeatRoute {
    /// Gauss–Hermite average of Weyl conjugations.
    #[default]
    Quadrature,
    /// Exponential of the truncated double-commutator generator.
    Generator,
}

/// Truncated matrix model of the Moyal plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Working block dimension.
    pub n: usize,
    /// Padded dimension used when applying channels.
    pub n_pad: usize,
    /// Deformation: θ = h·[[0,−1],[1,0]].
    pub h: f64,
    /// Gauss–Hermite nodes per axis for heat channels.
    pub quad_order: usize,
    /// τ_θ(x) = c_tau·tr(x). Zero until calibrated.
    pub c_tau: f64,
    pub tol_leak: f64,
    pub heat_route: HeatRoute,
}

impl ModelConfig {
    pub fn new(n: usize, h: f64) -> Self {
        Self {
            n,
            n_pad: 2 * n,
            h,
            quad_order: 20,
            c_tau: 0.0,
            tol_leak: 1e-6,
            heat_route: HeatRoute::Quadrature,
        }
    }

    pub fn with_pad(mut self, n_pad: usize) -> Self {
        self.n_pad = n_pad;
        self
    }

    pub fn with_route(mut self, route: HeatRoute) -> Self {
        self.heat_route = route;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("N = {} < 2", self.n)));
        }
        if self.n_pad < self.n {
            return Err(Error::InvalidConfig(format!("N_pad = {} < N = {}", self.n_pad, self.n)));
        }
        if self.quad_order < 4 {
            return Err(Error::InvalidConfig(format!("quad_order = {} < 4", self.quad_order)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidConfig(format!("h = {} must be positive", self.h)));
        }
        if !(self.tol_leak > 0.0) {
            return Err(Error::InvalidConfig("tol_leak must be positive".into()));
        }
        if !(self.c_tau >= 0.0 && self.c_tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("c_tau = {}", self.c_tau)));
        }
        Ok(())
    }

    pub fn is_calibrated(&self) -> bool {
        self.c_tau > 0.0
    }

    pub fn require_calibrated(&self) -> Result<f64> {
        if self.is_calibrated() { Ok(self.c_tau) } else { Err(Error::Uncalibrated(self.c_tau)) }
    }

    /// Returns a copy with c_tau set by trace calibration.
    pub fn calibrated(&self) -> Result<Self> {
        let c = crate::algebra::calibrate_trace(self)?;
        Ok(Self { c_tau: c, ..self.clone() })
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(48, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        assert_eq!((c.n, c.n_pad, c.quad_order), (48, 96, 20));
        c.validate().unwrap();
        assert!(!c.is_calibrated());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ModelConfig::new(1, 1.0).validate().is_err());
        assert!(ModelConfig::new(8, 1.0).with_pad(4).validate().is_err());
        assert!(ModelConfig::new(8, -1.0).validate().is_err());
        let mut c = ModelConfig::new(8, 1.0);
        c.quad_order = 3;
        assert!(c.validate().is_err());
    }
}
