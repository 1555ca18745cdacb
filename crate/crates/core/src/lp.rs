//! Generalised singular values and L^p norms on the matrix model.

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::linalg::Operator;

/// μ(t, x) as an exact step function: `values[k]` on [k·weight, (k+1)·weight).
#[derive(Clone, Debug, PartialEq)]
pub struct SingularProfile {
    pub values: Vec<f64>,
    pub weight: f64,
}

impl SingularProfile {
    /// Singular values of x, descending, with step width `weight`.
    pub fn of(x: &Operator, weight: f64) -> Self {
        let mut values: Vec<f64> = if x.hermitian_defect() == 0.0 {
            x.eigh().values.iter().map(|v| v.abs()).collect()
        } else {
            let g = Operator::new(x.entries().adjoint() * x.entries());
            g.eigh().values.iter().map(|v| v.max(0.0).sqrt()).collect()
        };
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values, weight }
    }

    /// μ(t): right-continuous decreasing step function.
    pub fn mu(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.values.first().copied().unwrap_or(0.0);
        }
        let k = (t / self.weight).floor() as usize;
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// Distribution function n(s) = weight·#{k : values[k] > s}.
    pub fn distribution(&self, s: f64) -> f64 {
        self.weight * self.values.iter().filter(|&&v| v > s).count() as f64
    }

    pub fn norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        if p.is_infinite() {
            return Ok(self.values.first().copied().unwrap_or(0.0));
        }
        let top = self.values.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return Ok(0.0);
        }
        // scale by the largest value to avoid overflow for large p
        let s: f64 = self.values.iter().map(|v| (v / top).powf(p)).sum();
        Ok(top * (self.weight * s).powf(1.0 / p))
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

pub fn singular_profile(cfg: &ModelConfig, x: &Operator) -> SingularProfile {
    SingularProfile::of(x, cfg.c_tau)
}

/// ‖x‖_p = (c_tau·Σ s_k^p)^{1/p}; ‖x‖_∞ = s_0.
pub fn lp_norm(cfg: &ModelConfig, x: &Operator, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if p.is_finite() {
        cfg.require_calibrated()?;
    }
    singular_profile(cfg, x).norm(p)
}

/// ‖xy‖_r − ‖x‖_p‖y‖_q for 1/r = 1/p + 1/q.
pub fn holder_defect(cfg: &ModelConfig, x: &Operator, y: &Operator, p: f64, q: f64, r: f64) -> Result<f64> {
    for e in [p, q, r] {
        check_exponent(e)?;
    }
    if ((1.0 / r) - (1.0 / p + 1.0 / q)).abs() > 1e-12 {
        return Err(Error::ExponentMismatch { p, q, r });
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    Ok(lp_norm(cfg, &(x * y), r)? - lp_norm(cfg, x, p)? * lp_norm(cfg, y, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig { c_tau: 2.5, ..ModelConfig::new(4, 1.0) }
    }

    #[test]
    fn zero_and_sorting() {
        let p = singular_profile(&cfg(), &Operator::zeros(3));
        assert_eq!(p.values, vec![0.0; 3]);
        let p = singular_profile(&cfg(), &Operator::from_diagonal(&[3.0, 1.0, 2.0]));
        assert_eq!(p.values, vec![3.0, 2.0, 1.0]);
        let p = singular_profile(&cfg(), &Operator::from_diagonal(&[-3.0, 1.0, 2.0]));
        assert_eq!(p.values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn step_function_semantics() {
        let p = SingularProfile { values: vec![3.0, 2.0, 1.0], weight: 2.5 };
        assert_eq!(p.mu(0.0), 3.0);
        assert_eq!(p.mu(2.4999), 3.0);
        assert_eq!(p.mu(2.5), 2.0);
        assert_eq!(p.mu(100.0), 0.0);
        assert_eq!(p.distribution(1.5), 5.0);
        assert_eq!(p.distribution(3.0), 0.0);
    }

    #[test]
    fn rank_one_projector() {
        let c = cfg();
        let proj = Operator::from_diagonal(&[1.0, 0.0, 0.0]);
        for p in [1.0, 1.5, 2.0, 7.0] {
            let v = lp_norm(&c, &proj, p).unwrap();
            assert!((v - c.c_tau.powf(1.0 / p)).abs() < 1e-14);
        }
        assert_eq!(lp_norm(&c, &proj, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn exponent_errors() {
        let c = cfg();
        let x = Operator::identity(2);
        assert!(matches!(lp_norm(&c, &x, 0.5), Err(Error::InvalidExponent(_))));
        assert!(matches!(lp_norm(&c, &x, f64::NAN), Err(Error::InvalidExponent(_))));
        assert!(matches!(holder_defect(&c, &x, &x, 2.0, 2.0, 2.0), Err(Error::ExponentMismatch { .. })));
        let raw = ModelConfig::new(4, 1.0);
        assert!(matches!(lp_norm(&raw, &x, 2.0), Err(Error::Uncalibrated(_))));
        assert_eq!(lp_norm(&raw, &x, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn identity_holder_is_tight() {
        let c = cfg();
        let x = Operator::identity(3);
        let d = holder_defect(&c, &x, &x, 2.0, 2.0, 1.0).unwrap();
        assert!(d.abs() < 1e-14);
    }
}
