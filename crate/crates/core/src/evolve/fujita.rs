use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Exponents and constants of the small-data global existence argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FujitaParams {
    pub d: f64,
    pub p: f64,
    /// 1 + 2/d.
    pub p_f: f64,
    /// d(p−1)/2.
    pub r: f64,
    pub q: f64,
    /// 1/(p−1) − d/(2q).
    pub beta: f64,
    /// (4π)^{−d(p−1)/(2q)}.
    pub c_beta: f64,
    /// Γ((p−1)β)Γ(1−pβ)/Γ(1−β).
    pub gamma_factor: f64,
}

/// Open interval of admissible q: q > p and 0 < pβ < 1, i.e.
/// 1/(p−1) − 1/p < d/(2q) < 1/(p−1).
pub fn admissible_q(d: f64, p: f64) -> Option<(f64, f64)> {
    if !(d > 0.0 && p > 1.0 && p.is_finite()) {
        return None;
    }
    let lo = p.max(0.5 * d * (p - 1.0));
    let hi = 0.5 * d * p * (p - 1.0);
    (lo < hi).then_some((lo, hi))
}

/// Parameters with q at the midpoint of the admissible interval.
pub fn fujita_params(d: f64, p: f64) -> Result<FujitaParams> {
    let (lo, hi) = admissible_q(d, p).ok_or(Error::NoAdmissibleQ { d, p })?;
    FujitaParams::with_q(d, p, 0.5 * (lo + hi))
}

impl FujitaParams {
    pub fn with_q(d: f64, p: f64, q: f64) -> Result<Self> {
        let (lo, hi) = admissible_q(d, p).ok_or(Error::NoAdmissibleQ { d, p })?;
        if !(q > lo && q < hi) {
            return Err(Error::NoAdmissibleQ { d, p });
        }
        let beta = 1.0 / (p - 1.0) - d / (2.0 * q);
        let k = d * (p - 1.0) / (2.0 * q);
        Ok(Self {
            d,
            p,
            p_f: 1.0 + 2.0 / d,
            r: 0.5 * d * (p - 1.0),
            q,
            beta,
            c_beta: (4.0 * std::f64::consts::PI).powf(-k),
            gamma_factor: gamma((p - 1.0) * beta) * gamma(1.0 - p * beta) / gamma(1.0 - beta),
        })
    }

    /// d(p−1)/(2q) + (p−1)β, identically 1.
    pub fn exponent_identity(&self) -> f64 {
        self.d * (self.p - 1.0) / (2.0 * self.q) + (self.p - 1.0) * self.beta
    }

    /// Largest M with α + C_β·Γ-factor·M^p ≤ M, if any.
    pub fn m_max(&self, alpha: f64) -> Option<f64> {
        let k = self.c_beta * self.gamma_factor;
        let p = self.p;
        let g = |m: f64| m - k * m.powf(p) - alpha;
        // g is concave with its maximum at m*
        let m_star = (1.0 / (p * k)).powf(1.0 / (p - 1.0));
        if g(m_star) < 0.0 {
            return None;
        }
        let (mut a, mut b) = (m_star, (1.0 / k).powf(1.0 / (p - 1.0)));
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(mid) >= 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Some(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d2_p3_q4() {
        let f = FujitaParams::with_q(2.0, 3.0, 4.0).unwrap();
        assert_eq!(f.r, 2.0);
        assert_eq!(f.beta, 0.25);
        assert_eq!(f.p * f.beta, 0.75);
        assert_eq!(f.exponent_identity(), 1.0);
        assert!((f.gamma_factor - 5.2441).abs() < 1e-3);
    }

    #[test]
    fn interval_and_midpoint() {
        assert_eq!(admissible_q(2.0, 3.0), Some((3.0, 6.0)));
        assert_eq!(fujita_params(2.0, 3.0).unwrap().q, 4.5);
        assert!(matches!(fujita_params(2.0, 2.0), Err(Error::NoAdmissibleQ { .. })));
        assert!(matches!(fujita_params(1.0, 3.0), Err(Error::NoAdmissibleQ { .. })));
        assert!(fujita_params(1.0, 3.2).is_ok());
        assert!(fujita_params(3.0, 1.7).is_ok());
        assert!(matches!(FujitaParams::with_q(2.0, 3.0, 6.0), Err(Error::NoAdmissibleQ { .. })));
    }

    #[test]
    fn m_max_solves_smallness() {
        let f = fujita_params(2.0, 3.0).unwrap();
        let k = f.c_beta * f.gamma_factor;
        let m = f.m_max(0.01).unwrap();
        assert!((0.01 + k * m.powi(3) - m).abs() < 1e-12);
        assert!(f.m_max(10.0).is_none());
    }
}
