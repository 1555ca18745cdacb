use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::EvolutionModel;
use crate::config::ModelConfig;
use crate::doi::matrix_power;
use crate::error::{Error, Result};
use crate::heat::{gaussian_diagonal, heat_semigroup, GeneratorHeat, HeatSemigroup};
use crate::linalg::Operator;
use crate::lp::lp_norm;

/// Dense matrix model on the working block.
pub struct MatrixModel {
    pub cfg: ModelConfig,
    heat: Box<dyn HeatSemigroup>,
}

impl MatrixModel {
    /// Needs a calibrated trace for the L^q norms.
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.require_calibrated()?;
        Ok(Self { cfg: cfg.clone(), heat: heat_semigroup(cfg)? })
    }
}

impl EvolutionModel for MatrixModel {
    type State = Operator;

    fn dimension(&self) -> f64 {
        2.0
    }

    fn heat(&self, t: f64, u: &Operator) -> Result<Operator> {
        self.heat.apply(t, u)
    }

    fn power(&self, u: &Operator, p: f64) -> Result<Operator> {
        matrix_power(u, p)
    }

    fn combine(&self, a: f64, x: &Operator, b: f64, y: &Operator) -> Result<Operator> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch(x.dim(), y.dim()));
        }
        let out = x.combine(a, y, b);
        Ok(if a >= 0.0 && b >= 0.0 && x.is_flagged_positive() && y.is_flagged_positive() {
            out.with_positive()
        } else {
            out
        })
    }

    fn sup_norm(&self, u: &Operator) -> f64 {
        u.spectral_norm()
    }

    fn lq_norm(&self, u: &Operator, q: f64) -> Result<f64> {
        lp_norm(&self.cfg, u, q)
    }

    fn mass(&self, u: &Operator) -> f64 {
        self.cfg.c_tau * u.trace().re
    }

    fn min_value(&self, u: &Operator) -> f64 {
        u.symmetrized().min_eig()
    }
}

/// Default number of Hermite levels kept by the radial model.
pub const DEFAULT_RADIAL_DIM: usize = 1536;

struct RadialBasis {
    vecs: DMatrix<f64>,
    vals: DVector<f64>,
}

fn radial_basis(n: usize, h: f64) -> Arc<RadialBasis> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<OnceLock<Arc<RadialBasis>>>>>> = OnceLock::new();
    let slot = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        map.entry((n, h.to_bits())).or_default().clone()
    };
    slot.get_or_init(|| {
        let (diag, off) = GeneratorHeat::band_generator(n, h, 0);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        let e = SymmetricEigen::new(m);
        Arc::new(RadialBasis { vecs: e.eigenvectors, vals: e.eigenvalues })
    })
    .clone()
}

/// Operators diagonal in the Hermite basis. This subalgebra is invariant under Δ_θ
/// and under u ↦ u^p, so radial data evolve exactly inside it; the state is the
/// diagonal and the heat flow is the band-0 generator on `dim` levels.
#[derive(Clone)]
pub struct RadialModel {
    pub h: f64,
    pub c_tau: f64,
    pub tol_leak: f64,
    pub dim: usize,
    basis: Arc<RadialBasis>,
}

impl RadialModel {
    pub fn new(cfg: &ModelConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        let c_tau = cfg.require_calibrated()?;
        if dim < 2 {
            return Err(Error::InvalidConfig(format!("radial dimension {dim}")));
        }
        Ok(Self { h: cfg.h, c_tau, tol_leak: cfg.tol_leak, dim, basis: radial_basis(dim, cfg.h) })
    }

    /// amplitude·𝒢_{t0}.
    pub fn gaussian(&self, amplitude: f64, t0: f64) -> Vec<f64> {
        gaussian_diagonal(self.h, t0, self.dim).into_iter().map(|v| amplitude * v).collect()
    }

    pub fn to_operator(u: &[f64]) -> Operator {
        Operator::from_diagonal(u)
    }
}

impl EvolutionModel for RadialModel {
    type State = Vec<f64>;

    fn dimension(&self) -> f64 {
        2.0
    }

    fn heat(&self, t: f64, u: &Vec<f64>) -> Result<Vec<f64>> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch(u.len(), self.dim));
        }
        if t == 0.0 {
            return Ok(u.clone());
        }
        let b = &self.basis;
        let v = DVector::from_column_slice(u);
        let mut coef = b.vecs.tr_mul(&v);
        for (c, l) in coef.iter_mut().zip(b.vals.iter()) {
            *c *= (-t * l).exp();
        }
        let out: Vec<f64> = (&b.vecs * coef).iter().copied().collect();
        let before: f64 = u.iter().sum();
        let top = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let nonneg = u.iter().all(|&x| x >= -1e-12 * top);
        if before > 0.0 && nonneg {
            let after: f64 = out.iter().sum();
            let leak = (before - after) / before;
            if leak > self.tol_leak {
                return Err(Error::LeakageExceeded { leakage: leak, tol: self.tol_leak });
            }
        }
        Ok(out)
    }

    fn power(&self, u: &Vec<f64>, p: f64) -> Result<Vec<f64>> {
        let top = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if let Some(&bad) = u.iter().find(|&&x| x < -1e-8 * top) {
            return Err(Error::NotPositive { min_eig: bad, norm: top });
        }
        Ok(u.iter().map(|&x| if x > 0.0 { x.powf(p) } else { 0.0 }).collect())
    }

    fn combine(&self, a: f64, x: &Vec<f64>, b: f64, y: &Vec<f64>) -> Result<Vec<f64>> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(x.len(), y.len()));
        }
        Ok(x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
    }

    fn sup_norm(&self, u: &Vec<f64>) -> f64 {
        u.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn lq_norm(&self, u: &Vec<f64>, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidExponent(q));
        }
        let top = self.sup_norm(u);
        if q.is_infinite() || top == 0.0 {
            return Ok(top);
        }
        let s: f64 = u.iter().map(|x| (x.abs() / top).powf(q)).sum();
        Ok(top * (self.c_tau * s).powf(1.0 / q))
    }

    fn mass(&self, u: &Vec<f64>) -> f64 {
        self.c_tau * u.iter().sum::<f64>()
    }

    fn min_value(&self, u: &Vec<f64>) -> f64 {
        u.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
