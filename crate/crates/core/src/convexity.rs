//! Unital completely positive maps, the operator Jensen inequality, the Schur
//! complement criterion and the integral formula for x^p.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doi::{matrix_power, row_major};
use crate::error::{Error, Result};
use crate::heat::HeatSemigroup;
use crate::linalg::{identity_defect, Operator, C64};
use crate::quadrature::gauss_legendre;
use crate::random::{complex_gaussian, derive_seed, random_positive, rng};

/// Tolerance for the unital and trace-preserving flags.
pub const KRAUS_TOL: f64 = 1e-10;

/// A positive linear map on square matrices.
pub trait PositiveMap: Sync {
    fn apply(&self, x: &Operator) -> Result<Operator>;
}

/// Φ(x) = Σ K_i x K_i*.
#[derive(Clone, Debug, PartialEq)]
pub struct CPMap {
    pub kraus: Vec<DMatrix<C64>>,
    pub unital: bool,
    pub trace_preserving: bool,
}

impl CPMap {
    pub fn new(kraus: Vec<DMatrix<C64>>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::InvalidConfig("empty Kraus family".into()))?;
        let (rows, cols) = first.shape();
        for k in &kraus {
            if k.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(k.nrows(), rows));
            }
        }
        let mut kk = DMatrix::zeros(rows, rows);
        let mut kstar_k = DMatrix::zeros(cols, cols);
        for k in &kraus {
            kk += k * k.adjoint();
            kstar_k += k.adjoint() * k;
        }
        Ok(Self {
            unital: identity_defect(&kk) <= KRAUS_TOL,
            trace_preserving: identity_defect(&kstar_k) <= KRAUS_TOL,
            kraus,
        })
    }

    /// Σ w_i U_i x U_i* for weights summing to one.
    pub fn unitary_mixture(parts: &[(f64, Operator)]) -> Result<Self> {
        Self::new(parts.iter().map(|(w, u)| u.entries() * C64::new(w.sqrt(), 0.0)).collect())
    }

    pub fn input_dim(&self) -> usize {
        self.kraus[0].ncols()
    }

    /// Φ ⊗ id_k, acting on k×k blocks of input-dimension matrices.
    pub fn tensor_identity(&self, k: usize) -> Result<Self> {
        let id = DMatrix::<C64>::identity(k, k);
        Self::new(self.kraus.iter().map(|m| m.kronecker(&id)).collect())
    }
}

impl PositiveMap for CPMap {
    fn apply(&self, x: &Operator) -> Result<Operator> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch(x.dim(), self.input_dim()));
        }
        let mut y = DMatrix::zeros(self.kraus[0].nrows(), self.kraus[0].nrows());
        for k in &self.kraus {
            y += k * x.entries() * k.adjoint();
        }
        let out = Operator::new(y);
        Ok(if x.is_flagged_positive() {
            out.symmetrized().with_positive()
        } else if x.is_flagged_hermitian() {
            out.symmetrized()
        } else {
            out
        })
    }
}

/// e^{−tΔ_θ} at a fixed time, viewed as a positive map.
pub struct HeatMap<'a> {
    pub heat: &'a dyn HeatSemigroup,
    pub t: f64,
}

impl PositiveMap for HeatMap<'_> {
    fn apply(&self, x: &Operator) -> Result<Operator> {
        self.heat.apply(self.t, x)
    }
}

/// K_i = S^{−1/2}G_i with G_i complex Gaussian and S = Σ G_iG_i*.
pub fn random_unital_cp(dim: usize, n_kraus: usize, seed: u64) -> Result<CPMap> {
    if dim < 2 || n_kraus == 0 {
        return Err(Error::InvalidConfig(format!("random CP map needs dim ≥ 2, n_kraus ≥ 1 (got {dim}, {n_kraus})")));
    }
    let mut r = rng(seed);
    let gs: Vec<DMatrix<C64>> = (0..n_kraus).map(|_| complex_gaussian(dim, dim, &mut r)).collect();
    let mut s = DMatrix::zeros(dim, dim);
    for g in &gs {
        s += g * g.adjoint();
    }
    let inv_root = Operator::new(s).symmetrized().map_spectrum(|v| 1.0 / v.sqrt());
    let map = CPMap::new(gs.iter().map(|g| inv_root.entries() * g).collect())?;
    if !map.unital {
        return Err(Error::NotConverged("Kraus normalisation failed".into()));
    }
    Ok(map)
}

/// min eig(Φ(u^p) − Φ(u)^p) without range checks.
pub fn jensen_gap_value(phi: &dyn PositiveMap, u: &Operator, p: f64) -> Result<f64> {
    let lhs = phi.apply(&matrix_power(u, p)?)?;
    let image = phi.apply(u)?.symmetrized().with_positive();
    let rhs = matrix_power(&image, p)?;
    Ok((&lhs - &rhs).symmetrized().min_eig())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenRecord {
    pub p: f64,
    pub seed: Option<u64>,
    pub gap: f64,
    /// Each Kraus operator row-major as (re, im) pairs; empty for non-Kraus maps.
    pub kraus: Vec<Vec<(f64, f64)>>,
    pub u: Vec<(f64, f64)>,
    pub dim: usize,
}

/// Jensen gap for 1 ≤ p ≤ 2; errors when it falls below −1e−9·‖u‖_∞^p.
pub fn jensen_gap(phi: &dyn PositiveMap, u: &Operator, p: f64) -> Result<f64> {
    jensen_gap_with_kraus(phi, None, u, p)
}

/// As `jensen_gap`, recording the Kraus family on violation.
pub fn jensen_gap_cp(phi: &CPMap, u: &Operator, p: f64) -> Result<f64> {
    jensen_gap_with_kraus(phi, Some(phi), u, p)
}

fn jensen_gap_with_kraus(phi: &dyn PositiveMap, kraus: Option<&CPMap>, u: &Operator, p: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidExponent(p));
    }
    let gap = jensen_gap_value(phi, u, p)?;
    let scale = u.spectral_norm().powf(p);
    if gap < -1e-9 * scale {
        let record = JensenRecord {
            p,
            seed: None,
            gap,
            kraus: kraus.map_or_else(Vec::new, |m| m.kraus.iter().map(|k| row_major(&Operator::new(k.clone()))).collect()),
            u: row_major(u),
            dim: u.dim(),
        };
        return Err(Error::JensenViolated { gap, record: serde_json::to_string(&record).unwrap_or_default() });
    }
    Ok(gap)
}

/// Seeded search for a unital CP map and positive u with Jensen gap below `threshold`
/// at exponent p. Returns the lowest-index hit among `trials` candidates.
pub fn find_jensen_counterexample(
    p: f64,
    dim: usize,
    n_kraus: usize,
    master_seed: u64,
    trials: usize,
    threshold: f64,
) -> Result<Option<JensenRecord>> {
    let hits: Vec<Option<JensenRecord>> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<Option<JensenRecord>> {
            let seed = derive_seed(master_seed, i as u64);
            let phi = random_unital_cp(dim, n_kraus, seed)?;
            let u = random_positive(dim, &mut rng(seed ^ 0x5EED));
            let u = u.scale(1.0 / u.spectral_norm());
            let gap = jensen_gap_value(&phi, &u, p)?;
            Ok((gap < threshold).then(|| JensenRecord {
                p,
                seed: Some(seed),
                gap,
                kraus: phi.kraus.iter().map(|k| row_major(&Operator::new(k.clone()))).collect(),
                u: row_major(&u),
                dim,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().flatten().next())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchurCheck {
    /// [[A, B], [B*, C]] ≥ 0.
    pub block: bool,
    /// C − B*A⁻¹B ≥ 0.
    pub complement: bool,
    pub block_min_eig: f64,
    pub complement_min_eig: f64,
}

impl SchurCheck {
    pub fn agree(&self) -> bool {
        self.block == self.complement
    }
}

/// Positivity of the block matrix and of its Schur complement, at 1e−10·scale.
pub fn schur_positive(a: &Operator, b: &Operator, c: &Operator) -> Result<SchurCheck> {
    let n = a.dim();
    if b.dim() != n || c.dim() != n {
        return Err(Error::DimensionMismatch(b.dim().max(c.dim()), n));
    }
    let sa = a.symmetrized().eigh();
    let na = sa.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let amin = sa.values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(amin > 1e-10 * na) {
        return Err(Error::IllConditioned(amin / na));
    }
    let a_inv = sa.recompose(|v| 1.0 / v);
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a.entries());
    m.view_mut((0, n), (n, n)).copy_from(b.entries());
    m.view_mut((n, 0), (n, n)).copy_from(&b.entries().adjoint());
    m.view_mut((n, n), (n, n)).copy_from(c.entries());
    let block = Operator::new(m).symmetrized();
    let comp = (c - &(&b.adjoint() * &(&a_inv * b))).symmetrized();
    let scale = [a, b, c].iter().map(|x| x.spectral_norm()).fold(1.0_f64, f64::max);
    let tol = 1e-10 * scale;
    let block_min_eig = block.min_eig();
    let complement_min_eig = comp.min_eig();
    Ok(SchurCheck {
        block: block_min_eig >= -tol,
        complement: complement_min_eig >= -tol,
        block_min_eig,
        complement_min_eig,
    })
}

/// Truncation of the log-substituted variable s = ln t.
pub const POWER_INTEGRAL_CUTOFF: f64 = 40.0;
const POWER_PANEL_NODES: usize = 16;

/// (sin((p−1)π)/π)∫₀^∞ t^{p−2}λ²/(t+λ)dt, which equals λ^p for 1 < p < 2.
/// Composite Gauss–Legendre in s = ln t on [−S, S] with panel doubling, plus the two
/// tails summed as convergent series.
pub fn power_integral_scalar(lambda: f64, p: f64) -> Result<f64> {
    let s_max = POWER_INTEGRAL_CUTOFF;
    let f = |s: f64| ((p - 1.0) * s).exp() * lambda * lambda / (s.exp() + lambda);
    let composite = |panels: usize| {
        let h = 2.0 * s_max / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let a = -s_max + k as f64 * h;
            total += gauss_legendre(POWER_PANEL_NODES, a, a + h).integrate(f);
        }
        total
    };
    let mut panels = 16;
    let mut prev = composite(panels);
    loop {
        panels *= 2;
        let next = composite(panels);
        if (next - prev).abs() <= 1e-13 * next.abs() {
            prev = next;
            break;
        }
        if panels >= 4096 {
            return Err(Error::QuadratureUnderresolved(format!(
                "power integral at λ={lambda}, p={p}: {prev} vs {next}"
            )));
        }
        prev = next;
    }
    // lower tail: λ·Σ(−e^{−S}/λ)^k e^{−(p−1)S}/(p−1+k)
    let x = (-s_max).exp() / lambda;
    let mut lower = 0.0;
    let mut term = lambda * (-(p - 1.0) * s_max).exp();
    for k in 0..60 {
        lower += term / (p - 1.0 + k as f64);
        term *= -x;
    }
    // upper tail: λ²·Σ(−λe^{−S})^k e^{(p−2)S}/(2−p+k)
    let y = lambda * (-s_max).exp();
    let mut upper = 0.0;
    let mut term = lambda * lambda * ((p - 2.0) * s_max).exp();
    for k in 0..60 {
        upper += term / (2.0 - p + k as f64);
        term *= -y;
    }
    Ok(((p - 1.0) * PI).sin() / PI * (prev + lower + upper))
}

/// ‖integral formula − x^p‖_F / ‖x^p‖_F for 1 < p < 2.
pub fn power_integral_check(x: &Operator, p: f64) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidExponent(p));
    }
    let s = x.symmetrized().eigh();
    if s.values.iter().any(|&v| !(1e-6..=1e6).contains(&v)) {
        return Err(Error::InvalidConfig("power integral needs spectrum in [1e-6, 1e6]".into()));
    }
    for &v in &s.values {
        power_integral_scalar(v, p)?;
    }
    let quad = s.recompose(|v| power_integral_scalar(v, p).unwrap_or(f64::NAN));
    let exact = matrix_power(x, p)?;
    Ok((&quad - &exact).frobenius() / exact.frobenius())
}
