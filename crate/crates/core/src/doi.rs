//! Double operator integrals and the power-nonlinearity estimate.

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Operator, C64};
use crate::lp::SingularProfile;
use crate::random::{complex_gaussian, derive_seed, random_positive, rng};

/// The symbol φ(λ,μ) = (λ^p − μ^p)/((λ − μ)(λ^{p−1} + μ^{p−1})).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiKernel {
    pub p: f64,
    /// Test hook: overrides the diagonal entries of every evaluated grid.
    pub grid_diagonal: Option<f64>,
}

impl PhiKernel {
    pub fn new(p: f64) -> Self {
        Self { p, grid_diagonal: None }
    }

    pub fn value(&self, lam: f64, mu: f64) -> f64 {
        phi_value(self.p, lam, mu)
    }

    /// ψ = φ − 1.
    pub fn psi(&self, lam: f64, mu: f64) -> f64 {
        self.value(lam, mu) - 1.0
    }

    /// [φ(λ_i, μ_j)], with |λ| < zero_tol treated as the axis.
    pub fn grid(&self, lam: &[f64], mu: &[f64], zero_tol: f64) -> DMatrix<f64> {
        let clean = |v: f64| if v.abs() < zero_tol { 0.0 } else { v.max(0.0) };
        let mut g = DMatrix::from_fn(lam.len(), mu.len(), |i, j| self.value(clean(lam[i]), clean(mu[j])));
        if let Some(d) = self.grid_diagonal {
            for i in 0..lam.len().min(mu.len()) {
                g[(i, i)] = d;
            }
        }
        g
    }
}

/// φ(λ,μ) for λ, μ ≥ 0: 1 on the axes, p/2 on the diagonal.
pub fn phi_value(p: f64, lam: f64, mu: f64) -> f64 {
    if lam == 0.0 || mu == 0.0 {
        return 1.0;
    }
    if lam == mu {
        return 0.5 * p;
    }
    let (hi, lo) = if lam > mu { (lam, mu) } else { (mu, lam) };
    // r = lo/hi ∈ (0,1); φ = [(1 − r^p)/(1 − r)]/(1 + r^{p−1})
    let ln_r = ((lo - hi) / hi).ln_1p();
    let ratio = (p * ln_r).exp_m1() / ln_r.exp_m1();
    ratio / (1.0 + ((p - 1.0) * ln_r).exp())
}

/// f(t) = sinh((p/2−1)t)/(cosh((p−1)t/2)·sinh(t/2)), f(0) = p − 2.
pub fn schwartz_f(p: f64, t: f64) -> f64 {
    let a = t.abs();
    if a == 0.0 {
        return p - 2.0;
    }
    let c = 0.5 * p - 1.0;
    if c == 0.0 {
        return 0.0;
    }
    let d = 0.5 * (p - 1.0);
    let ca = c.abs();
    // all exponentials have non-positive arguments
    let num = -(-2.0 * ca * a).exp_m1();
    let den = (1.0 + (-2.0 * d * a).exp()) * (-(-a).exp_m1());
    c.signum() * 2.0 * ((ca - d - 0.5) * a).exp() * num / den
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpGrid {
    /// Length of the sampled interval [−extent/2, extent/2].
    pub extent: f64,
    pub points: usize,
}

impl Default for CpGrid {
    fn default() -> Self {
        Self { extent: 80.0, points: 1 << 14 }
    }
}

/// ½‖f̂‖₁ with f̂(ξ) = ∫f(t)e^{−iξt}dt on a uniform grid.
fn half_fourier_l1(p: f64, grid: CpGrid) -> f64 {
    let n = grid.points;
    let dt = grid.extent / n as f64;
    let mut buf: Vec<C64> = (0..n)
        .map(|j| C64::new(schwartz_f(p, -0.5 * grid.extent + j as f64 * dt) * dt, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dxi = 2.0 * std::f64::consts::PI / grid.extent;
    0.5 * dxi * buf.iter().map(|z| z.norm()).sum::<f64>()
}

/// c_p = 1 + ½‖f̂‖₁, checked against a grid with doubled extent and resolution.
pub fn estimate_cp(p: f64, grid: CpGrid) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if p == 2.0 {
        return Ok(1.0);
    }
    let a = 1.0 + half_fourier_l1(p, grid);
    let b = 1.0 + half_fourier_l1(p, CpGrid { extent: 2.0 * grid.extent, points: 4 * grid.points });
    if (a - b).abs() > 0.005 * b {
        return Err(Error::NotConverged(format!("c_p at p={p}: {a} vs {b} under grid doubling")));
    }
    Ok(b)
}

/// Eigendecompositions of a Hermitian pair.
#[derive(Clone, Debug)]
pub struct SpectralPair {
    pub a_eigvals: Vec<f64>,
    pub a_basis: DMatrix<C64>,
    pub b_eigvals: Vec<f64>,
    pub b_basis: DMatrix<C64>,
}

impl SpectralPair {
    pub fn new(a: &Operator, b: &Operator) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch(a.dim(), b.dim()));
        }
        let sa = a.eigh();
        let sb = b.eigh();
        let pair = Self {
            a_eigvals: sa.values.clone(),
            a_basis: sa.basis(),
            b_eigvals: sb.values.clone(),
            b_basis: sb.basis(),
        };
        for (s, x) in [(&sa, a), (&sb, b)] {
            let scale = x.frobenius().max(f64::MIN_POSITIVE);
            let err = s.reconstruction_error(x);
            if err > 1e-10 * scale {
                return Err(Error::NotConverged(format!("eigendecomposition residual {err:.3e}")));
            }
        }
        Ok(pair)
    }

    pub fn dim(&self) -> usize {
        self.a_eigvals.len()
    }
}

/// T_φ(X) = U_A([φ_ij] ⊙ U_A* X U_B)U_B*.
pub fn doi_apply(pair: &SpectralPair, phi: &DMatrix<f64>, x: &Operator) -> Result<Operator> {
    let n = pair.dim();
    if x.dim() != n {
        return Err(Error::DimensionMismatch(x.dim(), n));
    }
    if phi.nrows() != n || phi.ncols() != n {
        return Err(Error::DimensionMismatch(phi.nrows(), n));
    }
    let mut inner = pair.a_basis.adjoint() * x.entries() * &pair.b_basis;
    for j in 0..n {
        for i in 0..n {
            inner[(i, j)] *= phi[(i, j)];
        }
    }
    Ok(Operator::new(&pair.a_basis * inner * pair.b_basis.adjoint()))
}

/// Relative tolerance below which eigenvalues count as zero.
pub const ZERO_EIG_TOL: f64 = 1e-12;

/// u^p by spectral calculus with eigenvalues clamped at 0; p = 0 gives the support projection.
pub fn matrix_power(u: &Operator, p: f64) -> Result<Operator> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    let s = u.eigh();
    let norm = s.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = s.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-8 * norm {
        return Err(Error::NotPositive { min_eig: min, norm });
    }
    if p == 1.0 {
        return Ok(u.clone());
    }
    let cut = ZERO_EIG_TOL * norm;
    Ok(s.recompose(|v| {
        if p == 0.0 {
            if v > cut { 1.0 } else { 0.0 }
        } else if v <= 0.0 {
            0.0
        } else {
            v.powf(p)
        }
    }))
}

/// A^{p−1}(A − B) + (A − B)B^{p−1}.
pub fn theorem_argument(a: &Operator, b: &Operator, p: f64) -> Result<Operator> {
    let d = a - b;
    let ap = matrix_power(a, p - 1.0)?;
    let bp = matrix_power(b, p - 1.0)?;
    Ok(&(&ap * &d) + &(&d * &bp))
}

/// T_φ^{A,B}(A^{p−1}(A−B) + (A−B)B^{p−1}), which equals A^p − B^p.
pub fn doi_power_difference(a: &Operator, b: &Operator, kernel: &PhiKernel) -> Result<Operator> {
    let pair = SpectralPair::new(a, b)?;
    let scale = pair
        .a_eigvals
        .iter()
        .chain(&pair.b_eigvals)
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let phi = kernel.grid(&pair.a_eigvals, &pair.b_eigvals, ZERO_EIG_TOL * scale);
    doi_apply(&pair, &phi, &theorem_argument(a, b, kernel.p)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub dim: usize,
    pub ratio: f64,
    pub c_p: f64,
    /// Row-major (re, im) pairs.
    pub a: Vec<(f64, f64)>,
    pub b: Vec<(f64, f64)>,
}

pub fn row_major(x: &Operator) -> Vec<(f64, f64)> {
    let n = x.dim();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let z = x.entries()[(i, j)];
            v.push((z.re, z.im));
        }
    }
    v
}

pub fn from_row_major(dim: usize, v: &[(f64, f64)]) -> Operator {
    Operator::new(DMatrix::from_fn(dim, dim, |i, j| {
        let (re, im) = v[i * dim + j];
        C64::new(re, im)
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityParams {
    pub p: f64,
    pub q: f64,
    pub trials: usize,
    pub dim: usize,
    pub seed: u64,
    pub grid: CpGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub p: f64,
    pub q: f64,
    pub c_p: f64,
    pub trials: usize,
    pub max_theorem_ratio: f64,
    pub max_cor42_ratio: f64,
    /// Only for 1 < q < ∞.
    pub max_cor44_ratio: Option<f64>,
    /// max ‖A^p − B^p − T_φ(...)‖_F / ‖A^p − B^p‖_F.
    pub max_identity_residual: f64,
}

struct Trial {
    theorem: f64,
    cor42: f64,
    cor44: Option<f64>,
    residual: f64,
    a: Operator,
    b: Operator,
    seed: u64,
}

fn schatten(x: &Operator, q: f64) -> f64 {
    SingularProfile::of(x, 1.0).norm(q).unwrap_or(f64::NAN)
}

fn random_hermitian(dim: usize, r: &mut crate::random::Rng) -> Operator {
    let x = complex_gaussian(dim, dim, r);
    Operator::new((&x + x.adjoint()) * C64::new(0.5, 0.0)).symmetrized()
}

fn run_trial(params: &NonlinearityParams, kernel: &PhiKernel, index: usize) -> Result<Trial> {
    let seed = derive_seed(params.seed, index as u64);
    let mut r = rng(seed);
    let (p, q, dim) = (params.p, params.q, params.dim);
    let a = random_positive(dim, &mut r);
    // alternate independent pairs, rescaled pairs and small perturbations
    let b = match index % 3 {
        0 => random_positive(dim, &mut r),
        1 => random_positive(dim, &mut r).scale((2.0 * rand::Rng::random::<f64>(&mut r) - 1.0).exp()),
        _ => {
            let root = matrix_power(&a, 0.5)?;
            let e = random_hermitian(dim, &mut r).scale(0.05);
            let s = &root + &e;
            Operator::new(s.entries() * s.entries()).symmetrized().with_positive()
        }
    };
    let direct = &matrix_power(&a, p)? - &matrix_power(&b, p)?;
    let via_doi = doi_power_difference(&a, &b, kernel)?;
    let residual = (&direct - &via_doi).frobenius() / direct.frobenius().max(f64::MIN_POSITIVE);
    let arg = theorem_argument(&a, &b, p)?;
    let theorem = schatten(&via_doi, q) / schatten(&arg, q);
    let pq = p * q;
    let d = &a - &b;
    let cor_den = schatten(&d, pq) * (schatten(&a, pq).powf(p - 1.0) + schatten(&b, pq).powf(p - 1.0));
    let cor42 = schatten(&via_doi, q) / cor_den;
    let cor44 = if q > 1.0 && q.is_finite() {
        let ha = random_hermitian(dim, &mut r);
        let hb = &ha + &random_hermitian(dim, &mut r).scale(0.3);
        let abs_a = ha.map_spectrum(f64::abs);
        let abs_b = hb.map_spectrum(f64::abs);
        let num = schatten(&(&matrix_power(&abs_a, p)? - &matrix_power(&abs_b, p)?), q);
        let dh = &ha - &hb;
        let den = schatten(&dh, pq) * (schatten(&ha, pq).powf(p - 1.0) + schatten(&hb, pq).powf(p - 1.0));
        Some(num / den)
    } else {
        None
    };
    Ok(Trial { theorem, cor42, cor44, residual, a, b, seed })
}

/// Randomised check of the nonlinearity bound and its Hölder corollary.
pub fn verify_nonlinearity(params: &NonlinearityParams) -> Result<NonlinearityReport> {
    verify_nonlinearity_with(params, &PhiKernel::new(params.p))
}

pub fn verify_nonlinearity_with(params: &NonlinearityParams, kernel: &PhiKernel) -> Result<NonlinearityReport> {
    let (p, q) = (params.p, params.q);
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidExponent(q));
    }
    let c_p = if p == 1.0 { 1.0 } else { estimate_cp(p, params.grid)? };
    let trials: Vec<Trial> = (0..params.trials)
        .into_par_iter()
        .map(|i| run_trial(params, kernel, i))
        .collect::<Result<_>>()?;
    let mut report = NonlinearityReport {
        p,
        q,
        c_p,
        trials: params.trials,
        max_theorem_ratio: 0.0,
        max_cor42_ratio: 0.0,
        max_cor44_ratio: None,
        max_identity_residual: 0.0,
    };
    let mut worst: Option<&Trial> = None;
    for t in &trials {
        if worst.is_none_or(|w| t.theorem.max(t.cor42) > w.theorem.max(w.cor42)) {
            worst = Some(t);
        }
        report.max_theorem_ratio = report.max_theorem_ratio.max(t.theorem);
        report.max_cor42_ratio = report.max_cor42_ratio.max(t.cor42);
        report.max_identity_residual = report.max_identity_residual.max(t.residual);
        if let Some(c) = t.cor44 {
            report.max_cor44_ratio = Some(report.max_cor44_ratio.map_or(c, |m: f64| m.max(c)));
        }
    }
    if let Some(w) = worst {
        let ratio = w.theorem.max(w.cor42);
        if ratio > c_p * (1.0 + 1e-9) {
            let record = Counterexample {
                p,
                q,
                seed: w.seed,
                dim: params.dim,
                ratio,
                c_p,
                a: row_major(&w.a),
                b: row_major(&w.b),
            };
            return Err(Error::BoundViolated {
                ratio,
                c_p,
                record: serde_json::to_string(&record).unwrap_or_default(),
            });
        }
    }
    Ok(report)
}
