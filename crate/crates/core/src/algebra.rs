//! Hermite-basis matrix model: ladder matrices, Weyl unitaries, λ_θ, translations, trace.

use nalgebra::DMatrix;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::linalg::{identity_defect, Operator, C64};
use crate::par::ordered_matrix_sum;
use crate::quadrature::{gauss_hermite, gauss_legendre, hermite_functions};

#[derive(Clone, Debug)]
pub struct Ladder {
    /// Position matrix, Hermitian tridiagonal.
    pub q: Operator,
    /// d/ds matrix, real antisymmetric tridiagonal.
    pub dq: Operator,
}

impl Ladder {
    /// Momentum −i·d/ds.
    pub fn p(&self) -> Operator {
        self.dq.scale_c(C64::new(0.0, -1.0)).with_hermitian()
    }
}

pub fn ladder_matrices(cfg: &ModelConfig) -> Ladder {
    let n = cfg.n_pad;
    let mut q = DMatrix::zeros(n, n);
    let mut dq = DMatrix::zeros(n, n);
    for k in 0..n.saturating_sub(1) {
        let c = ((k + 1) as f64 / 2.0).sqrt();
        q[(k, k + 1)] = C64::new(c, 0.0);
        q[(k + 1, k)] = C64::new(c, 0.0);
        dq[(k, k + 1)] = C64::new(c, 0.0);
        dq[(k + 1, k)] = C64::new(-c, 0.0);
    }
    Ladder { q: Operator::new(q).with_hermitian(), dq: Operator::new(dq) }
}

/// Coherent amplitude of W(ζ): W(ζ) = D(α) = exp(αa† − ᾱa).
pub fn weyl_alpha(h: f64, zeta: [f64; 2]) -> C64 {
    C64::new(zeta[0], zeta[1]) * (0.5 * h).sqrt()
}

/// Normalised Laguerre functions f_n = √(n!/(n+k)!)·x^{k/2}e^{−x/2}L_n^{(k)}(x), n < len,
/// by the forward recurrence in n.
fn laguerre_functions(k: usize, x: f64, len: usize, ln_fact: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; len];
    if len == 0 {
        return f;
    }
    f[0] = if x == 0.0 {
        if k == 0 { 1.0 } else { 0.0 }
    } else {
        (0.5 * k as f64 * x.ln() - 0.5 * x - 0.5 * ln_fact[k]).exp()
    };
    let kf = k as f64;
    let mut prev = 0.0;
    for n in 0..len - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - x) * f[n] - (nf * (nf + kf)).sqrt() * prev)
            / ((nf + 1.0) * (nf + kf + 1.0)).sqrt();
        prev = f[n];
        f[n + 1] = next;
    }
    f
}

/// Exact matrix elements ⟨m|D(α)|n⟩ for m < rows, n < cols, from the closed form
/// √(n!/m!)·α^{m−n}e^{−|α|²/2}L_n^{(m−n)}(|α|²) (m ≥ n) and its mirror.
pub fn displacement_block(alpha: C64, rows: usize, cols: usize) -> DMatrix<C64> {
    let mut d = DMatrix::zeros(rows, cols);
    if rows == 0 || cols == 0 {
        return d;
    }
    let x = alpha.norm_sqr();
    let phase = if x > 0.0 { alpha / x.sqrt() } else { C64::new(1.0, 0.0) };
    let kmax = rows.max(cols);
    let mut ln_fact = vec![0.0; kmax + 1];
    for j in 1..=kmax {
        ln_fact[j] = ln_fact[j - 1] + (j as f64).ln();
    }
    let mut ph = C64::new(1.0, 0.0);
    for k in 0..kmax {
        // below the diagonal: m = n + k, phase e^{ik arg α}
        let below = rows.saturating_sub(k).min(cols);
        // above the diagonal: n = m + k, phase (−1)^k e^{−ik arg α}
        let above = if k == 0 { 0 } else { cols.saturating_sub(k).min(rows) };
        let len = below.max(above);
        if len > 0 {
            let f = laguerre_functions(k, x, len, &ln_fact);
            for n in 0..below {
                d[(n + k, n)] = ph * f[n];
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let ph_up = ph.conj() * sign;
            for m in 0..above {
                d[(m, m + k)] = ph_up * f[m];
            }
        }
        ph *= phase;
    }
    d
}

/// N_pad×N_pad matrix of W(ζ).
pub fn weyl_operator(cfg: &ModelConfig, zeta: [f64; 2]) -> Result<Operator> {
    cfg.validate()?;
    if !(zeta[0].is_finite() && zeta[1].is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite zeta {zeta:?}")));
    }
    let w = displacement_block(weyl_alpha(cfg.h, zeta), cfg.n_pad, cfg.n_pad);
    let cols = w.columns(0, cfg.n);
    let defect = identity_defect(&(cols.adjoint() * cols));
    if defect > cfg.tol_leak {
        return Err(Error::LeakageExceeded { leakage: defect, tol: cfg.tol_leak });
    }
    Ok(Operator::new(w))
}

/// W(ζ) from Gauss–Hermite quadrature of the position-space kernel
/// e^{ik(s−x₀/2)}δ(s−s'−x₀) with x₀ = √h ζ₁, k = √h ζ₂.
pub fn weyl_operator_quadrature(cfg: &ModelConfig, zeta: [f64; 2], nodes: usize) -> Operator {
    let n = cfg.n_pad;
    let x0 = cfg.h.sqrt() * zeta[0];
    let k = cfg.h.sqrt() * zeta[1];
    let rule = gauss_hermite(nodes);
    let mut w = DMatrix::<C64>::zeros(n, n);
    for (&y, &ws) in rule.nodes.iter().zip(&rule.scaled_weights) {
        let left = hermite_functions(n, y + 0.5 * x0);
        let right = hermite_functions(n, y - 0.5 * x0);
        let phase = C64::from_polar(ws, k * y);
        for b in 0..n {
            let rb = phase * right[b];
            for a in 0..n {
                w[(a, b)] += rb * left[a];
            }
        }
    }
    Operator::new(w)
}

/// Default Gauss–Legendre nodes per axis for λ_θ.
pub const LAMBDA_NODES: usize = 96;

/// λ_θ(f) = ∫ f(ζ)W(ζ)dζ over the square [−R, R]².
pub fn lambda_theta<F>(cfg: &ModelConfig, f: F, support_radius: f64) -> Result<Operator>
where
    F: Fn(f64, f64) -> C64 + Sync,
{
    lambda_theta_with(cfg, f, support_radius, LAMBDA_NODES)
}

pub fn lambda_theta_with<F>(cfg: &ModelConfig, f: F, support_radius: f64, nodes: usize) -> Result<Operator>
where
    F: Fn(f64, f64) -> C64 + Sync,
{
    cfg.validate()?;
    let r = support_radius;
    let rule = gauss_legendre(nodes, -r, r);
    let m = cfg.n_pad;
    let total = ordered_matrix_sum(nodes * nodes, m, m, |idx| {
        let (i, j) = (idx / nodes, idx % nodes);
        let z = [rule.nodes[i], rule.nodes[j]];
        let fz = f(z[0], z[1]) * (rule.weights[i] * rule.weights[j]);
        if fz == C64::new(0.0, 0.0) {
            return DMatrix::zeros(m, m);
        }
        displacement_block(weyl_alpha(cfg.h, z), m, m) * fz
    });
    let full = Operator::new(total);
    let mass = full.frobenius().powi(2);
    if mass > 0.0 {
        let leakage = full.mass_outside(cfg.n) / mass;
        if leakage > cfg.tol_leak {
            return Err(Error::LeakageExceeded { leakage, tol: cfg.tol_leak });
        }
    }
    Ok(full.block(cfg.n))
}

/// Inner translation vector: T_s = Ad W(a) with a = −θ⁻¹s = J·s/h.
pub fn inner_translation(h: f64, s: [f64; 2]) -> [f64; 2] {
    [-s[1] / h, s[0] / h]
}

/// Conjugation y = W x W* using only the N×N block of W, with the fraction
/// of ‖x‖²_F that the full (isometric) conjugation sends outside the block.
pub fn conjugate_block(w: &DMatrix<C64>, x: &DMatrix<C64>) -> (DMatrix<C64>, f64) {
    let y = w * x * w.adjoint();
    let mx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let my: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    let leak = if mx > 0.0 { ((mx - my) / mx).max(0.0) } else { 0.0 };
    (y, leak)
}

/// T_s(x) together with its leakage.
pub fn translate_unchecked(cfg: &ModelConfig, s: [f64; 2], x: &Operator) -> (Operator, f64) {
    let n = x.dim();
    let a = inner_translation(cfg.h, s);
    let w = displacement_block(weyl_alpha(cfg.h, a), n, n);
    let (y, leak) = conjugate_block(&w, x.entries());
    let mut out = Operator::new(y);
    if x.is_flagged_positive() {
        out = out.with_positive();
    } else if x.is_flagged_hermitian() {
        out = out.with_hermitian();
    }
    (out, leak)
}

pub fn translate(cfg: &ModelConfig, s: [f64; 2], x: &Operator) -> Result<Operator> {
    cfg.validate()?;
    if x.dim() > cfg.n {
        return Err(Error::DimensionMismatch(x.dim(), cfg.n));
    }
    let (y, leak) = translate_unchecked(cfg, s, x);
    if leak > cfg.tol_leak {
        return Err(Error::LeakageExceeded { leakage: leak, tol: cfg.tol_leak });
    }
    Ok(y)
}

/// (i/√h)[Q, x] for j = 0 and (i/√h)[P, x] for j = 1, on the dimension of x.
pub fn derivation(cfg: &ModelConfig, j: usize, x: &Operator) -> Operator {
    let small = ModelConfig { n_pad: x.dim(), n: x.dim().min(cfg.n), ..cfg.clone() };
    let lad = ladder_matrices(&small);
    let g = if j == 0 { lad.q } else { lad.p() };
    let comm = &(&g * x) - &(x * &g);
    comm.scale_c(C64::new(0.0, 1.0 / cfg.h.sqrt()))
}

/// τ_θ(x) = c_tau·tr(x).
pub fn trace_theta(cfg: &ModelConfig, x: &Operator) -> Result<C64> {
    Ok(x.trace() * cfg.require_calibrated()?)
}

/// c_tau = 1/tr(𝒢₁), checked for stability across t ∈ {0.5, 1, 2}.
pub fn calibrate_trace(cfg: &ModelConfig) -> Result<f64> {
    cfg.validate()?;
    let mut cs = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let g = crate::heat::gaussian_operator(cfg, t)?;
        cs.push(1.0 / g.trace().re);
    }
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / cs[1];
    if !(spread <= 0.01) {
        return Err(Error::CalibrationUnstable { spread });
    }
    Ok(cs[1])
}
