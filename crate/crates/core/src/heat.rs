//! Gaussians, the Gaussian operator 𝒢_t and the heat semigroup e^{−tΔ_θ}.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::algebra::{conjugate_block, displacement_block, inner_translation, weyl_alpha};
use crate::config::{HeatRoute, ModelConfig};
use crate::error::{Error, Result};
use crate::linalg::{Operator, C64};
use crate::par::ordered_matrix_sum_with;
use crate::quadrature::{gauss_hermite, hermite_functions};

/// Classical heat kernel G_t on ℝ^d.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianSpec {
    pub t: f64,
    pub d: usize,
}

impl GaussianSpec {
    pub fn new(t: f64, d: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) || d == 0 {
            return Err(Error::InvalidConfig(format!("Gaussian needs t > 0, d ≥ 1 (t={t}, d={d})")));
        }
        Ok(Self { t, d })
    }

    /// G_t(0) = (4πt)^{−d/2}.
    pub fn peak(&self) -> f64 {
        (4.0 * PI * self.t).powf(-(self.d as f64) / 2.0)
    }

    pub fn density(&self, eta: &[f64]) -> f64 {
        let r2: f64 = eta.iter().map(|x| x * x).sum();
        self.peak() * (-r2 / (4.0 * self.t)).exp()
    }

    /// Ĝ_t(ξ) = e^{−t|ξ|²}.
    pub fn symbol(&self, xi: &[f64]) -> f64 {
        let r2: f64 = xi.iter().map(|x| x * x).sum();
        (-self.t * r2).exp()
    }
}

/// Extra Gauss–Hermite nodes per axis beyond N for the Gaussian operator.
const GAUSSIAN_EXTRA_NODES: usize = 4;
const GAUSSIAN_CHECK_NODES: usize = 8;

/// 𝒢_t = (2π)^{−2}λ_θ(Ĝ_t) on the working block.
pub fn gaussian_operator(cfg: &ModelConfig, t: f64) -> Result<Operator> {
    cfg.validate()?;
    GaussianSpec::new(t, 2)?;
    let k = cfg.n + GAUSSIAN_EXTRA_NODES;
    let a = gaussian_by_quadrature(cfg, t, k);
    let b = gaussian_by_quadrature(cfg, t, k + GAUSSIAN_CHECK_NODES);
    let rel = (&a - &b).frobenius() / b.frobenius();
    if !(rel <= 1e-9) {
        return Err(Error::QuadratureUnderresolved(format!(
            "Gaussian operator at t={t}: orders {k} and {} differ by {rel:.3e}",
            k + GAUSSIAN_CHECK_NODES
        )));
    }
    let out = b.symmetrized();
    // positive exactly when t ≥ h/4
    Ok(if t >= 0.25 * cfg.h { out.with_positive() } else { out })
}

/// Tensor Gauss–Hermite rule for the weight e^{−c|ξ|²}, c = t + h/4. The remaining
/// integrand e^{h|ξ|²/4}W(ξ) has polynomial entries of degree < 2N per axis, so the
/// rule is exact once the order reaches N.
fn gaussian_by_quadrature(cfg: &ModelConfig, t: f64, order: usize) -> Operator {
    let rule = gauss_hermite(order);
    let n = cfg.n;
    let c = t + 0.25 * cfg.h;
    let scale = 1.0 / c.sqrt();
    let (sum, _) = ordered_matrix_sum_with(order * order, n, n, |idx| {
        let (i, j) = (idx / order, idx % order);
        let xi = [rule.nodes[i] * scale, rule.nodes[j] * scale];
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        let w = rule.weights[i] * rule.weights[j] * (0.25 * cfg.h * r2).exp();
        (displacement_block(weyl_alpha(cfg.h, xi), n, n) * C64::new(w, 0.0), 0.0)
    });
    Operator::new(sum * C64::new(1.0 / (4.0 * PI * PI * c), 0.0))
}

/// Diagonal of 𝒢_t in the Hermite basis: a thermal state with occupation n̄ = 2t/h − ½,
/// normalised to trace 1/(2πh).
pub fn gaussian_diagonal(h: f64, t: f64, n: usize) -> Vec<f64> {
    let nbar = 2.0 * t / h - 0.5;
    let ratio = nbar / (nbar + 1.0);
    let top = 1.0 / ((nbar + 1.0) * 2.0 * PI * h);
    (0..n).map(|k| top * ratio.powi(k as i32)).collect()
}

/// Σ_t = [[t + a, a − t], [a − t, t + a]] with a = 1/(16t); det Σ_t = 1/4.
pub fn sigma_t(t: f64) -> [[f64; 2]; 2] {
    let a = 1.0 / (16.0 * t);
    [[t + a, a - t], [a - t, t + a]]
}

/// Position-space kernel of 𝒢_t at h = 1: (2π)^{−1}(4πt)^{−1/2}e^{−(x,y)·Σ_t(x,y)}.
pub fn gaussian_kernel(t: f64, x: f64, y: f64) -> f64 {
    let s = sigma_t(t);
    let q = s[0][0] * x * x + 2.0 * s[0][1] * x * y + s[1][1] * y * y;
    (-q).exp() / (2.0 * PI * (4.0 * PI * t).sqrt())
}

/// Relative error between c*·𝒢_t·c and ∫∫ f̄(x)K_t(x,y)f(y) for f = Σ c_n φ_n (Hermite functions).
pub fn kernel_form_residual(cfg: &ModelConfig, t: f64, coeffs: &[C64], nodes: usize) -> Result<f64> {
    if cfg.h != 1.0 {
        return Err(Error::InvalidConfig("the position kernel is tabulated for h = 1".into()));
    }
    if coeffs.len() > cfg.n {
        return Err(Error::DimensionMismatch(coeffs.len(), cfg.n));
    }
    let g = gaussian_operator(cfg, t)?;
    let mut lhs = C64::new(0.0, 0.0);
    for (i, ci) in coeffs.iter().enumerate() {
        for (j, cj) in coeffs.iter().enumerate() {
            lhs += ci.conj() * g.entries()[(i, j)] * cj;
        }
    }
    let rule = gauss_hermite(nodes);
    let f: Vec<C64> = rule
        .nodes
        .iter()
        .map(|&x| {
            let phi = hermite_functions(coeffs.len(), x);
            coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum()
        })
        .collect();
    let mut rhs = C64::new(0.0, 0.0);
    for i in 0..rule.len() {
        for j in 0..rule.len() {
            let (x, y) = (rule.nodes[i], rule.nodes[j]);
            let w = rule.scaled_weights[i] * rule.scaled_weights[j];
            rhs += f[i].conj() * f[j] * (w * gaussian_kernel(t, x, y));
        }
    }
    Ok((lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE))
}

/// The heat semigroup acting on working-block matrices.
pub trait HeatSemigroup: Send + Sync {
    /// e^{−tΔ}u with the relative mass lost to truncation.
    fn apply_with_leakage(&self, t: f64, u: &Operator) -> Result<(Operator, f64)>;

    fn tol_leak(&self) -> f64;

    fn apply(&self, t: f64, u: &Operator) -> Result<Operator> {
        let (y, leak) = self.apply_with_leakage(t, u)?;
        if leak > self.tol_leak() {
            return Err(Error::LeakageExceeded { leakage: leak, tol: self.tol_leak() });
        }
        Ok(y)
    }
}

/// Heat channel at fixed t: Σ_k w_k·W(a_k)·u·W(a_k)*.
#[derive(Clone, Debug)]
pub struct HeatChannel {
    pub t: f64,
    /// (w_k, s_k): Gauss–Hermite nodes of the density G_t on ℝ².
    pub nodes: Vec<(f64, [f64; 2])>,
    blocks: Vec<DMatrix<C64>>,
}

impl HeatChannel {
    pub fn new(cfg: &ModelConfig, t: f64) -> Result<Self> {
        cfg.validate()?;
        GaussianSpec::new(t, 2)?;
        let rule = gauss_hermite(cfg.quad_order);
        let mut nodes = Vec::with_capacity(rule.len() * rule.len());
        let r = 2.0 * t.sqrt();
        for i in 0..rule.len() {
            for j in 0..rule.len() {
                let w = rule.weights[i] * rule.weights[j] / PI;
                nodes.push((w, [r * rule.nodes[i], r * rule.nodes[j]]));
            }
        }
        let blocks = nodes
            .iter()
            .map(|(_, s)| displacement_block(weyl_alpha(cfg.h, inner_translation(cfg.h, *s)), cfg.n, cfg.n))
            .collect();
        Ok(Self { t, nodes, blocks })
    }

    pub fn weight_sum(&self) -> f64 {
        self.nodes.iter().map(|(w, _)| w).sum()
    }

    pub fn dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    /// Applies the channel; leakage is the weighted mass fraction sent outside the block.
    pub fn apply_unchecked(&self, u: &Operator) -> Result<(Operator, f64)> {
        let n = self.dim();
        if u.dim() != n {
            return Err(Error::DimensionMismatch(u.dim(), n));
        }
        let x = u.entries();
        let (y, leak) = ordered_matrix_sum_with(self.nodes.len(), n, n, |k| {
            let (yk, lk) = conjugate_block(&self.blocks[k], x);
            let w = self.nodes[k].0;
            (yk * C64::new(w, 0.0), w * lk)
        });
        let mut out = Operator::new(y);
        if u.is_flagged_positive() {
            out = out.symmetrized().with_positive();
        } else if u.is_flagged_hermitian() {
            out = out.symmetrized();
        }
        Ok((out, leak))
    }
}

/// Quadrature route: channels of step ≤ `max_step`, composed.
#[derive(Clone, Debug)]
pub struct QuadratureHeat {
    cfg: ModelConfig,
    pub max_step: f64,
}

impl QuadratureHeat {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg: cfg.clone(), max_step: 1.0 })
    }
}

impl HeatSemigroup for QuadratureHeat {
    fn apply_with_leakage(&self, t: f64, u: &Operator) -> Result<(Operator, f64)> {
        if t == 0.0 {
            return Ok((u.clone(), 0.0));
        }
        if u.dim() != self.cfg.n {
            return Err(Error::DimensionMismatch(u.dim(), self.cfg.n));
        }
        let steps = (t / self.max_step).ceil().max(1.0) as usize;
        let ch = HeatChannel::new(&self.cfg, t / steps as f64)?;
        let mut y = u.clone();
        let mut leak = 0.0;
        for _ in 0..steps {
            let (next, l) = ch.apply_unchecked(&y)?;
            leak += l;
            y = next;
        }
        Ok((y, leak))
    }

    fn tol_leak(&self) -> f64 {
        self.cfg.tol_leak
    }
}

/// Generator route: exp(−tΔ) with Δ the double-commutator Laplacian compressed to
/// the working block. Δ preserves every band i − j = k and is real symmetric
/// tridiagonal on it, so each band is diagonalised once and reused for all t.
#[derive(Debug)]
pub struct GeneratorHeat {
    n: usize,
    h: f64,
    tol_leak: f64,
    bands: Vec<OnceLock<(DMatrix<f64>, Vec<f64>)>>,
}

impl GeneratorHeat {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            n: cfg.n,
            h: cfg.h,
            tol_leak: cfg.tol_leak,
            bands: (0..cfg.n).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Tridiagonal band generator: diagonal and off-diagonal entries.
    pub fn band_generator(n: usize, h: f64, k: usize) -> (Vec<f64>, Vec<f64>) {
        let len = n - k;
        let diag = (0..len).map(|m| (4 * m + 2 * k + 2) as f64 / h).collect();
        let off = (0..len.saturating_sub(1))
            .map(|m| -2.0 * (((m + k + 1) * (m + 1)) as f64).sqrt() / h)
            .collect();
        (diag, off)
    }

    fn band(&self, k: usize) -> &(DMatrix<f64>, Vec<f64>) {
        self.bands[k].get_or_init(|| {
            let (diag, off) = Self::band_generator(self.n, self.h, k);
            let len = diag.len();
            let mut m = DMatrix::zeros(len, len);
            for i in 0..len {
                m[(i, i)] = diag[i];
                if i + 1 < len {
                    m[(i, i + 1)] = off[i];
                    m[(i + 1, i)] = off[i];
                }
            }
            let e = SymmetricEigen::new(m);
            (e.eigenvectors, e.eigenvalues.iter().copied().collect())
        })
    }

    fn evolve_band(&self, k: usize, t: f64, v: &[C64]) -> Vec<C64> {
        let (vecs, vals) = self.band(k);
        let len = v.len();
        let mut coef = vec![C64::new(0.0, 0.0); len];
        for j in 0..len {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..len {
                s += v[i] * vecs[(i, j)];
            }
            coef[j] = s * (-t * vals[j]).exp();
        }
        let mut out = vec![C64::new(0.0, 0.0); len];
        for j in 0..len {
            let c = coef[j];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..len {
                out[i] += c * vecs[(i, j)];
            }
        }
        out
    }
}

impl HeatSemigroup for GeneratorHeat {
    fn apply_with_leakage(&self, t: f64, u: &Operator) -> Result<(Operator, f64)> {
        let n = self.n;
        if u.dim() != n {
            return Err(Error::DimensionMismatch(u.dim(), n));
        }
        if t == 0.0 {
            return Ok((u.clone(), 0.0));
        }
        let x = u.entries();
        let mut y = DMatrix::zeros(n, n);
        let max_band = if u.is_diagonal() { 0 } else { n - 1 };
        for k in 0..=max_band {
            let lower: Vec<C64> = (0..n - k).map(|m| x[(m + k, m)]).collect();
            for (m, z) in self.evolve_band(k, t, &lower).into_iter().enumerate() {
                y[(m + k, m)] = z;
            }
            if k > 0 {
                let upper: Vec<C64> = (0..n - k).map(|m| x[(m, m + k)]).collect();
                for (m, z) in self.evolve_band(k, t, &upper).into_iter().enumerate() {
                    y[(m, m + k)] = z;
                }
            }
        }
        let before = u.trace().re;
        let mut out = Operator::new(y);
        if u.is_flagged_positive() {
            out = out.symmetrized().with_positive();
        } else if u.is_flagged_hermitian() {
            out = out.symmetrized();
        }
        // trace lost through the truncation edge (meaningful for positive data)
        let leak = if before > 0.0 { ((before - out.trace().re) / before).max(0.0) } else { 0.0 };
        Ok((out, leak))
    }

    fn tol_leak(&self) -> f64 {
        self.tol_leak
    }
}

/// Semigroup selected by `cfg.heat_route`.
pub fn heat_semigroup(cfg: &ModelConfig) -> Result<Box<dyn HeatSemigroup>> {
    Ok(match cfg.heat_route {
        HeatRoute::Quadrature => Box::new(QuadratureHeat::new(cfg)?),
        HeatRoute::Generator => Box::new(GeneratorHeat::new(cfg)?),
    })
}

/// e^{−tΔ_θ}u by the configured route.
pub fn heat_apply(cfg: &ModelConfig, t: f64, u: &Operator) -> Result<Operator> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("heat time t = {t}")));
    }
    heat_semigroup(cfg)?.apply(t, u)
}

/// Δ_θu = h⁻¹([Q,[Q,u]] + [P,[P,u]]) compressed to the working block.
pub fn laplacian_apply(cfg: &ModelConfig, u: &Operator) -> Operator {
    let n = u.dim();
    let x = u.entries();
    let mut y = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let mut z = x[(i, j)] * (2 * i + 2 * j + 2) as f64;
            if i + 1 < n && j + 1 < n {
                z -= x[(i + 1, j + 1)] * (2.0 * (((i + 1) * (j + 1)) as f64).sqrt());
            }
            if i > 0 && j > 0 {
                z -= x[(i - 1, j - 1)] * (2.0 * ((i * j) as f64).sqrt());
            }
            y[(i, j)] = z / cfg.h;
        }
    }
    let out = Operator::new(y);
    if u.is_flagged_hermitian() { out.with_hermitian() } else { out }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TauberianReport {
    /// max over the grid of (4πt)^{d/2}‖e^{−tΔ}u‖_∞.
    pub value: f64,
    /// The functional at t_max.
    pub trend_at_tmax: f64,
    /// Functional samples (t, value).
    pub samples: Vec<(f64, f64)>,
}

/// Relative rise over the last grid step above which the grid is judged too short.
pub const TAUBERIAN_RISE_TOL: f64 = 0.01;

/// `n` log-spaced points in [a, b].
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![b];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Tauberian functional sup_t (4πt)^{d/2}‖sup-norm of heat(t)‖ for any model,
/// given a closure returning the sup norm of e^{−tΔ}u.
pub fn tauberian_from(
    d: f64,
    t_grid: &[f64],
    mut sup_at: impl FnMut(f64) -> Result<f64>,
) -> Result<TauberianReport> {
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let v = (4.0 * PI * t).powf(d / 2.0) * sup_at(t)?;
        samples.push((t, v));
    }
    let value = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let trend = samples.last().map_or(f64::NAN, |s| s.1);
    if samples.len() >= 2 {
        let prev = samples[samples.len() - 2].1;
        if trend > prev * (1.0 + TAUBERIAN_RISE_TOL) {
            return Err(Error::GridTooShort { t_max: samples.last().unwrap().0 });
        }
    }
    Ok(TauberianReport { value, trend_at_tmax: trend, samples })
}

pub fn tauberian_functional(
    heat: &dyn HeatSemigroup,
    u: &Operator,
    t_grid: &[f64],
) -> Result<TauberianReport> {
    tauberian_from(2.0, t_grid, |t| Ok(heat.apply(t, u)?.spectral_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ladder_matrices;

    #[test]
    fn gaussian_spec_peak() {
        let g = GaussianSpec::new(1.0, 1).unwrap();
        assert!((g.peak() - (4.0 * PI).powf(-0.5)).abs() < 1e-16);
        assert!(GaussianSpec::new(0.0, 2).is_err());
    }

    #[test]
    fn laplacian_kills_identity() {
        let c = ModelConfig::new(10, 1.0);
        let y = laplacian_apply(&c, &Operator::identity(10));
        // the compression leaves only the edge term
        assert!(y.block(9).max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_matches_double_commutator() {
        let c = ModelConfig::new(12, 0.7).with_pad(24);
        let mut x = DMatrix::zeros(12, 12);
        for j in 0..12 {
            for i in 0..12 {
                x[(i, j)] = C64::new((i as f64 * 0.3 - j as f64).sin(), (i * j) as f64 * 0.01);
            }
        }
        let u = Operator::new(x);
        let l = ladder_matrices(&c);
        let p = l.p();
        let ue = u.embed(24);
        let comm = |g: &Operator, y: &Operator| &(g * y) - &(y * g);
        let dc = &comm(&l.q, &comm(&l.q, &ue)) + &comm(&p, &comm(&p, &ue));
        let want = dc.scale(1.0 / c.h).block(12);
        let got = laplacian_apply(&c, &u);
        assert!((&got - &want).max_abs() < 1e-12);
    }

    #[test]
    fn generator_band_matches_laplacian() {
        let c = ModelConfig::new(9, 1.3);
        let g = GeneratorHeat::new(&c).unwrap();
        let mut x = DMatrix::zeros(9, 9);
        x[(5, 2)] = C64::new(1.0, 0.0);
        let u = Operator::new(x);
        let small = 1e-7;
        let (y, _) = g.apply_with_leakage(small, &u).unwrap();
        let fd = (&u - &y).scale(1.0 / small);
        let lap = laplacian_apply(&c, &u);
        assert!((&fd - &lap).max_abs() < 1e-3);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 50.0, 30);
        assert_eq!(g.len(), 30);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[29] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_determinant_is_quarter() {
        for t in [0.1, 0.25, 1.0, 3.7] {
            let s = sigma_t(t);
            let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
            assert!((det - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_matches_position_kernel() {
        let c = ModelConfig::new(24, 1.0);
        for t in [0.25, 1.0, 4.0] {
            let coeffs: Vec<C64> = (0..8).map(|k| C64::new(1.0 / (1.0 + k as f64), 0.3 * k as f64)).collect();
            let r = kernel_form_residual(&c, t, &coeffs, 80).unwrap();
            assert!(r < 1e-6, "t={t}: {r:.3e}");
        }
    }

    #[test]
    fn gaussian_diagonal_matches_quadrature() {
        for (h, t) in [(1.0, 0.5), (1.0, 2.0), (0.5, 0.3)] {
            let c = ModelConfig::new(20, h);
            let g = gaussian_operator(&c, t).unwrap();
            let d = gaussian_diagonal(h, t, 20);
            let want = Operator::from_diagonal(&d);
            assert!((&g - &want).max_abs() < 1e-14, "h={h} t={t}");
        }
    }
}
