//! Commutative reference: spectral heat solver on a periodic box [−L, L)^d, d ≤ 3,
//! with the same evolution and classification interface as the matrix model.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{
    classify_cell, lemma61_certificate, CellResult, Certificate, ClassifyParams, EvolutionModel, GridInfo,
};
use crate::heat::{tauberian_from, TauberianReport};

/// Largest tolerated fraction of |u| outside the central half box.
pub const BOX_TOL: f64 = 1e-8;
/// Spectral energy fraction above n/4 tolerated when coarsening onto a doubled box
/// (amplitude error about BOX_TOL).
pub const EXPAND_SMOOTHNESS: f64 = 1e-16;
/// Boundary fraction at which a field is moved to a doubled box before stepping.
const EXPAND_AT: f64 = 1e-2 * BOX_TOL;
const MAX_EXPANSIONS: usize = 40;
/// Cap on n^d when padding a rough field onto a larger box.
pub const MAX_GRID_POINTS: usize = 1 << 21;

/// Samples on the periodic box [−L, L)^d, row-major with the last axis contiguous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub d: usize,
    pub l: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Signed frequency index of FFT slot k.
fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 { k as i64 } else { k as i64 - n as i64 }
}

fn fft_axes(data: &mut [Complex64], d: usize, n: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut line = vec![Complex64::default(); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            fft.process(data);
            continue;
        }
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

impl GridField {
    pub fn new(d: usize, l: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidConfig(format!("dimension {d} not in 1..=3")));
        }
        if n < 4 || n % 4 != 0 {
            return Err(Error::InvalidConfig(format!("n = {n} must be a positive multiple of 4")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidConfig(format!("half-box {l}")));
        }
        if values.len() != n.pow(d as u32) {
            return Err(Error::DimensionMismatch(values.len(), n.pow(d as u32)));
        }
        Ok(Self { d, l, n, values })
    }

    pub fn from_fn(d: usize, l: f64, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let total = n.pow(d as u32);
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for a in (0..d).rev() {
                x[a] = -l + (r % n) as f64 * 2.0 * l / n as f64;
                r /= n;
            }
            values.push(f(&x));
        }
        Self::new(d, l, n, values)
    }

    /// amplitude·G_s with G_s(x) = (4πs)^{−d/2}e^{−|x|²/4s}.
    pub fn gaussian(d: usize, l: f64, n: usize, amplitude: f64, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidConfig(format!("Gaussian time {s}")));
        }
        let c = amplitude * (4.0 * PI * s).powf(-(d as f64) / 2.0);
        Self::from_fn(d, l, n, |x| c * (-x.iter().map(|v| v * v).sum::<f64>() / (4.0 * s)).exp())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    pub fn info(&self) -> GridInfo {
        GridInfo { d: self.d, l: self.l, n: self.n }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidExponent(q));
        }
        let top = self.sup();
        if q.is_infinite() || top == 0.0 {
            return Ok(top);
        }
        let s: f64 = self.values.iter().map(|v| (v.abs() / top).powf(q)).sum();
        Ok(top * (s * self.cell_volume()).powf(1.0 / q))
    }

    /// Fraction of Σ|u| at points with some |x_k| > L/2.
    pub fn boundary_fraction(&self) -> f64 {
        let n = self.n;
        let (lo, hi) = (n / 4, 3 * n / 4);
        let mut inside = 0.0;
        let mut total = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            let a = v.abs();
            total += a;
            let mut r = idx;
            let mut central = true;
            for _ in 0..self.d {
                let i = r % n;
                r /= n;
                central &= (lo..=hi).contains(&i);
            }
            if central {
                inside += a;
            }
        }
        if total == 0.0 { 0.0 } else { (total - inside) / total }
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let (fwd, _) = plans(self.n);
        let mut data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_axes(&mut data, self.d, self.n, &fwd);
        data
    }

    /// Share of spectral energy at |k|_∞ ≥ n/4.
    pub fn high_frequency_fraction(&self) -> f64 {
        self.spectral_tail(self.n / 4)
    }

    fn spectral_tail(&self, cutoff: usize) -> f64 {
        let n = self.n;
        let spec = self.spectrum();
        let mut high = 0.0;
        let mut total = 0.0;
        for (idx, c) in spec.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            let mut r = idx;
            let mut is_high = false;
            for _ in 0..self.d {
                is_high |= wavenumber(r % n, n).unsigned_abs() as usize >= cutoff;
                r /= n;
            }
            if is_high {
                high += e;
            }
        }
        if total == 0.0 { 0.0 } else { high / total }
    }

    /// Doubles the box. Keeps n and coarsens when the field is resolved on half the
    /// points, otherwise zero-pads to 2n while the total size allows it.
    pub fn expand(&self) -> Result<Self> {
        if self.high_frequency_fraction() <= EXPAND_SMOOTHNESS {
            return self.regrid(2.0 * self.l, self.n);
        }
        if (2 * self.n).pow(self.d as u32) <= MAX_GRID_POINTS {
            return self.regrid(2.0 * self.l, 2 * self.n);
        }
        Err(Error::BoxTooSmall { boundary_mass: self.boundary_fraction() })
    }

    /// Samples onto [−l, l)^d with n points per axis. The new box must contain the old
    /// one and the new spacing must be a power-of-two multiple of the old.
    pub fn regrid(&self, l: f64, n: usize) -> Result<Self> {
        let (dx, new_dx) = (self.dx(), 2.0 * l / n as f64);
        let ratio = new_dx / dx;
        let step = ratio.round() as usize;
        let offset = (l - self.l) / dx;
        if l < self.l || step == 0 || !step.is_power_of_two() || (ratio - step as f64).abs() > 1e-9 * ratio
            || (offset - offset.round()).abs() > 1e-9 * offset.max(1.0) || n % 4 != 0
        {
            return Err(Error::InvalidConfig(format!("cannot regrid L={} n={} onto L={l} n={n}", self.l, self.n)));
        }
        if step > 1 && self.spectral_tail(self.n / (2 * step)) > EXPAND_SMOOTHNESS {
            return Err(Error::BoxTooSmall { boundary_mass: self.boundary_fraction() });
        }
        let offset = offset.round() as i64;
        let old = self.n as i64;
        let mut values = vec![0.0; n.pow(self.d as u32)];
        for (idx, out) in values.iter_mut().enumerate() {
            let mut r = idx;
            let mut src = 0usize;
            let mut place = 1usize;
            let mut inside = true;
            for _ in 0..self.d {
                let j = (r % n) as i64 * step as i64 - offset;
                r /= n;
                if j < 0 || j >= old {
                    inside = false;
                    break;
                }
                src += j as usize * place;
                place *= self.n;
            }
            if inside {
                *out = self.values[src];
            }
        }
        Ok(Self { d: self.d, l, n, values })
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n && self.l == other.l
    }
}

/// e^{−tΔ} as the Fourier multiplier e^{−t|ξ|²}, ξ = πk/L. Round-off negatives are clamped.
pub fn heat_apply_classical(field: &GridField, t: f64) -> Result<GridField> {
    let out = heat_unchecked(field, t)?;
    let frac = out.boundary_fraction();
    if frac > BOX_TOL {
        return Err(Error::BoxTooSmall { boundary_mass: frac });
    }
    Ok(out)
}

fn heat_unchecked(field: &GridField, t: f64) -> Result<GridField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("heat time {t}")));
    }
    if t == 0.0 {
        return Ok(field.clone());
    }
    let (n, d) = (field.n, field.d);
    let (fwd, inv) = plans(n);
    let mut data: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_axes(&mut data, d, n, &fwd);
    let factor: Vec<f64> = (0..n)
        .map(|k| {
            let xi = PI * wavenumber(k, n) as f64 / field.l;
            (-t * xi * xi).exp()
        })
        .collect();
    let norm = 1.0 / data.len() as f64;
    for (idx, c) in data.iter_mut().enumerate() {
        let mut r = idx;
        let mut m = norm;
        for _ in 0..d {
            m *= factor[r % n];
            r /= n;
        }
        *c *= m;
    }
    fft_axes(&mut data, d, n, &inv);
    let top = data.iter().fold(0.0_f64, |m, c| m.max(c.re.abs()));
    let values = data
        .iter()
        .map(|c| if c.re < 0.0 && c.re >= -1e-14 * top { 0.0 } else { c.re })
        .collect();
    Ok(GridField { d, l: field.l, n, values })
}

/// Heat flow that doubles the box whenever the spreading field would reach its boundary.
pub fn heat_expanding(field: &GridField, t: f64) -> Result<GridField> {
    let mut cur = field.clone();
    let mut left = t;
    let mut expansions = 0;
    while left > 0.0 {
        if cur.boundary_fraction() > EXPAND_AT {
            cur = cur.expand()?;
            expansions += 1;
        } else {
            let mut s = left;
            loop {
                let out = heat_unchecked(&cur, s)?;
                if out.boundary_fraction() <= BOX_TOL {
                    cur = out;
                    left = if s == left { 0.0 } else { left - s };
                    break;
                }
                s *= 0.5;
                if s < 1e-12 * t {
                    cur = cur.expand()?;
                    expansions += 1;
                    break;
                }
            }
        }
        if expansions > MAX_EXPANSIONS {
            return Err(Error::BoxTooSmall { boundary_mass: cur.boundary_fraction() });
        }
    }
    Ok(cur)
}

/// θ = 0 model with pointwise nonlinearity. The necessary blow-up bound holds for every p > 1 here.
#[derive(Clone, Copy, Debug)]
pub struct ClassicalModel {
    pub d: usize,
}

impl ClassicalModel {
    pub fn new(d: usize) -> Self {
        Self { d }
    }

    /// Brings x and y onto the larger of their two boxes.
    fn align(&self, x: &GridField, y: &GridField) -> Result<(GridField, GridField)> {
        if x.d != y.d {
            return Err(Error::DimensionMismatch(x.d, y.d));
        }
        let l = x.l.max(y.l);
        let dx = x.dx().max(y.dx());
        let n = (2.0 * l / dx).round() as usize;
        let fit = |f: &GridField| if f.l == l && f.n == n { Ok(f.clone()) } else { f.regrid(l, n) };
        Ok((fit(x)?, fit(y)?))
    }
}

impl EvolutionModel for ClassicalModel {
    type State = GridField;

    fn dimension(&self) -> f64 {
        self.d as f64
    }

    fn heat(&self, t: f64, u: &GridField) -> Result<GridField> {
        heat_expanding(u, t)
    }

    fn power(&self, u: &GridField, p: f64) -> Result<GridField> {
        let top = u.sup();
        if let Some(&bad) = u.values.iter().find(|&&x| x < -1e-8 * top) {
            return Err(Error::NotPositive { min_eig: bad, norm: top });
        }
        let values = u.values.iter().map(|&x| if x > 0.0 { x.powf(p) } else { 0.0 }).collect();
        Ok(GridField { values, ..u.clone() })
    }

    fn combine(&self, a: f64, x: &GridField, b: f64, y: &GridField) -> Result<GridField> {
        let aligned;
        let (x, y) = if x.same_grid(y) {
            (x, y)
        } else {
            aligned = self.align(x, y)?;
            (&aligned.0, &aligned.1)
        };
        let values = x.values.iter().zip(&y.values).map(|(u, v)| a * u + b * v).collect();
        Ok(GridField { d: x.d, l: x.l, n: x.n, values })
    }

    fn sup_norm(&self, u: &GridField) -> f64 {
        u.sup()
    }

    fn lq_norm(&self, u: &GridField, q: f64) -> Result<f64> {
        u.lq_norm(q)
    }

    fn mass(&self, u: &GridField) -> f64 {
        u.mass()
    }

    fn min_value(&self, u: &GridField) -> f64 {
        u.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn certificate_valid(&self, p: f64) -> bool {
        p > 1.0
    }

    fn prepare(&self, mut u: GridField, _dt: f64) -> Result<GridField> {
        let mut k = 0;
        while u.boundary_fraction() > EXPAND_AT {
            u = u.expand()?;
            k += 1;
            if k > MAX_EXPANSIONS {
                return Err(Error::BoxTooSmall { boundary_mass: u.boundary_fraction() });
            }
        }
        Ok(u)
    }

    fn grid_info(&self, u: &GridField) -> Option<GridInfo> {
        Some(u.info())
    }
}

/// Runs and classifies one classical trajectory.
pub fn evolve_classical(field: &GridField, params: &ClassifyParams, cell_seed: u64) -> CellResult {
    classify_cell(&ClassicalModel::new(field.d), field, params, cell_seed)
}

pub fn lemma61_certificate_classical(field: &GridField, p: f64, t_grid: &[f64]) -> Result<Certificate> {
    lemma61_certificate(&ClassicalModel::new(field.d), field, p, t_grid)
}

/// Smallest amplitude A in [lo, hi] at which A·shape has a positive certificate margin,
/// located by bisection to relative width `rel_tol`.
pub fn critical_amplitude(shape: &GridField, p: f64, t_grid: &[f64], lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let margin = |a: f64| -> Result<f64> {
        let f = GridField { values: shape.values.iter().map(|v| a * v).collect(), ..shape.clone() };
        Ok(lemma61_certificate_classical(&f, p, t_grid)?.margin)
    };
    if !(0.0 < lo && lo < hi) {
        return Err(Error::InvalidConfig(format!("amplitude bracket [{lo}, {hi}]")));
    }
    if margin(lo)? > 0.0 || margin(hi)? <= 0.0 {
        return Err(Error::NotConverged(format!("[{lo}, {hi}] does not bracket the critical amplitude")));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > rel_tol * b {
        let mid = (a * b).sqrt();
        if margin(mid)? > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

/// sup_t (4πt)^{d/2}‖G_t ∗ u‖_∞ over an ascending grid.
pub fn tauberian_classical(field: &GridField, t_grid: &[f64]) -> Result<TauberianReport> {
    let mut cur = field.clone();
    let mut t_prev = 0.0;
    tauberian_from(field.d as f64, t_grid, |t| {
        if t < t_prev {
            return Err(Error::InvalidConfig("Tauberian grid must ascend".into()));
        }
        cur = heat_expanding(&cur, t - t_prev)?;
        t_prev = t;
        Ok(cur.sup())
    })
}
