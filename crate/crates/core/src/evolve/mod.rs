//! Mild solutions of ∂_t u + Δu = u^p: exponential Duhamel steppers, Picard windows,
//! necessary-condition certificates, Fujita parameters and the sweep classifier.

mod fujita;
mod models;
mod sweep;

pub use fujita::{fujita_params, FujitaParams};
pub use models::{MatrixModel, RadialModel, DEFAULT_RADIAL_DIM};
pub use sweep::{
    boundary_bracket, classify_cell, fujita_sweep, read_records_csv, write_records_csv, CellResult, ClassifyParams,
    GridInfo, Outcome, SweepOutput, SweepRecord,
};

use serde::{Deserialize, Serialize};

use crate::doi::estimate_cp;
use crate::doi::CpGrid;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// A model of the heat flow plus power nonlinearity on some state space.
pub trait EvolutionModel: Sync {
    type State: Clone + Send + Sync;

    /// Effective dimension d entering p_F = 1 + 2/d and the smoothing rates.
    fn dimension(&self) -> f64;
    fn heat(&self, t: f64, u: &Self::State) -> Result<Self::State>;
    /// Positive part raised to the power p.
    fn power(&self, u: &Self::State, p: f64) -> Result<Self::State>;
    /// a·x + b·y.
    fn combine(&self, a: f64, x: &Self::State, b: f64, y: &Self::State) -> Result<Self::State>;
    fn sup_norm(&self, u: &Self::State) -> f64;
    fn lq_norm(&self, u: &Self::State, q: f64) -> Result<f64>;
    /// Trace (integral) of u.
    fn mass(&self, u: &Self::State) -> f64;
    /// Smallest eigenvalue or pointwise value.
    fn min_value(&self, u: &Self::State) -> f64;

    /// Whether the necessary condition t^{1/(p−1)}‖e^{−tΔ}u₀‖_∞ ≤ (p−1)^{−1/(p−1)} is a theorem at this p.
    fn certificate_valid(&self, p: f64) -> bool {
        p > 1.0 && p < 2.0
    }

    /// Called before a step of size dt; may regrid the state.
    fn prepare(&self, u: Self::State, _dt: f64) -> Result<Self::State> {
        Ok(u)
    }

    fn distance(&self, x: &Self::State, y: &Self::State) -> Result<f64> {
        Ok(self.sup_norm(&self.combine(1.0, x, -1.0, y)?))
    }

    /// Grid of a discretised classical field.
    fn grid_info(&self, _u: &Self::State) -> Option<GridInfo> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// u⁺ = H_dt(u + dt·u^p).
    ExponentialEuler,
    /// u⁺ = H_dt u + dt·H_{dt/2}(m^p), m = H_{dt/2}u + (dt/2)(H_{dt/2}u)^p.
    Midpoint,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::ExponentialEuler => 1,
            Scheme::Midpoint => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub p: f64,
    /// Coefficient of u^p; 0 gives the linear heat flow.
    pub coeff: f64,
    /// Sup-norm level treated as blow-up.
    pub ceiling: f64,
    /// Exponent for the stored ‖u‖_q, if any.
    pub q: Option<f64>,
}

impl StepParams {
    pub fn new(p: f64) -> Self {
        Self { p, coeff: 1.0, ceiling: f64::INFINITY, q: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: f64,
    pub norm_q: Option<f64>,
    pub norm_inf: f64,
    pub monitor: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EvolutionState<S> {
    pub t: f64,
    pub u: S,
    pub history: Vec<HistoryEntry>,
    pub dt: f64,
    pub scheme: Scheme,
}

impl<S> EvolutionState<S> {
    pub fn new(u: S, scheme: Scheme) -> Self {
        Self { t: 0.0, u, history: Vec::new(), dt: 0.0, scheme }
    }
}

/// One exponential Duhamel step; Overflow once ‖u⁺‖_∞ reaches the ceiling.
pub fn duhamel_step<M: EvolutionModel>(
    model: &M,
    state: &EvolutionState<M::State>,
    dt: f64,
    params: &StepParams,
) -> Result<EvolutionState<M::State>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("step size {dt}")));
    }
    let (p, c) = (params.p, params.coeff);
    let u = model.prepare(state.u.clone(), dt)?;
    let next = match state.scheme {
        Scheme::ExponentialEuler => {
            let src = if c == 0.0 { u.clone() } else { model.combine(1.0, &u, c * dt, &model.power(&u, p)?)? };
            model.heat(dt, &src)?
        }
        Scheme::Midpoint => {
            let full = model.heat(dt, &u)?;
            if c == 0.0 {
                full
            } else {
                let half = model.heat(0.5 * dt, &u)?;
                let mid = model.combine(1.0, &half, 0.5 * c * dt, &model.power(&half, p)?)?;
                let src = model.heat(0.5 * dt, &model.power(&mid, p)?)?;
                model.combine(1.0, &full, c * dt, &src)?
            }
        }
    };
    let t = state.t + dt;
    let norm_inf = model.sup_norm(&next);
    if !(norm_inf < params.ceiling) {
        return Err(Error::Overflow { t, norm: norm_inf, ceiling: params.ceiling });
    }
    let norm_q = match params.q {
        Some(q) => Some(model.lq_norm(&next, q)?),
        None => None,
    };
    let mut history = state.history.clone();
    history.push(HistoryEntry { t, norm_q, norm_inf, monitor: None });
    Ok(EvolutionState { t, u: next, history, dt, scheme: state.scheme })
}

/// Adaptive step rule dt = min(dt_max, cfl/(p‖u‖_∞^{p−1}), max(dt_init, frac·t)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtPolicy {
    pub dt_init: f64,
    pub frac: f64,
    pub cfl: f64,
    pub dt_max: f64,
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self { dt_init: 1e-3, frac: 0.05, cfl: 0.05, dt_max: f64::INFINITY }
    }
}

impl DtPolicy {
    pub fn next(&self, t: f64, sup: f64, params: &StepParams) -> f64 {
        let growth = params.coeff * params.p * sup.powf(params.p - 1.0);
        let reaction = if growth > 0.0 { self.cfl / growth } else { f64::INFINITY };
        self.dt_max.min(reaction).min(self.dt_init.max(self.frac * t))
    }

    pub fn halved(&self) -> Self {
        Self { dt_init: 0.5 * self.dt_init, frac: 0.5 * self.frac, cfl: 0.5 * self.cfl, dt_max: 0.5 * self.dt_max }
    }
}

/// Steps from the state to each target time in turn (targets ascending), landing on them exactly.
pub fn evolve_to<M: EvolutionModel>(
    model: &M,
    mut state: EvolutionState<M::State>,
    targets: &[f64],
    policy: &DtPolicy,
    params: &StepParams,
    max_steps: usize,
) -> Result<(EvolutionState<M::State>, Vec<M::State>)> {
    let mut out = Vec::with_capacity(targets.len());
    let mut steps = 0;
    for &target in targets {
        while state.t < target {
            let sup = model.sup_norm(&state.u);
            let mut dt = policy.next(state.t, sup, params);
            // avoid a sliver step just before the target
            if state.t + 1.5 * dt >= target {
                dt = if state.t + dt >= target { target - state.t } else { 0.5 * (target - state.t) };
            }
            state = duhamel_step(model, &state, dt, params)?;
            if (state.t - target).abs() <= 1e-12 * target.max(1.0) {
                state.t = target;
            }
            steps += 1;
            if steps > max_steps {
                return Err(Error::NotConverged(format!("step budget {max_steps} exhausted at t={}", state.t)));
            }
        }
        out.push(state.u.clone());
    }
    Ok((state, out))
}

/// Lagrange basis polynomials through `nodes`, evaluated at x.
fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| (x - xk) / (xj - xk))
                .product()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PicardReport<S> {
    pub window: f64,
    pub delta: f64,
    pub c_p: f64,
    /// 2^p·c_p·δ^{p−1}·T.
    pub contraction_bound: f64,
    /// ‖u^{(k+1)} − u^{(k)}‖/‖u^{(k)} − u^{(k−1)}‖ in sup_t ‖·‖_q.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    /// Final sup_t ‖u^{(k+1)} − u^{(k)}‖_∞.
    pub last_difference: f64,
    pub times: Vec<f64>,
    pub trajectory: Vec<S>,
}

impl<S> PicardReport<S> {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardParams {
    pub p: f64,
    pub q: f64,
    /// Stop once sup_t ‖u^{(k+1)} − u^{(k)}‖_∞ ≤ tol·δ.
    pub tol: f64,
    pub horizon: f64,
    /// Gauss–Legendre collocation times in the window.
    pub nodes: usize,
    /// Quadrature points for each Duhamel integral.
    pub quad_nodes: usize,
    pub max_iter: usize,
}

impl PicardParams {
    pub fn new(p: f64, q: f64, tol: f64) -> Self {
        Self { p, q, tol, horizon: f64::INFINITY, nodes: 20, quad_nodes: 20, max_iter: 100 }
    }
}

/// Picard iteration of 𝒦₁u(t) = H_t u₀ + ∫₀^t H_{t−s}(u(s)^p)ds on the window
/// T = ½·min(2^{−p}δ^{1−p}/c_p, horizon), δ = max(‖u₀‖_q, ‖u₀‖_∞). The iterate is
/// represented at Gauss–Legendre times and interpolated polynomially inside the integrals.
pub fn picard_window<M: EvolutionModel>(model: &M, u0: &M::State, params: &PicardParams) -> Result<PicardReport<M::State>> {
    let (p, q) = (params.p, params.q);
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(q));
    }
    let c_p = estimate_cp(p, CpGrid::default())?;
    let delta = model.lq_norm(u0, q)?.max(model.sup_norm(u0));
    let theory = if delta > 0.0 { 2f64.powf(-p) * delta.powf(1.0 - p) / c_p } else { f64::INFINITY };
    let window = 0.5 * theory.min(params.horizon);
    if !window.is_finite() {
        return Err(Error::InvalidConfig("zero data needs a finite horizon".into()));
    }
    let contraction_bound = 2f64.powf(p) * c_p * delta.powf(p - 1.0) * window;
    let colloc = gauss_legendre(params.nodes, 0.0, window);
    let mut times = colloc.nodes.clone();
    times.push(window);
    let m = params.nodes;

    let linear: Vec<M::State> = times.iter().map(|&t| model.heat(t, u0)).collect::<Result<_>>()?;
    let zero = model.combine(0.0, u0, 0.0, u0)?;
    // quadrature nodes per output time with interpolation weights onto the collocation times
    let plans: Vec<Vec<(f64, f64, Vec<f64>)>> = times
        .iter()
        .map(|&t| {
            let rule = gauss_legendre(params.quad_nodes, 0.0, t);
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&s, &w)| (t - s, w, lagrange_weights(&colloc.nodes, s)))
                .collect()
        })
        .collect();

    let mut current = linear.clone();
    let mut ratios = Vec::new();
    let mut prev_q: Option<f64> = None;
    let mut last_difference = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let sources: Vec<M::State> = current[..m].iter().map(|u| model.power(u, p)).collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(times.len());
        for (i, plan) in plans.iter().enumerate() {
            let mut acc = linear[i].clone();
            for (lag, w, interp) in plan {
                let mut f = zero.clone();
                for (j, &l) in interp.iter().enumerate() {
                    f = model.combine(1.0, &f, l, &sources[j])?;
                }
                acc = model.combine(1.0, &acc, *w, &model.heat(*lag, &f)?)?;
            }
            next.push(acc);
        }
        let mut diff_inf: f64 = 0.0;
        let mut diff_q: f64 = 0.0;
        for (a, b) in next.iter().zip(&current) {
            let d = model.combine(1.0, a, -1.0, b)?;
            diff_inf = diff_inf.max(model.sup_norm(&d));
            diff_q = diff_q.max(model.lq_norm(&d, q)?);
        }
        if let Some(pq) = prev_q {
            if pq > 1e-12 * delta {
                let r = diff_q / pq;
                ratios.push(r);
                if r > 0.95 {
                    return Err(Error::NotContracting { ratio: r });
                }
            }
        }
        prev_q = Some(diff_q);
        current = next;
        last_difference = diff_inf;
        if diff_inf <= params.tol * delta {
            break;
        }
    }
    if last_difference > params.tol * delta {
        return Err(Error::NotConverged(format!(
            "Picard iteration stalled at {last_difference:.3e} after {iterations} sweeps"
        )));
    }
    Ok(PicardReport {
        window,
        delta,
        c_p,
        contraction_bound,
        ratios,
        iterations,
        last_difference,
        times,
        trajectory: current,
    })
}

/// Max sup-norm gap between the Picard trajectory and the midpoint stepper at the same times.
pub fn picard_cross_check<M: EvolutionModel>(
    model: &M,
    u0: &M::State,
    report: &PicardReport<M::State>,
    p: f64,
    steps: usize,
) -> Result<f64> {
    let policy = DtPolicy {
        dt_init: report.window / steps as f64,
        frac: 0.0,
        cfl: f64::INFINITY,
        dt_max: report.window / steps as f64,
    };
    let state = EvolutionState::new(u0.clone(), Scheme::Midpoint);
    let (_, stepped) = evolve_to(model, state, &report.times, &policy, &StepParams::new(p), 100 * steps)?;
    let mut worst: f64 = 0.0;
    for (a, b) in stepped.iter().zip(&report.trajectory) {
        worst = worst.max(model.distance(a, b)?);
    }
    Ok(worst)
}

/// (p−1)^{−1/(p−1)}.
pub fn lemma61_threshold(p: f64) -> f64 {
    (p - 1.0).powf(-1.0 / (p - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub threshold: f64,
    /// max_t t^{1/(p−1)}‖e^{−tΔ}u₀‖_∞ − threshold.
    pub margin: f64,
    /// First grid time with a positive margin.
    pub violated_at: Option<f64>,
    /// The bound is not a theorem at this p for this model.
    pub advisory: bool,
    /// (t, t^{1/(p−1)}‖e^{−tΔ}u₀‖_∞).
    pub samples: Vec<(f64, f64)>,
}

/// Evaluates the necessary bound on an ascending t grid; the heat flow is advanced
/// incrementally through the grid.
pub fn lemma61_certificate<M: EvolutionModel>(model: &M, u0: &M::State, p: f64, t_grid: &[f64]) -> Result<Certificate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    let threshold = lemma61_threshold(p);
    let mut samples = Vec::with_capacity(t_grid.len());
    let mut u = u0.clone();
    let mut t_prev = 0.0;
    let mut violated_at = None;
    let mut best = f64::NEG_INFINITY;
    for &t in t_grid {
        if t < t_prev {
            return Err(Error::InvalidConfig("certificate grid must ascend".into()));
        }
        if t > t_prev {
            u = model.heat(t - t_prev, &u)?;
        }
        t_prev = t;
        let v = t.powf(1.0 / (p - 1.0)) * model.sup_norm(&u);
        samples.push((t, v));
        if v > threshold && violated_at.is_none() {
            violated_at = Some(t);
        }
        best = best.max(v);
    }
    Ok(Certificate {
        threshold,
        margin: best - threshold,
        violated_at,
        advisory: !model.certificate_valid(p),
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorEntry {
    pub s1: f64,
    pub margin: f64,
    pub violated_at: Option<f64>,
}

/// Default number of log-spaced heat times per monitor evaluation.
pub const MONITOR_POINTS: usize = 24;

/// The certificate restarted from u(s₁), with t ranging over (0, horizon − s₁].
pub fn monitor_at<M: EvolutionModel>(model: &M, u: &M::State, s1: f64, p: f64, horizon: f64, points: usize) -> Result<MonitorEntry> {
    let span = horizon - s1;
    if span <= 0.0 {
        return Ok(MonitorEntry { s1, margin: f64::NEG_INFINITY, violated_at: None });
    }
    let grid = crate::heat::log_grid(span * 1e-4, span, points);
    let c = lemma61_certificate(model, u, p, &grid)?;
    Ok(MonitorEntry { s1, margin: c.margin, violated_at: c.violated_at })
}

/// Margins along a trajectory of (s₁, u(s₁)) pairs.
pub fn corollary62_monitor<M: EvolutionModel>(
    model: &M,
    trajectory: &[(f64, M::State)],
    p: f64,
    horizon: f64,
) -> Result<Vec<MonitorEntry>> {
    trajectory
        .iter()
        .map(|(s1, u)| monitor_at(model, u, *s1, p, horizon, MONITOR_POINTS))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{HeatRoute, ModelConfig};
    use crate::heat::{gaussian_diagonal, log_grid};
    use crate::linalg::Operator;

    fn cfg(n: usize) -> ModelConfig {
        ModelConfig { c_tau: 2.0 * std::f64::consts::PI, ..ModelConfig::new(n, 1.0).with_route(HeatRoute::Generator) }
    }

    fn radial(dim: usize) -> RadialModel {
        RadialModel::new(&cfg(48), dim).unwrap()
    }

    fn run_fixed(model: &RadialModel, u0: &[f64], scheme: Scheme, p: f64, t: f64, steps: usize) -> Vec<f64> {
        let dt = t / steps as f64;
        let policy = DtPolicy { dt_init: dt, frac: 0.0, cfl: f64::INFINITY, dt_max: dt };
        let state = EvolutionState::new(u0.to_vec(), scheme);
        evolve_to(model, state, &[t], &policy, &StepParams::new(p), 10 * steps).unwrap().0.u
    }

    #[test]
    fn linear_mode_reproduces_heat() {
        let m = radial(256);
        let u0 = m.gaussian(1.0, 1.0);
        let params = StepParams { coeff: 0.0, ..StepParams::new(2.0) };
        let want = m.heat(0.3, &u0).unwrap();
        for scheme in [Scheme::ExponentialEuler, Scheme::Midpoint] {
            let s = duhamel_step(&m, &EvolutionState::new(u0.clone(), scheme), 0.3, &params).unwrap();
            assert_eq!(s.u, want);
            assert_eq!(s.history.len(), 1);
        }
    }

    #[test]
    fn step_halving_orders() {
        let m = radial(256);
        let u0 = m.gaussian(5.0, 0.5);
        for (scheme, want) in [(Scheme::ExponentialEuler, 2.0), (Scheme::Midpoint, 4.0)] {
            let runs: Vec<Vec<f64>> = [32, 64, 128].iter().map(|&k| run_fixed(&m, &u0, scheme, 2.0, 0.4, k)).collect();
            let e1 = m.distance(&runs[0], &runs[1]).unwrap();
            let e2 = m.distance(&runs[1], &runs[2]).unwrap();
            let ratio = e1 / e2;
            assert!((ratio / want - 1.0).abs() < 0.2, "{scheme:?}: ratio {ratio}");
        }
    }

    #[test]
    fn positivity_and_trace_growth() {
        let m = radial(256);
        let u0 = m.gaussian(5.0, 0.5);
        let mut s = EvolutionState::new(u0.clone(), Scheme::Midpoint);
        let params = StepParams::new(1.5);
        for _ in 0..100 {
            s = duhamel_step(&m, &s, 0.01, &params).unwrap();
            assert!(m.min_value(&s.u) >= -1e-9 * m.sup_norm(&s.u));
        }
        assert!(m.mass(&s.u) >= m.mass(&u0));
        assert!(s.history.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn overflow_signals_blow_up() {
        let m = radial(256);
        let u0 = m.gaussian(50.0, 0.5);
        let params = StepParams { ceiling: 2.0 * m.sup_norm(&u0), ..StepParams::new(3.0) };
        let state = EvolutionState::new(u0, Scheme::Midpoint);
        let err = evolve_to(&m, state, &[100.0], &DtPolicy::default(), &params, 100_000).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }

    #[test]
    fn picard_zero_data() {
        let m = radial(64);
        let zero = vec![0.0; 64];
        let params = PicardParams::new(2.0, 2.0, 1e-10);
        assert!(picard_window(&m, &zero, &params).is_err());
        let r = picard_window(&m, &zero, &PicardParams { horizon: 1.0, ..params }).unwrap();
        assert_eq!(r.window, 0.5);
        assert!(r.trajectory.iter().all(|u| u.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn thresholds_and_linearity() {
        assert_eq!(lemma61_threshold(2.0), 1.0);
        assert_eq!(lemma61_threshold(1.5), 4.0);
        let m = radial(256);
        let u0 = m.gaussian(1.0, 0.5);
        let grid = log_grid(0.01, 4.0, 12);
        let a = lemma61_certificate(&m, &u0, 1.5, &grid).unwrap();
        let b = lemma61_certificate(&m, &m.combine(2.0, &u0, 0.0, &u0).unwrap(), 1.5, &grid).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((y.1 - 2.0 * x.1).abs() < 1e-12 * y.1);
        }
        assert!(!a.advisory);
        assert!(lemma61_certificate(&m, &u0, 3.0, &grid).unwrap().advisory);
        let mon = monitor_at(&m, &u0, 0.0, 1.5, 4.0, 12).unwrap();
        let direct = lemma61_certificate(&m, &u0, 1.5, &log_grid(4e-4, 4.0, 12)).unwrap();
        assert_eq!(mon.margin, direct.margin);
    }

    #[test]
    fn radial_matches_matrix_model() {
        let c = cfg(24);
        let mm = MatrixModel::new(&c).unwrap();
        let rm = RadialModel::new(&c, 24).unwrap();
        let d = gaussian_diagonal(1.0, 0.5, 24);
        let s = StepParams::new(1.7);
        let a = duhamel_step(&rm, &EvolutionState::new(d.clone(), Scheme::Midpoint), 0.05, &s).unwrap();
        let b = duhamel_step(&mm, &EvolutionState::new(Operator::from_diagonal(&d), Scheme::Midpoint), 0.05, &s).unwrap();
        let diff = (&b.u - &RadialModel::to_operator(&a.u)).max_abs();
        assert!(diff < 1e-12, "{diff}");
        assert!((rm.lq_norm(&a.u, 3.0).unwrap() - mm.lq_norm(&b.u, 3.0).unwrap()).abs() < 1e-10);
    }
}
