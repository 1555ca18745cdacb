use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::Context;
use moyal_heat::algebra::{trace_theta, translate};
use moyal_heat::classical::{ClassicalModel, GridField};
use moyal_heat::convexity::{find_jensen_counterexample, jensen_gap_value, random_unital_cp, HeatMap, JensenRecord};
use moyal_heat::doi::{CpGrid, NonlinearityParams, NonlinearityReport, PhiKernel};
use moyal_heat::evolve::{
    boundary_bracket, fujita_sweep, lemma61_certificate, monitor_at, write_records_csv, Certificate, EvolutionModel,
    EvolutionState, MonitorEntry, Outcome, RadialModel, StepParams, SweepRecord,
};
use moyal_heat::heat::{
    gaussian_operator, heat_semigroup, kernel_form_residual, laplacian_apply, log_grid, sigma_t, tauberian_from,
    HeatSemigroup,
};
use moyal_heat::lp::lp_norm;
use moyal_heat::random::{complex_gaussian, derive_seed, random_positive, rng};
use moyal_heat::{Error, HeatRoute, ModelConfig, Operator, C64};
use serde::{Deserialize, Serialize};

use crate::config::{Config, SweepModel};
use crate::manifest::RunManifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// At least one invariant failed.
    Violation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Violation => 2,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

fn finish(manifest: RunManifest, out: &Path, summary: Vec<String>) -> anyhow::Result<RunOutcome> {
    let status = if manifest.failures() == 0 { Status::Success } else { Status::Violation };
    let (manifest, manifest_path) = manifest.finish(out)?;
    Ok(RunOutcome { status, manifest, manifest_path, summary })
}

fn to_json<T: Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// JSON has no infinities; q = ∞ is written as a string.
fn fmt_exp(q: f64) -> String {
    if q.is_infinite() { "inf".into() } else { format!("{q}") }
}

// ---------------------------------------------------------------- verify-doi

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoiEntry {
    pub p: f64,
    pub q: String,
    pub c_p: f64,
    pub trials: usize,
    pub max_theorem_ratio: f64,
    pub max_cor42_ratio: f64,
    pub max_cor44_ratio: Option<f64>,
    pub max_identity_residual: f64,
    pub identity_ok: bool,
    pub bound_ok: bool,
    pub counterexample: Option<String>,
}

impl DoiEntry {
    fn from_report(r: &NonlinearityReport, identity_tol: f64) -> Self {
        Self {
            p: r.p,
            q: fmt_exp(r.q),
            c_p: r.c_p,
            trials: r.trials,
            max_theorem_ratio: r.max_theorem_ratio,
            max_cor42_ratio: r.max_cor42_ratio,
            max_cor44_ratio: r.max_cor44_ratio,
            max_identity_residual: r.max_identity_residual,
            identity_ok: r.max_identity_residual <= identity_tol,
            bound_ok: true,
            counterexample: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoiReport {
    pub entries: Vec<DoiEntry>,
}

pub fn verify_doi(cfg: &Config, out: &Path) -> anyhow::Result<RunOutcome> {
    let mut manifest = RunManifest::new("verify-doi", cfg);
    let mut entries = Vec::new();
    let mut summary = Vec::new();
    if cfg.doi_trials > 0 {
        let grid = CpGrid { extent: cfg.cp_extent, points: cfg.cp_points };
        for (i, &p) in cfg.doi_p.iter().enumerate() {
            for (j, &q) in cfg.doi_q.iter().enumerate() {
                let params = NonlinearityParams {
                    p,
                    q,
                    trials: cfg.doi_trials,
                    dim: cfg.doi_dim,
                    seed: derive_seed(cfg.seed, (i * cfg.doi_q.len() + j) as u64),
                    grid,
                };
                let kernel = PhiKernel { p, grid_diagonal: cfg.corrupt_phi.then_some(10.0 * p) };
                let entry = match moyal_heat::doi::verify_nonlinearity_with(&params, &kernel) {
                    Ok(r) => DoiEntry::from_report(&r, cfg.doi_identity_tol),
                    Err(Error::BoundViolated { ratio, c_p, record }) => {
                        let name = format!("doi_counterexample_p{p}_q{}.json", fmt_exp(q));
                        let path = manifest.emit(out, &name, format!("{record}\n").as_bytes())?;
                        summary.push(format!("bound violated at p={p}, q={}: ratio {ratio:.6} > c_p {c_p:.6}", fmt_exp(q)));
                        summary.push(format!("counterexample: {}", path.display()));
                        DoiEntry {
                            p,
                            q: fmt_exp(q),
                            c_p,
                            trials: cfg.doi_trials,
                            max_theorem_ratio: ratio,
                            max_cor42_ratio: f64::NAN,
                            max_cor44_ratio: None,
                            max_identity_residual: f64::NAN,
                            identity_ok: false,
                            bound_ok: false,
                            counterexample: Some(path.display().to_string()),
                        }
                    }
                    Err(e) => return Err(e).with_context(|| format!("verify-doi at p={p}, q={q}")),
                };
                manifest.count("identity", entry.identity_ok);
                manifest.count("bound", entry.bound_ok);
                summary.push(format!(
                    "p={:<4} q={:<4} c_p={:.6} max ratio {:.6} identity residual {:.2e}",
                    entry.p,
                    entry.q,
                    entry.c_p,
                    entry.max_theorem_ratio.max(entry.max_cor42_ratio),
                    entry.max_identity_residual
                ));
                entries.push(entry);
            }
        }
    }
    manifest.emit(out, "verify_doi.json", &to_json(&DoiReport { entries })?)?;
    finish(manifest, out, summary)
}

// ---------------------------------------------------------------- heat-check

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

struct Checks {
    list: Vec<Check>,
}

impl Checks {
    /// `f` returns (measured, passed, detail); errors count as failures.
    fn run(&mut self, name: impl Into<String>, tolerance: f64, f: impl FnOnce() -> moyal_heat::Result<(f64, bool, String)>) {
        let name = name.into();
        let (measured, passed, detail) = match f() {
            Ok(v) => v,
            Err(e) => (f64::NAN, false, e.to_string()),
        };
        self.list.push(Check { name, measured, tolerance, passed, detail });
    }

    fn below(&mut self, name: impl Into<String>, tolerance: f64, f: impl FnOnce() -> moyal_heat::Result<f64>) {
        self.run(name, tolerance, || f().map(|m| (m, m <= tolerance, String::new())));
    }
}

fn rel_diff(a: &Operator, b: &Operator) -> f64 {
    (a - b).frobenius() / b.frobenius().max(f64::MIN_POSITIVE)
}

/// Random positive operator supported on the first `k` levels of an n-level block.
fn localized_positive(k: usize, n: usize, seed: u64) -> Operator {
    let u = random_positive(k.min(n), &mut rng(seed));
    u.scale(1.0 / u.spectral_norm()).embed(n).with_positive()
}

fn positive_times(ts: &[f64]) -> Vec<f64> {
    ts.iter().copied().filter(|&t| t > 0.0).collect()
}

pub fn heat_check(cfg: &Config, out: &Path) -> anyhow::Result<RunOutcome> {
    let mut manifest = RunManifest::new("heat-check", cfg);
    let mut c = Checks { list: Vec::new() };
    let base = cfg.model_config();
    let mut cal: Option<ModelConfig> = None;
    c.run("calibration", 0.0, || {
        let m = base.calibrated()?;
        let v = m.c_tau;
        cal = Some(m);
        Ok((v, true, format!("c_tau = {v:.12}")))
    });
    let heat: Option<Box<dyn HeatSemigroup>> = match &cal {
        Some(m) => heat_semigroup(m).ok(),
        None => None,
    };
    let uncal = || Error::InvalidConfig("calibration failed".into());
    let model = || cal.as_ref().zip(heat.as_deref()).ok_or_else(uncal);

    for t in positive_times(&cfg.heat_trace_t) {
        c.below(format!("trace[t={t}]"), cfg.trace_tol, || {
            let (m, _) = model()?;
            Ok((trace_theta(m, &gaussian_operator(m, t)?)?.re - 1.0).abs())
        });
    }
    let gauss_t = positive_times(&cfg.gaussian_t);
    for &t in &gauss_t {
        c.run(format!("positivity[t={t}]"), cfg.positivity_tol, || {
            let (m, _) = model()?;
            let g = gaussian_operator(m, t)?;
            let v = g.symmetrized().min_eig() / g.spectral_norm();
            Ok((v, v >= -cfg.positivity_tol, "min eig / norm".into()))
        });
        c.run(format!("det_sigma[t={t}]"), 1e-14, || {
            let s = sigma_t(t);
            let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
            Ok((det, (det - 0.25).abs() <= 1e-14, "det Σ_t".into()))
        });
        if cfg.h == 1.0 {
            c.below(format!("kernel[t={t}]"), cfg.kernel_tol, || {
                let (m, _) = model()?;
                let mut r = rng(derive_seed(cfg.seed, 100));
                let coeffs: Vec<C64> = complex_gaussian(cfg.local_dim.min(m.n), 1, &mut r).iter().copied().collect();
                kernel_form_residual(m, t, &coeffs, cfg.kernel_nodes)
            });
        }
    }
    for (s, t) in [(0.25, 0.25), (0.5, 0.5), (0.25, 0.75)] {
        c.below(format!("gaussian_semigroup[s={s},t={t}]"), cfg.semigroup_tol, || {
            let (m, h) = model()?;
            Ok(rel_diff(&h.apply(t, &gaussian_operator(m, s)?)?, &gaussian_operator(m, s + t)?))
        });
    }
    c.below("routes_agree[t=0.5]", cfg.semigroup_tol, || {
        let (m, _) = model()?;
        let g = gaussian_operator(m, 0.5)?;
        let quad = heat_semigroup(&ModelConfig { heat_route: HeatRoute::Quadrature, ..m.clone() })?;
        let gen = heat_semigroup(&ModelConfig { heat_route: HeatRoute::Generator, ..m.clone() })?;
        Ok(rel_diff(&quad.apply(0.5, &g)?, &gen.apply(0.5, &g)?))
    });
    let n = cfg.n;
    let u = localized_positive(cfg.local_dim, n, derive_seed(cfg.seed, 200));
    c.below("composition[s=0.3,t=0.7]", cfg.semigroup_tol, || {
        let (_, h) = model()?;
        Ok(rel_diff(&h.apply(0.7, &h.apply(0.3, &u)?)?, &h.apply(1.0, &u)?))
    });
    c.below("translation_commutes[t=0.5]", cfg.semigroup_tol, || {
        let (m, h) = model()?;
        let s = [0.3, -0.2];
        Ok(rel_diff(&h.apply(0.5, &translate(m, s, &u)?)?, &translate(m, s, &h.apply(0.5, &u)?)?))
    });
    c.run("generator_limit", 0.0, || {
        let (m, h) = model()?;
        let lap = laplacian_apply(m, &u);
        let err = |d: f64| -> moyal_heat::Result<f64> {
            let diff = (&u - &h.apply(d, &u)?).scale(1.0 / d);
            Ok(rel_diff(&diff, &lap))
        };
        let (e1, e2) = (err(2e-3)?, err(1e-3)?);
        let order = (e1 / e2).log2();
        Ok((order, order >= 0.8, format!("errors {e1:.3e}, {e2:.3e}")))
    });
    for t in positive_times(&cfg.flow_t) {
        c.below(format!("trace_preserved[t={t}]"), cfg.tol_leak, || {
            let (m, h) = model()?;
            let before = trace_theta(m, &u)?.re;
            Ok((trace_theta(m, &h.apply(t, &u)?)?.re - before).abs() / before)
        });
        c.run(format!("positivity_preserved[t={t}]"), cfg.positivity_tol, || {
            let (_, h) = model()?;
            let v = h.apply(t, &u)?.symmetrized().min_eig();
            Ok((v, v >= -cfg.positivity_tol, "min eig, ‖u‖ = 1".into()))
        });
        c.below(format!("unital_block[t={t}]"), cfg.semigroup_tol, || {
            let (_, h) = model()?;
            let id = Operator::identity(n);
            let (y, _) = h.apply_with_leakage(t, &id)?;
            let k = n / 8;
            Ok(rel_diff(&y.block(k), &id.block(k)))
        });
        for p in [1.0, 2.0, f64::INFINITY] {
            c.run(format!("contraction[p={},t={t}]", fmt_exp(p)), cfg.norm_slack, || {
                let (m, h) = model()?;
                let lhs = lp_norm(m, &h.apply(t, &u)?, p)?;
                let rhs = lp_norm(m, &u, p)?;
                let excess = lhs / rhs - 1.0;
                Ok((excess, excess <= cfg.norm_slack, format!("{lhs:.6e} <= {rhs:.6e}")))
            });
        }
        for (p, q) in [(1.0, 2.0), (1.0, f64::INFINITY), (2.0, f64::INFINITY)] {
            c.run(format!("smoothing[p={p},q={},t={t}]", fmt_exp(q)), cfg.norm_slack, || {
                let (m, h) = model()?;
                let lhs = lp_norm(m, &h.apply(t, &u)?, q)?;
                let rhs = (4.0 * PI * t).powf(-(1.0 / p - 1.0 / q)) * lp_norm(m, &u, p)?;
                let excess = lhs / rhs - 1.0;
                Ok((excess, excess <= cfg.norm_slack, format!("{lhs:.6e} <= {rhs:.6e}")))
            });
        }
    }
    c.run("tauberian", cfg.tauberian_tol, || {
        let (m, _) = model()?;
        let radial = RadialModel::new(m, cfg.radial_dim)?;
        let g = radial.gaussian(1.0, 1.0);
        let mass = radial.mass(&g);
        let grid = log_grid(cfg.tauberian_t_min, cfg.tauberian_t_max, cfg.tauberian_points);
        let rep = tauberian_from(2.0, &grid, |t| Ok(radial.sup_norm(&radial.heat(t, &g)?)))?;
        let dev = (rep.value - mass).abs() / mass;
        Ok((rep.value, dev <= cfg.tauberian_tol, format!("trace {mass:.6}, relative gap {dev:.3e}")))
    });
    c.run("jensen_heat[p=1.5,t=0.5]", cfg.jensen_tol, || {
        let (_, h) = model()?;
        let gap = jensen_gap_value(&HeatMap { heat: h, t: 0.5 }, &u, 1.5)?;
        Ok((gap, gap >= -cfg.jensen_tol, "min eig of Φ(u^p) − Φ(u)^p, ‖u‖ = 1".into()))
    });

    let mut summary = Vec::new();
    for k in &c.list {
        manifest.count("heat", k.passed);
        summary.push(format!(
            "{} {:<36} measured {:.3e} (tol {:.1e}) {}",
            if k.passed { "PASS" } else { "FAIL" },
            k.name,
            k.measured,
            k.tolerance,
            k.detail
        ));
    }
    manifest.emit(out, "heat_check.json", &to_json(&CheckReport { checks: c.list })?)?;
    finish(manifest, out, summary)
}

// ---------------------------------------------------------------- jensen-check

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JensenReport {
    pub cp_trials: usize,
    /// min over trials of gap/‖u‖^p.
    pub cp_min_scaled_gap: f64,
    pub cp_failures: usize,
    pub heat: Vec<Check>,
    pub counterexample_gap: Option<f64>,
    pub counterexample_path: Option<String>,
}

pub fn jensen_check(cfg: &Config, out: &Path) -> anyhow::Result<RunOutcome> {
    use rayon::prelude::*;
    let mut manifest = RunManifest::new("jensen-check", cfg);
    let mut summary = Vec::new();
    let span = cfg.jensen_p_max - cfg.jensen_p_min;
    let scaled: Vec<f64> = (0..cfg.jensen_trials)
        .into_par_iter()
        .map(|i| -> anyhow::Result<f64> {
            let seed = derive_seed(cfg.seed, i as u64);
            let p = cfg.jensen_p_min + span * i as f64 / (cfg.jensen_trials.max(2) - 1) as f64;
            let phi = random_unital_cp(cfg.jensen_dim, cfg.jensen_kraus, seed)?;
            let u = random_positive(cfg.jensen_dim, &mut rng(seed ^ 0xC0FFEE));
            Ok(jensen_gap_value(&phi, &u, p)? / u.spectral_norm().powf(p))
        })
        .collect::<anyhow::Result<_>>()?;
    let cp_failures = scaled.iter().filter(|&&g| g < -cfg.jensen_tol).count();
    for &g in &scaled {
        manifest.count("cp", g >= -cfg.jensen_tol);
    }
    let cp_min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    summary.push(format!("{} random unital CP trials: min scaled gap {cp_min:.3e}, {cp_failures} below tolerance", scaled.len()));

    let mut c = Checks { list: Vec::new() };
    let heat_cfg = cfg.model_config().calibrated();
    let heat = heat_cfg.as_ref().ok().and_then(|m| heat_semigroup(m).ok());
    for (i, t) in positive_times(&cfg.jensen_heat_t).into_iter().enumerate() {
        for &p in &cfg.jensen_heat_p {
            c.run(format!("heat_channel[t={t},p={p}]"), cfg.jensen_tol, || {
                let h = heat.as_deref().ok_or_else(|| Error::InvalidConfig("calibration failed".into()))?;
                let u = localized_positive(cfg.local_dim, cfg.n, derive_seed(cfg.seed ^ 0x4EA7, i as u64));
                let gap = jensen_gap_value(&HeatMap { heat: h, t }, &u, p)?;
                Ok((gap, gap >= -cfg.jensen_tol, String::new()))
            });
        }
    }
    for k in &c.list {
        manifest.count("heat", k.passed);
        summary.push(format!("{} {} gap {:.3e}", if k.passed { "PASS" } else { "FAIL" }, k.name, k.measured));
    }

    let found: Option<JensenRecord> = find_jensen_counterexample(
        cfg.counterexample_p,
        cfg.counterexample_dim,
        cfg.counterexample_kraus,
        cfg.seed,
        cfg.counterexample_trials,
        cfg.counterexample_threshold,
    )?;
    manifest.count("counterexample", found.is_some());
    let mut path = None;
    if let Some(rec) = &found {
        let name = format!("jensen_counterexample_p{}.json", cfg.counterexample_p);
        let written = manifest.emit(out, &name, &to_json(rec)?)?;
        summary.push(format!("p={} counterexample with gap {:.3e}: {}", rec.p, rec.gap, written.display()));
        path = Some(written.display().to_string());
    } else {
        summary.push(format!("no counterexample at p={} in {} trials", cfg.counterexample_p, cfg.counterexample_trials));
    }
    let report = JensenReport {
        cp_trials: scaled.len(),
        cp_min_scaled_gap: cp_min,
        cp_failures,
        heat: c.list,
        counterexample_gap: found.map(|r| r.gap),
        counterexample_path: path,
    };
    manifest.emit(out, "jensen_check.json", &to_json(&report)?)?;
    finish(manifest, out, summary)
}

// ---------------------------------------------------------------- fujita-sweep

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub model: String,
    pub p_f: f64,
    pub smallest_amplitude: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub bracket_contains_p_f: Option<bool>,
    pub blow_up: usize,
    pub global_candidate: usize,
    pub undecided: usize,
    /// Cells that failed to run, with the reason.
    pub notes: Vec<(f64, f64, String)>,
}

pub fn fujita_sweep_cmd(cfg: &Config, out: &Path) -> anyhow::Result<RunOutcome> {
    let mut manifest = RunManifest::new("fujita-sweep", cfg);
    let p_grid = cfg.p_grid();
    let amps = cfg.amplitude_grid();
    let base = cfg.classify_params();
    let t0 = cfg.t0();
    let (sweep, with_grid) = match cfg.model.classical_dim() {
        None => {
            let m = cfg.model_config().calibrated().context("trace calibration")?;
            let model = RadialModel::new(&m, cfg.radial_dim)?;
            (fujita_sweep(&model, |a| Ok(model.gaussian(a, t0)), &p_grid, &amps, &base, cfg.seed), false)
        }
        Some(d) => {
            let (l, n) = (cfg.box_l(), cfg.box_n());
            GridField::gaussian(d, l, n, 1.0, t0).context("initial grid")?;
            let model = ClassicalModel::new(d);
            let init = |a| GridField::gaussian(d, l, n, a, t0);
            (fujita_sweep(&model, init, &p_grid, &amps, &base, cfg.seed), true)
        }
    };
    let mut csv = Vec::new();
    write_records_csv(&mut csv, &sweep.records, with_grid)?;
    manifest.emit(out, "fujita_sweep.csv", &csv)?;

    let summary = sweep_summary(cfg.model, &sweep.records, &amps, sweep.notes);
    manifest.emit(out, "fujita_sweep_summary.json", &to_json(&summary)?)?;
    let mut lines = vec![format!(
        "{}: {} cells, {} blow-up, {} global-candidate, {} undecided",
        summary.model,
        sweep.records.len(),
        summary.blow_up,
        summary.global_candidate,
        summary.undecided
    )];
    match (summary.smallest_amplitude, summary.bracket) {
        (Some(a), Some((lo, hi))) => {
            lines.push(format!("boundary at amplitude {a}: p in ({lo}, {hi}], p_F = {}", summary.p_f))
        }
        (Some(a), None) => lines.push(format!("no boundary bracket at amplitude {a}")),
        _ => lines.push("empty sweep".into()),
    }
    for (p, a, why) in &summary.notes {
        lines.push(format!("note p={p} amplitude={a}: {why}"));
    }
    finish(manifest, out, lines)
}

pub fn sweep_summary(model: SweepModel, records: &[SweepRecord], amps: &[f64], notes: Vec<(f64, f64, String)>) -> SweepSummary {
    let p_f = 1.0 + 2.0 / model.dimension();
    let smallest = amps.iter().copied().reduce(f64::min);
    let bracket = smallest.and_then(|a| boundary_bracket(records, a));
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    SweepSummary {
        model: model.name().into(),
        p_f,
        smallest_amplitude: smallest,
        bracket,
        bracket_contains_p_f: bracket.map(|(lo, hi)| lo <= p_f && p_f <= hi),
        blow_up: count(Outcome::BlowUp),
        global_candidate: count(Outcome::GlobalCandidate),
        undecided: count(Outcome::Undecided),
        notes,
    }
}

// ---------------------------------------------------------------- certify

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifyReport {
    pub model: String,
    pub p: f64,
    pub amplitude: f64,
    pub t0: f64,
    pub horizon: f64,
    pub certificate: Certificate,
    pub monitors: Vec<MonitorEntry>,
    /// Time at which the evolution hit the blow-up ceiling, if it did.
    pub overflow_at: Option<f64>,
}

fn certify_model<M: EvolutionModel>(
    model: &M,
    u0: &M::State,
    cfg: &Config,
) -> anyhow::Result<(Certificate, Vec<MonitorEntry>, Option<f64>)> {
    let (p, horizon) = (cfg.certify_p, cfg.horizon());
    let grid = log_grid(horizon * 1e-4, horizon, cfg.certify_points);
    let cert = lemma61_certificate(model, u0, p, &grid)?;
    let mut times: Vec<f64> = cfg.certify_monitor_times.iter().copied().filter(|&s| s > 0.0 && s < horizon).collect();
    times.sort_by(f64::total_cmp);
    let params = StepParams { ceiling: cfg.ceiling_factor * model.sup_norm(u0), ..StepParams::new(p) };
    let mut state = EvolutionState::new(u0.clone(), cfg.scheme);
    let mut monitors = Vec::new();
    let mut overflow = None;
    for s1 in times {
        match moyal_heat::evolve::evolve_to(model, state.clone(), &[s1], &cfg.policy(), &params, cfg.max_steps) {
            Ok((next, _)) => state = next,
            Err(Error::Overflow { t, .. }) => {
                overflow = Some(t);
                break;
            }
            Err(e) => return Err(e.into()),
        }
        monitors.push(monitor_at(model, &state.u, s1, p, horizon, cfg.monitor_points)?);
    }
    Ok((cert, monitors, overflow))
}

pub fn certify(cfg: &Config, out: &Path) -> anyhow::Result<RunOutcome> {
    let mut manifest = RunManifest::new("certify", cfg);
    let (a, t0) = (cfg.certify_amplitude, cfg.t0());
    let (cert, monitors, overflow) = match cfg.model.classical_dim() {
        None => {
            let m = cfg.model_config().calibrated().context("trace calibration")?;
            let model = RadialModel::new(&m, cfg.radial_dim)?;
            certify_model(&model, &model.gaussian(a, t0), cfg)?
        }
        Some(d) => {
            let u0 = GridField::gaussian(d, cfg.box_l(), cfg.box_n(), a, t0)?;
            certify_model(&ClassicalModel::new(d), &u0, cfg)?
        }
    };
    let mut lines = vec![format!(
        "{} p={} amplitude={a}: threshold {:.6}, margin {:.6e}{}{}",
        cfg.model.name(),
        cfg.certify_p,
        cert.threshold,
        cert.margin,
        cert.violated_at.map_or(String::new(), |t| format!(", violated at t={t:.4e}")),
        if cert.advisory { " (advisory at this p)" } else { "" }
    )];
    for m in &monitors {
        lines.push(format!("monitor s1={}: margin {:.6e}", m.s1, m.margin));
    }
    if let Some(t) = overflow {
        lines.push(format!("blow-up ceiling reached at t={t:.4e}"));
    }
    let report = CertifyReport {
        model: cfg.model.name().into(),
        p: cfg.certify_p,
        amplitude: a,
        t0,
        horizon: cfg.horizon(),
        certificate: cert,
        monitors,
        overflow_at: overflow,
    };
    manifest.emit(out, "certify.json", &to_json(&report)?)?;
    finish(manifest, out, lines)
}
