//! Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
//! arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use moyal_heat::classical::{critical_amplitude, evolve_classical, GridField};
use moyal_heat::convexity::JensenRecord;
use moyal_heat::doi::{doi_power_difference, estimate_cp, verify_nonlinearity, CpGrid, NonlinearityParams, PhiKernel};
use moyal_heat::evolve::{
    classify_cell, lemma61_threshold, picard_cross_check, picard_window, ClassifyParams, FujitaParams, MatrixModel,
    Outcome, PicardParams, RadialModel,
};
use moyal_heat::heat::{gaussian_operator, log_grid, sigma_t};
use moyal_heat::lp::lp_norm;
use moyal_heat::random::{complex_gaussian, derive_seed, random_positive, rng};
use moyal_heat::{HeatRoute, ModelConfig, Operator, C64};
use moyal_heat_cli::commands::{CheckReport, JensenReport, SweepSummary};
use moyal_heat_cli::config::SweepModel;
use moyal_heat_cli::{run, Config, Status, Subcommand};
use nalgebra::{DMatrix, SymmetricEigen};

const SEED: u64 = 20240611;

type Verdict = Result<String, String>;

fn check(ok: bool, msg: String) -> Verdict {
    if ok { Ok(msg) } else { Err(msg) }
}

/// Hermitian x^p by nalgebra's eigensolver, independent of the library's matrix functions.
fn power(x: &DMatrix<C64>, p: f64) -> DMatrix<C64> {
    let e = SymmetricEigen::new(x.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| C64::new(v.max(0.0).powf(p), 0.0)));
    &e.eigenvectors * d * e.eigenvectors.adjoint()
}

fn min_eig(x: &DMatrix<C64>) -> f64 {
    let h = (x + x.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.min()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn calibrated(n: usize) -> ModelConfig {
    ModelConfig::new(n, 1.0).with_route(HeatRoute::Generator).calibrated().unwrap()
}

fn c1() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (k, p) in [1.5, 2.0, 2.7, 4.0].into_iter().enumerate() {
        for i in 0..250 {
            let mut r = rng(derive_seed(SEED, (1000 * k + i) as u64));
            let a = random_positive(12, &mut r);
            let b = match i % 3 {
                0 => random_positive(12, &mut r),
                1 => random_positive(12, &mut r).scale(3.0),
                _ => {
                    let x = complex_gaussian(12, 12, &mut r);
                    let bump = &x * x.adjoint() * C64::new(0.05 / 12.0, 0.0);
                    Operator::new(a.entries() + bump).symmetrized().with_positive()
                }
            };
            let direct = power(a.entries(), p) - power(b.entries(), p);
            let via = doi_power_difference(&a, &b, &PhiKernel::new(p)).map_err(|e| e.to_string())?;
            worst = worst.max((via.entries() - &direct).norm() / direct.norm());
            count += 1;
        }
    }
    check(worst <= 1e-10, format!("{count} pairs, dim 12, max relative Frobenius residual {worst:.2e} (tol 1e-10)"))
}

fn c2() -> Verdict {
    let grid = CpGrid::default();
    let c2 = estimate_cp(2.0, grid).map_err(|e| e.to_string())?;
    let c3 = estimate_cp(3.0, grid).map_err(|e| e.to_string())?;
    let c3_err = (c3 / (1.0 + std::f64::consts::PI) - 1.0).abs();
    let mut worst = String::new();
    let mut ok = c2 == 1.0 && c3_err <= 0.005;
    let mut max_excess = f64::NEG_INFINITY;
    for (i, p) in [1.5, 2.0, 2.7, 3.0, 4.0].into_iter().enumerate() {
        for (j, q) in [1.0, 2.0, 3.0, f64::INFINITY].into_iter().enumerate() {
            let params = NonlinearityParams { p, q, trials: 60, dim: 8, seed: derive_seed(SEED, (10 * i + j) as u64), grid };
            match verify_nonlinearity(&params) {
                Ok(r) => {
                    let ratio = r.max_theorem_ratio.max(r.max_cor42_ratio);
                    if ratio / r.c_p > max_excess {
                        max_excess = ratio / r.c_p;
                        worst = format!("p={p} q={q}: {ratio:.4} vs c_p {:.4}", r.c_p);
                    }
                }
                Err(e) => {
                    ok = false;
                    worst = format!("p={p} q={q}: {e}");
                }
            }
        }
    }
    check(
        ok && max_excess <= 1.0 + 1e-9,
        format!("c_2 = {c2}, c_3 = {c3:.6} (1+π rel. err {c3_err:.1e}), largest ratio/c_p {max_excess:.3} at {worst}"),
    )
}

fn c3() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::default();
    let pinned = cfg.trace_tol == 0.01
        && cfg.positivity_tol == 1e-10
        && cfg.semigroup_tol == 1e-4
        && cfg.norm_slack == 1e-8
        && cfg.kernel_tol == 1e-6
        && (cfg.n, cfg.n_pad) == (48, 96)
        && cfg.heat_trace_t == [0.5, 1.0, 2.0];
    let out = run(Subcommand::HeatCheck, &cfg, dir.path()).map_err(|e| e.to_string())?;
    let report: CheckReport = read_json(&dir.path().join("heat_check.json"));
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let dets: Vec<f64> = [0.25, 1.0, 4.0]
        .iter()
        .map(|&t| {
            let s = sigma_t(t);
            s[0][0] * s[1][1] - s[0][1] * s[1][0]
        })
        .collect();
    let det_ok = dets.iter().all(|d| (d - 0.25).abs() < 1e-14);
    check(
        pinned && det_ok && failed.is_empty() && out.status == Status::Success,
        format!(
            "{} checks at N=48/N_pad=96, failed {:?}; det Σ_t = {:?} (1/4, not 1/8)",
            report.checks.len(),
            failed,
            dets
        ),
    )
}

fn c4() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::default();
    let out = run(Subcommand::JensenCheck, &cfg, dir.path()).map_err(|e| e.to_string())?;
    let report: JensenReport = read_json(&dir.path().join("jensen_check.json"));
    let heat_ok = report.heat.iter().all(|c| c.passed) && report.heat.len() == 9;
    let path = report.counterexample_path.clone().ok_or("no counterexample archived")?;
    let rec: JensenRecord = read_json(Path::new(&path));
    // recompute Φ(u³) − Φ(u)³ from the archived Kraus family
    let n = rec.dim;
    let mat = |v: &[(f64, f64)]| DMatrix::from_fn(n, n, |i, j| C64::new(v[i * n + j].0, v[i * n + j].1));
    let kraus: Vec<DMatrix<C64>> = rec.kraus.iter().map(|k| mat(k)).collect();
    let u = mat(&rec.u);
    let phi = |x: &DMatrix<C64>| kraus.iter().fold(DMatrix::zeros(n, n), |acc, k| acc + k * x * k.adjoint());
    let unital = (phi(&DMatrix::identity(n, n)) - DMatrix::<C64>::identity(n, n)).norm();
    let gap = min_eig(&(phi(&power(&u, 3.0)) - power(&phi(&u), 3.0)));
    check(
        out.status == Status::Success
            && report.cp_trials == 200
            && report.cp_min_scaled_gap >= -1e-8
            && heat_ok
            && gap < -1e-4
            && unital < 1e-10,
        format!(
            "{} CP trials min scaled gap {:.2e}; heat channels {}; p=3 archived gap {:.3e} (recomputed {gap:.3e})",
            report.cp_trials,
            report.cp_min_scaled_gap,
            if heat_ok { "ok" } else { "FAILED" },
            rec.gap
        ),
    )
}

fn c5() -> Verdict {
    let cfg = calibrated(48);
    let model = MatrixModel::new(&cfg).map_err(|e| e.to_string())?;
    let u0 = gaussian_operator(&cfg, 0.5).map_err(|e| e.to_string())?.scale(0.5).with_positive();
    let tol = 1e-8;
    let mut parts = Vec::new();
    let mut ok = true;
    for p in [1.5, 3.0] {
        let q = 2.0;
        let rep = picard_window(&model, &u0, &PicardParams::new(p, q, tol)).map_err(|e| e.to_string())?;
        let delta = lp_norm(&cfg, &u0, q).unwrap().max(u0.spectral_norm());
        let c_p = if p == 3.0 { 1.0 + std::f64::consts::PI } else { rep.c_p };
        let window = 0.5 * 2f64.powf(-p) * delta.powf(1.0 - p) / c_p;
        let cross = picard_cross_check(&model, &u0, &rep, p, 400).map_err(|e| e.to_string())?;
        let this = rep.max_ratio() < 1.0 && (rep.window / window - 1.0).abs() < 5e-3 && cross <= 5.0 * tol;
        ok &= this;
        parts.push(format!(
            "p={p}: T={:.4} (expected {window:.4}), max ratio {:.3}, stepper gap {cross:.1e}",
            rep.window,
            rep.max_ratio()
        ));
    }
    check(ok, parts.join("; "))
}

fn c6() -> Verdict {
    let t1 = lemma61_threshold(2.0);
    let t2 = lemma61_threshold(1.5);
    let p = 1.5;
    let horizon = 1e4;
    let shape = GridField::gaussian(1, 40.0, 2048, 1.0, 1.0).unwrap();
    let grid = log_grid(horizon * 1e-4, horizon, 24);
    let a_star = critical_amplitude(&shape, p, &grid, 1e-8, 1.0, 1e-6).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for k in -2..=2 {
        let a = a_star * 2f64.powi(k);
        let u0 = GridField::gaussian(1, 40.0, 2048, a, 1.0).unwrap();
        let params = ClassifyParams { monitor: false, ..ClassifyParams::new(p, a, horizon) };
        let r = evolve_classical(&u0, &params, k as u64);
        rows.push((a, r.record.outcome, r.record.t_detect));
    }
    let blow: Vec<bool> = rows.iter().map(|r| r.1 == Outcome::BlowUp).collect();
    let first = blow.iter().position(|&b| b);
    let monotone = first.is_some_and(|i| blow[i..].iter().all(|&b| b) && !blow[..i].iter().any(|&b| b));
    let within = first.is_some_and(|i| (rows[i].0 / a_star).log2().abs() <= 1.0 + 1e-9);
    let desc: Vec<String> = rows
        .iter()
        .map(|(a, o, t)| format!("{:.2}A*:{o}{}", a / a_star, t.map_or(String::new(), |t| format!("@{t:.0}"))))
        .collect();
    check(
        t1 == 1.0 && t2 == 4.0 && monotone && within,
        format!("thresholds {t1}, {t2}; d=1 p=1.5 A* = {a_star:.5e}; {}", desc.join(" ")),
    )
}

fn sweep(model: SweepModel, p_grid: Vec<f64>, amps: Vec<f64>, horizon: Option<f64>) -> Result<SweepSummary, String> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config { model, p_grid: Some(p_grid), amplitude_grid: Some(amps), horizon, ..Config::default() };
    run(Subcommand::FujitaSweep, &cfg, dir.path()).map_err(|e| e.to_string())?;
    Ok(read_json(&dir.path().join("fujita_sweep_summary.json")))
}

fn c7() -> Verdict {
    let d1 = sweep(SweepModel::ClassicalD1, vec![2.0, 2.4, 2.8, 3.0, 3.2, 3.6, 4.0], vec![0.01], None)?;
    let d2 = sweep(SweepModel::ClassicalD2, vec![1.6, 1.8, 2.0, 2.2, 2.6], vec![0.01], None)?;
    let ok1 = d1.bracket.is_some_and(|(lo, hi)| lo >= 2.2 && hi <= 3.6 && lo <= 3.0 && 3.0 <= hi);
    let ok2 = d2.bracket.is_some_and(|(lo, hi)| lo <= 2.0 && 2.0 <= hi);
    check(ok1 && ok2, format!("d=1 bracket {:?} (p_F=3), d=2 bracket {:?} (p_F=2) at amplitude 0.01", d1.bracket, d2.bracket))
}

fn c8() -> Verdict {
    let cfg = calibrated(48);
    let model = RadialModel::new(&cfg, moyal_heat::evolve::DEFAULT_RADIAL_DIM).map_err(|e| e.to_string())?;
    let u0 = model.gaussian(1e-2, 0.5);
    let beta = FujitaParams::with_q(2.0, 3.0, 4.0).unwrap().beta;
    let hi = ClassifyParams { q_override: Some(4.0), ..ClassifyParams::new(3.0, 1e-2, 50.0) };
    let r3 = classify_cell(&model, &u0, &hi, 0).record;
    let fit = r3.decay_fit.unwrap_or(f64::NAN);
    let fit_ok = (fit / beta - 1.0).abs() <= 0.3;
    let r15 = classify_cell(&model, &u0, &ClassifyParams::new(1.5, 1e-2, 50.0), 1).record;
    let low_ok = r15.outcome == Outcome::BlowUp && r15.t_detect.is_some_and(|t| t < 50.0);
    check(
        r3.outcome == Outcome::GlobalCandidate && fit_ok && low_ok,
        format!(
            "p=3: {} with decay fit {fit:.3} vs β={beta} (±30%); p=1.5: {}, certificate margin {:.3}",
            r3.outcome, r15.outcome, r15.lemma61_margin
        ),
    )
}

fn c9() -> Verdict {
    let f = FujitaParams::with_q(2.0, 3.0, 4.0).map_err(|e| e.to_string())?;
    // Γ(1/2)Γ(1/4)/Γ(3/4)
    let oracle = std::f64::consts::PI.sqrt() * 3.625_609_908_221_908_3 / 1.225_416_702_465_177_6;
    let pb = f.p * f.beta;
    let id = f.exponent_identity();
    check(
        pb == 0.75 && id == 1.0 && (f.gamma_factor - oracle).abs() <= 1e-3,
        format!("pβ = {pb}, identity = {id}, gamma_factor = {:.6} (oracle {oracle:.6})", f.gamma_factor),
    )
}

fn c10() -> Verdict {
    let cfg = Config {
        p_grid: Some(vec![1.5, 2.5, 3.0]),
        amplitude_grid: Some(vec![0.01, 1.0]),
        horizon: Some(10.0),
        ..Config::default()
    };
    let mut bodies = Vec::new();
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = run(Subcommand::FujitaSweep, &cfg, dir.path()).map_err(|e| e.to_string())?;
        bodies.push(std::fs::read(dir.path().join("fujita_sweep.csv")).unwrap());
        let csv = out.manifest.outputs.iter().find(|o| o.path.ends_with("fujita_sweep.csv")).ok_or("csv not in manifest")?;
        hashes.push(csv.sha256.clone());
    }
    check(
        bodies[0] == bodies[1] && hashes[0] == hashes[1] && !bodies[0].is_empty(),
        format!("two runs, {} CSV bytes each, sha256 {}", bodies[0].len(), &hashes[0][..16]),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "DOI identity", c1),
        (2, "nonlinearity constant", c2),
        (3, "heat-kernel suite", c3),
        (4, "operator Jensen", c4),
        (5, "local existence", c5),
        (6, "necessary-condition certificate", c6),
        (7, "classical Fujita bracket", c7),
        (8, "matrix-model Fujita dichotomy", c8),
        (9, "Fujita parameter algebra", c9),
        (10, "sweep determinism", c10),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("PASS criterion {n} ({name}, {secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}, {secs:.1}s): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
