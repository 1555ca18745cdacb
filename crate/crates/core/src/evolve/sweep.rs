use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    duhamel_step, fujita_params, lemma61_certificate, monitor_at, DtPolicy, EvolutionModel, EvolutionState,
    FujitaParams, HistoryEntry, Scheme, StepParams,
};
use crate::error::{Error, Result};
use crate::heat::log_grid;
use crate::random::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    BlowUp,
    GlobalCandidate,
    Undecided,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::BlowUp => "blow-up",
            Outcome::GlobalCandidate => "global-candidate",
            Outcome::Undecided => "undecided",
        })
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blow-up" => Ok(Outcome::BlowUp),
            "global-candidate" => Ok(Outcome::GlobalCandidate),
            "undecided" => Ok(Outcome::Undecided),
            other => Err(Error::InvalidConfig(format!("unknown outcome {other:?}"))),
        }
    }
}

/// Grid description of a classical field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub d: usize,
    /// Half-width of the box [−L, L)^d.
    pub l: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub p: f64,
    pub amplitude: f64,
    pub outcome: Outcome,
    pub t_detect: Option<f64>,
    pub max_uinf: f64,
    pub lemma61_margin: f64,
    pub beta: f64,
    pub q: f64,
    pub r: f64,
    /// −d ln‖u‖_q / d ln t over the last decade.
    pub decay_fit: Option<f64>,
    pub dt_final: f64,
    pub cell_seed: u64,
    pub grid: Option<GridInfo>,
}

const BASE_COLUMNS: [&str; 12] = [
    "p",
    "amplitude",
    "outcome",
    "t_detect",
    "max_uinf",
    "lemma61_margin",
    "beta",
    "q",
    "r",
    "decay_fit",
    "dt_final",
    "cell_seed",
];
const GRID_COLUMNS: [&str; 3] = ["d", "L", "n"];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::InvalidConfig(format!("bad number {s:?}")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() { Ok(None) } else { parse_f64(s).map(Some) }
}

impl SweepRecord {
    pub fn header(with_grid: bool) -> Vec<&'static str> {
        let mut h = BASE_COLUMNS.to_vec();
        if with_grid {
            h.extend(GRID_COLUMNS);
        }
        h
    }

    pub fn to_row(&self, with_grid: bool) -> Vec<String> {
        let mut row = vec![
            self.p.to_string(),
            self.amplitude.to_string(),
            self.outcome.to_string(),
            opt(self.t_detect),
            self.max_uinf.to_string(),
            self.lemma61_margin.to_string(),
            self.beta.to_string(),
            self.q.to_string(),
            self.r.to_string(),
            opt(self.decay_fit),
            self.dt_final.to_string(),
            self.cell_seed.to_string(),
        ];
        if with_grid {
            match self.grid {
                Some(g) => row.extend([g.d.to_string(), g.l.to_string(), g.n.to_string()]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        row
    }

    pub fn from_row(row: &csv::StringRecord) -> Result<Self> {
        let f = |i: usize| row.get(i).unwrap_or("");
        let grid = if row.len() >= 15 && !f(12).is_empty() {
            Some(GridInfo {
                d: f(12).parse().map_err(|_| Error::InvalidConfig("bad d".into()))?,
                l: parse_f64(f(13))?,
                n: f(14).parse().map_err(|_| Error::InvalidConfig("bad n".into()))?,
            })
        } else {
            None
        };
        Ok(Self {
            p: parse_f64(f(0))?,
            amplitude: parse_f64(f(1))?,
            outcome: f(2).parse()?,
            t_detect: parse_opt(f(3))?,
            max_uinf: parse_f64(f(4))?,
            lemma61_margin: parse_f64(f(5))?,
            beta: parse_f64(f(6))?,
            q: parse_f64(f(7))?,
            r: parse_f64(f(8))?,
            decay_fit: parse_opt(f(9))?,
            dt_final: parse_f64(f(10))?,
            cell_seed: f(11).parse().map_err(|_| Error::InvalidConfig("bad seed".into()))?,
            grid,
        })
    }
}

pub fn write_records_csv<W: Write>(w: W, records: &[SweepRecord], with_grid: bool) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SweepRecord::header(with_grid))?;
    for r in records {
        wr.write_record(r.to_row(with_grid))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.records().map(|row| SweepRecord::from_row(&row?)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub p: f64,
    pub amplitude: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub policy: DtPolicy,
    /// Blow-up ceiling as a multiple of ‖u₀‖_∞.
    pub ceiling_factor: f64,
    /// First checkpoint; checkpoints are log-spaced up to the horizon.
    pub t_first: f64,
    pub checkpoints_per_decade: usize,
    /// Restart the necessary-condition test at every checkpoint.
    pub monitor: bool,
    pub monitor_points: usize,
    /// Fixes q for p above the Fujita exponent instead of the interval midpoint.
    pub q_override: Option<f64>,
    pub max_steps: usize,
}

impl ClassifyParams {
    pub fn new(p: f64, amplitude: f64, horizon: f64) -> Self {
        Self {
            p,
            amplitude,
            horizon,
            scheme: Scheme::Midpoint,
            policy: DtPolicy::default(),
            ceiling_factor: 1e6,
            t_first: horizon * 1e-3,
            checkpoints_per_decade: 10,
            monitor: true,
            monitor_points: 24,
            q_override: None,
            max_steps: 200_000,
        }
    }

    pub fn checkpoints(&self) -> Vec<f64> {
        let decades = (self.horizon / self.t_first).log10().max(0.0);
        let n = (decades * self.checkpoints_per_decade as f64).round() as usize + 1;
        log_grid(self.t_first, self.horizon, n.max(2))
    }
}

/// (q, β, r) of the decay functional t^β‖u(t)‖_q. Above p_F these come from the
/// small-data argument; at or below p_F the admissible interval is empty and the
/// scale-invariant pair q = ∞, β = 1/(p−1) is used.
pub fn decay_exponents(d: f64, p: f64, q_override: Option<f64>) -> Result<(f64, f64, f64)> {
    if p > 1.0 + 2.0 / d {
        let f = match q_override {
            Some(q) => FujitaParams::with_q(d, p, q)?,
            None => fujita_params(d, p)?,
        };
        Ok((f.q, f.beta, f.r))
    } else {
        Ok((f64::INFINITY, 1.0 / (p - 1.0), 0.5 * d * (p - 1.0)))
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub record: SweepRecord,
    /// Checkpoint history.
    pub history: Vec<HistoryEntry>,
    /// Why the cell is undecided, when it is.
    pub reason: Option<String>,
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs one cell to blow-up detection or the horizon and classifies it.
pub fn classify_cell<M: EvolutionModel>(model: &M, u0: &M::State, params: &ClassifyParams, cell_seed: u64) -> CellResult {
    let d = model.dimension();
    let p = params.p;
    let exps = decay_exponents(d, p, params.q_override);
    let (q, beta, r) = *exps.as_ref().unwrap_or(&(f64::NAN, f64::NAN, f64::NAN));
    let mut record = SweepRecord {
        p,
        amplitude: params.amplitude,
        outcome: Outcome::Undecided,
        t_detect: None,
        max_uinf: model.sup_norm(u0),
        lemma61_margin: f64::NAN,
        beta,
        q,
        r,
        decay_fit: None,
        dt_final: 0.0,
        cell_seed,
        grid: model.grid_info(u0),
    };
    let mut history = Vec::new();
    let result = exps.and_then(|_| run_cell(model, u0, params, q, beta, &mut record, &mut history));
    let reason = match result {
        Ok(()) => None,
        Err(e) => {
            record.outcome = Outcome::Undecided;
            Some(e.to_string())
        }
    };
    CellResult { record, history, reason }
}

fn run_cell<M: EvolutionModel>(
    model: &M,
    u0: &M::State,
    params: &ClassifyParams,
    q: f64,
    beta: f64,
    record: &mut SweepRecord,
    history: &mut Vec<HistoryEntry>,
) -> Result<()> {
    let p = params.p;
    let sup0 = model.sup_norm(u0);
    let step = StepParams { p, coeff: 1.0, ceiling: params.ceiling_factor * sup0, q: None };
    let use_monitor = params.monitor && model.certificate_valid(p);

    let cert_grid = log_grid(params.horizon * 1e-4, params.horizon, params.monitor_points);
    let cert = lemma61_certificate(model, u0, p, &cert_grid)?;
    record.lemma61_margin = cert.margin;
    if use_monitor && cert.margin > 0.0 {
        record.outcome = Outcome::BlowUp;
        record.t_detect = Some(0.0);
        return Ok(());
    }
    if sup0 == 0.0 {
        record.outcome = Outcome::GlobalCandidate;
        return Ok(());
    }

    let mut state = EvolutionState::new(u0.clone(), params.scheme);
    let mut steps = 0;
    for target in params.checkpoints() {
        while state.t < target {
            let sup = model.sup_norm(&state.u);
            let mut dt = params.policy.next(state.t, sup, &step);
            if state.t + 1.5 * dt >= target {
                dt = if state.t + dt >= target { target - state.t } else { 0.5 * (target - state.t) };
            }
            match duhamel_step(model, &state, dt, &step) {
                Ok(mut next) => {
                    next.history.clear();
                    record.max_uinf = record.max_uinf.max(model.sup_norm(&next.u));
                    record.dt_final = dt;
                    state = next;
                    if (state.t - target).abs() <= 1e-12 * target {
                        state.t = target;
                    }
                }
                Err(Error::Overflow { t, norm, .. }) => {
                    record.outcome = Outcome::BlowUp;
                    record.t_detect = Some(t);
                    record.max_uinf = record.max_uinf.max(norm);
                    record.dt_final = dt;
                    record.grid = model.grid_info(&state.u);
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
            steps += 1;
            if steps > params.max_steps {
                return Err(Error::NotConverged(format!("step budget exhausted at t={}", state.t)));
            }
        }
        record.grid = model.grid_info(&state.u);
        let norm_q = model.lq_norm(&state.u, q)?;
        let monitor = if use_monitor && target < params.horizon {
            Some(monitor_at(model, &state.u, target, p, params.horizon, params.monitor_points)?.margin)
        } else {
            None
        };
        history.push(HistoryEntry { t: target, norm_q: Some(norm_q), norm_inf: model.sup_norm(&state.u), monitor });
        if monitor.is_some_and(|m| m > 0.0) {
            record.outcome = Outcome::BlowUp;
            record.t_detect = Some(target);
            return Ok(());
        }
    }

    let tail: Vec<&HistoryEntry> = history.iter().filter(|h| h.t >= params.horizon / 10.0 * (1.0 - 1e-12)).collect();
    let functional: Vec<f64> = tail.iter().map(|h| h.t.powf(beta) * h.norm_q.unwrap_or(f64::NAN)).collect();
    let fit_points: Vec<(f64, f64)> =
        tail.iter().filter_map(|h| h.norm_q.filter(|v| *v > 0.0).map(|v| (h.t.ln(), v.ln()))).collect();
    record.decay_fit = slope(&fit_points).map(|s| -s);
    let non_increasing = functional.len() >= 2 && functional.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    record.outcome = if non_increasing { Outcome::GlobalCandidate } else { Outcome::Undecided };
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    /// Sorted by (p, amplitude).
    pub records: Vec<SweepRecord>,
    /// (p, amplitude, reason) for cells that failed to run.
    pub notes: Vec<(f64, f64, String)>,
}

/// Classifies every (p, amplitude) cell; cells run in parallel, each single-threaded.
pub fn fujita_sweep<M, F>(
    model: &M,
    init: F,
    p_grid: &[f64],
    amplitude_grid: &[f64],
    base: &ClassifyParams,
    seed: u64,
) -> SweepOutput
where
    M: EvolutionModel,
    F: Fn(f64) -> Result<M::State> + Sync,
{
    let cells: Vec<(usize, f64, f64)> = p_grid
        .iter()
        .flat_map(|&p| amplitude_grid.iter().map(move |&a| (p, a)))
        .enumerate()
        .map(|(i, (p, a))| (i, p, a))
        .collect();
    let mut results: Vec<(SweepRecord, Option<String>)> = cells
        .par_iter()
        .map(|&(i, p, a)| {
            let cell_seed = derive_seed(seed, i as u64);
            let params = ClassifyParams { p, amplitude: a, ..*base };
            match init(a) {
                Ok(u0) => {
                    let c = classify_cell(model, &u0, &params, cell_seed);
                    (c.record, c.reason)
                }
                Err(e) => {
                    let record = SweepRecord {
                        p,
                        amplitude: a,
                        outcome: Outcome::Undecided,
                        t_detect: None,
                        max_uinf: f64::NAN,
                        lemma61_margin: f64::NAN,
                        beta: f64::NAN,
                        q: f64::NAN,
                        r: f64::NAN,
                        decay_fit: None,
                        dt_final: 0.0,
                        cell_seed,
                        grid: None,
                    };
                    (record, Some(e.to_string()))
                }
            }
        })
        .collect();
    results.sort_by(|a, b| a.0.p.total_cmp(&b.0.p).then(a.0.amplitude.total_cmp(&b.0.amplitude)));
    let notes = results
        .iter()
        .filter_map(|(r, n)| n.as_ref().map(|n| (r.p, r.amplitude, n.clone())))
        .collect();
    SweepOutput { records: results.into_iter().map(|r| r.0).collect(), notes }
}

/// (p_lo, p_hi) around the empirical boundary at one amplitude: p_hi is the smallest p
/// from which every larger p is a global candidate, p_lo its neighbour below.
pub fn boundary_bracket(records: &[SweepRecord], amplitude: f64) -> Option<(f64, f64)> {
    let mut row: Vec<&SweepRecord> = records.iter().filter(|r| r.amplitude == amplitude).collect();
    row.sort_by(|a, b| a.p.total_cmp(&b.p));
    let mut first_global = None;
    for i in (0..row.len()).rev() {
        if row[i].outcome == Outcome::GlobalCandidate {
            first_global = Some(i);
        } else {
            break;
        }
    }
    match first_global {
        Some(i) if i > 0 => Some((row[i - 1].p, row[i].p)),
        _ => None,
    }
}
