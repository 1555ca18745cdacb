use std::path::Path;

use anyhow::{bail, Context};
use moyal_heat::evolve::{ClassifyParams, DtPolicy, Scheme};
use moyal_heat::{HeatRoute, ModelConfig};
use serde::{Deserialize, Serialize};

/// Model driven by `fujita-sweep` and `certify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepModel {
    /// Radial sector of the truncated Moyal plane (d = 2).
    #[default]
    Matrix2,
    ClassicalD1,
    ClassicalD2,
    ClassicalD3,
}

impl SweepModel {
    pub fn classical_dim(self) -> Option<usize> {
        match self {
            SweepModel::Matrix2 => None,
            SweepModel::ClassicalD1 => Some(1),
            SweepModel::ClassicalD2 => Some(2),
            SweepModel::ClassicalD3 => Some(3),
        }
    }

    pub fn dimension(self) -> f64 {
        self.classical_dim().unwrap_or(2) as f64
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepModel::Matrix2 => "matrix2",
            SweepModel::ClassicalD1 => "classical-d1",
            SweepModel::ClassicalD2 => "classical-d2",
            SweepModel::ClassicalD3 => "classical-d3",
        }
    }

    fn default_p_grid(self) -> Vec<f64> {
        match self {
            SweepModel::Matrix2 => vec![1.5, 1.75, 2.0, 2.25, 2.5, 3.0],
            SweepModel::ClassicalD1 => vec![2.0, 2.4, 2.8, 3.0, 3.2, 3.6, 4.0],
            SweepModel::ClassicalD2 => vec![1.6, 1.8, 2.0, 2.2, 2.6],
            SweepModel::ClassicalD3 => vec![1.4, 1.6, 1.8, 2.0],
        }
    }

    fn default_horizon(self) -> f64 {
        match self {
            SweepModel::Matrix2 => 50.0,
            SweepModel::ClassicalD3 => 1e3,
            _ => 1e4,
        }
    }

    fn default_t0(self) -> f64 {
        match self {
            SweepModel::Matrix2 => 0.5,
            _ => 1.0,
        }
    }

    fn default_box(self) -> (f64, usize) {
        match self {
            SweepModel::ClassicalD1 => (40.0, 2048),
            SweepModel::ClassicalD2 => (40.0, 256),
            _ => (24.0, 96),
        }
    }
}

/// Every key of the flat TOML config. Missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub output_dir: String,

    // matrix model
    pub n: usize,
    pub n_pad: usize,
    pub h: f64,
    pub quad_order: usize,
    pub tol_leak: f64,
    pub heat_route: HeatRoute,
    pub radial_dim: usize,

    // verify-doi
    pub doi_p: Vec<f64>,
    /// Use "inf" for q = ∞.
    pub doi_q: Vec<f64>,
    pub doi_trials: usize,
    pub doi_dim: usize,
    pub doi_identity_tol: f64,
    pub cp_extent: f64,
    pub cp_points: usize,
    /// Test hook: replaces the diagonal of every φ grid by 10·p.
    pub corrupt_phi: bool,

    // heat-check
    pub heat_trace_t: Vec<f64>,
    pub trace_tol: f64,
    pub gaussian_t: Vec<f64>,
    pub positivity_tol: f64,
    pub semigroup_tol: f64,
    pub norm_slack: f64,
    pub kernel_tol: f64,
    pub kernel_nodes: usize,
    pub tauberian_t_min: f64,
    pub tauberian_t_max: f64,
    pub tauberian_points: usize,
    pub tauberian_tol: f64,
    /// Heat times for the flow checks (trace, positivity, norms).
    pub flow_t: Vec<f64>,
    /// Test operators live on this many low levels.
    pub local_dim: usize,

    // jensen-check
    pub jensen_p_min: f64,
    pub jensen_p_max: f64,
    pub jensen_trials: usize,
    pub jensen_dim: usize,
    pub jensen_kraus: usize,
    pub jensen_heat_t: Vec<f64>,
    pub jensen_heat_p: Vec<f64>,
    pub jensen_tol: f64,
    pub counterexample_p: f64,
    pub counterexample_threshold: f64,
    pub counterexample_trials: usize,
    pub counterexample_dim: usize,
    pub counterexample_kraus: usize,

    // fujita-sweep and certify
    pub model: SweepModel,
    pub p_grid: Option<Vec<f64>>,
    pub amplitude_grid: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub t0: Option<f64>,
    pub box_l: Option<f64>,
    pub box_n: Option<usize>,
    pub scheme: Scheme,
    pub ceiling_factor: f64,
    pub first_checkpoint: f64,
    pub checkpoints_per_decade: usize,
    pub monitor: bool,
    pub monitor_points: usize,
    pub q_override: Option<f64>,
    pub dt_init: f64,
    pub dt_frac: f64,
    pub dt_cfl: f64,
    pub dt_max: f64,
    pub max_steps: usize,

    // certify
    pub certify_p: f64,
    pub certify_amplitude: f64,
    pub certify_points: usize,
    pub certify_monitor_times: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let policy = DtPolicy::default();
        Self {
            seed: 20240611,
            output_dir: "out".into(),
            n: 48,
            n_pad: 96,
            h: 1.0,
            quad_order: 20,
            tol_leak: 1e-6,
            heat_route: HeatRoute::Generator,
            radial_dim: moyal_heat::evolve::DEFAULT_RADIAL_DIM,
            doi_p: vec![1.0, 1.5, 2.0, 2.7, 3.0, 4.0],
            doi_q: vec![1.0, 2.0, 3.0, f64::INFINITY],
            doi_trials: 250,
            doi_dim: 12,
            doi_identity_tol: 1e-10,
            cp_extent: 80.0,
            cp_points: 1 << 14,
            corrupt_phi: false,
            heat_trace_t: vec![0.5, 1.0, 2.0],
            trace_tol: 0.01,
            gaussian_t: vec![0.25, 1.0, 4.0],
            positivity_tol: 1e-10,
            semigroup_tol: 1e-4,
            norm_slack: 1e-8,
            kernel_tol: 1e-6,
            kernel_nodes: 80,
            tauberian_t_min: 0.1,
            tauberian_t_max: 50.0,
            tauberian_points: 30,
            tauberian_tol: 0.05,
            flow_t: vec![0.1, 0.5, 1.0],
            local_dim: 4,
            jensen_p_min: 1.0,
            jensen_p_max: 2.0,
            jensen_trials: 200,
            jensen_dim: 6,
            jensen_kraus: 3,
            jensen_heat_t: vec![0.1, 0.5, 1.0],
            jensen_heat_p: vec![1.0, 1.5, 2.0],
            jensen_tol: 1e-8,
            counterexample_p: 3.0,
            counterexample_threshold: -1e-4,
            counterexample_trials: 400,
            counterexample_dim: 3,
            counterexample_kraus: 2,
            model: SweepModel::Matrix2,
            p_grid: None,
            amplitude_grid: None,
            horizon: None,
            t0: None,
            box_l: None,
            box_n: None,
            scheme: Scheme::Midpoint,
            ceiling_factor: 1e6,
            first_checkpoint: 1e-3,
            checkpoints_per_decade: 10,
            monitor: true,
            monitor_points: 24,
            q_override: None,
            dt_init: policy.dt_init,
            dt_frac: policy.frac,
            dt_cfl: policy.cfl,
            dt_max: policy.dt_max,
            max_steps: 200_000,
            certify_p: 1.5,
            certify_amplitude: 1.0,
            certify_points: 48,
            certify_monitor_times: vec![0.5, 1.0, 2.0],
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.doi_p.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
            bail!("doi_p entries must be finite and >= 1");
        }
        if self.doi_q.iter().any(|&q| !(q >= 1.0)) {
            bail!("doi_q entries must be >= 1");
        }
        if !(self.jensen_p_min >= 1.0 && self.jensen_p_max <= 2.0 && self.jensen_p_min <= self.jensen_p_max) {
            bail!("jensen p range must lie in [1, 2]");
        }
        if self.p_grid().iter().any(|&p| !(p > 1.0 && p.is_finite())) {
            bail!("p_grid entries must be finite and > 1");
        }
        if self.amplitude_grid().iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            bail!("amplitude_grid entries must be positive");
        }
        if !(self.horizon() > 0.0) || !(self.t0() > 0.0) {
            bail!("horizon and t0 must be positive");
        }
        Ok(())
    }

    /// Uncalibrated matrix-model configuration.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            n: self.n,
            n_pad: self.n_pad,
            h: self.h,
            quad_order: self.quad_order,
            c_tau: 0.0,
            tol_leak: self.tol_leak,
            heat_route: self.heat_route,
        }
    }

    pub fn p_grid(&self) -> Vec<f64> {
        self.p_grid.clone().unwrap_or_else(|| self.model.default_p_grid())
    }

    pub fn amplitude_grid(&self) -> Vec<f64> {
        self.amplitude_grid.clone().unwrap_or_else(|| vec![1e-2, 1e-1, 1.0])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or_else(|| self.model.default_horizon())
    }

    pub fn t0(&self) -> f64 {
        self.t0.unwrap_or_else(|| self.model.default_t0())
    }

    pub fn box_l(&self) -> f64 {
        self.box_l.unwrap_or_else(|| self.model.default_box().0)
    }

    pub fn box_n(&self) -> usize {
        self.box_n.unwrap_or_else(|| self.model.default_box().1)
    }

    pub fn policy(&self) -> DtPolicy {
        DtPolicy { dt_init: self.dt_init, frac: self.dt_frac, cfl: self.dt_cfl, dt_max: self.dt_max }
    }

    /// Classifier settings shared by every cell.
    pub fn classify_params(&self) -> ClassifyParams {
        let horizon = self.horizon();
        ClassifyParams {
            scheme: self.scheme,
            policy: self.policy(),
            ceiling_factor: self.ceiling_factor,
            t_first: horizon * self.first_checkpoint,
            checkpoints_per_decade: self.checkpoints_per_decade,
            monitor: self.monitor,
            monitor_points: self.monitor_points,
            q_override: self.q_override,
            max_steps: self.max_steps,
            ..ClassifyParams::new(f64::NAN, f64::NAN, horizon)
        }
    }

    /// Config with every model-dependent default filled in, as recorded in manifests.
    pub fn resolved(&self) -> Self {
        Self {
            p_grid: Some(self.p_grid()),
            amplitude_grid: Some(self.amplitude_grid()),
            horizon: Some(self.horizon()),
            t0: Some(self.t0()),
            box_l: self.model.classical_dim().map(|_| self.box_l()),
            box_n: self.model.classical_dim().map(|_| self.box_n()),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::parse("sead = 3").is_err());
        assert!(Config::parse("n = \"48\"").is_err());
    }

    #[test]
    fn typed_values() {
        let c = Config::parse(
            "seed = 7\nmodel = \"classical-d1\"\ndoi_q = [1.0, inf]\namplitude_grid = []\nheat_route = \"generator\"",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.model, SweepModel::ClassicalD1);
        assert_eq!(c.doi_q, vec![1.0, f64::INFINITY]);
        assert!(c.amplitude_grid().is_empty());
        assert_eq!(c.horizon(), 1e4);
        assert_eq!((c.box_l(), c.box_n()), (40.0, 2048));
        assert_eq!(c.heat_route, HeatRoute::Generator);
    }

    #[test]
    fn resolved_roundtrips_through_toml() {
        let c = Config { model: SweepModel::ClassicalD2, ..Config::default() }.resolved();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::parse(&text).unwrap(), c);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Config::parse("p_grid = [1.0]").is_err());
        assert!(Config::parse("jensen_p_max = 3.0").is_err());
    }
}
