//! Run configuration: one TOML file per experiment, with `key=value`
//! command-line overrides applied to the raw value tree before typing.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use bvflow_core::energy::EnergyModel;
use bvflow_core::sample::SampleBox;
use bvflow_core::State;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub branches: BranchesConfig,
    #[serde(default)]
    pub jump: JumpConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub limit: LimitConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub polynomial: Option<PolynomialConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialConfig {
    pub dim: usize,
    pub terms: Vec<PolyTerm>,
    #[serde(default)]
    pub tilt: Option<TiltConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltConfig {
    pub direction: Vec<f64>,
    /// l(t) = time_coeffs[0] + time_coeffs[1] t + ...
    pub time_coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub write_trajectories: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            write_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxConfig {
    pub fn to_box(&self) -> Result<SampleBox> {
        if self.lo.len() != self.hi.len()
            || self.lo.iter().zip(&self.hi).any(|(a, b)| a >= b)
        {
            bail!("box bounds must satisfy lo < hi componentwise");
        }
        Ok(SampleBox::new(self.lo.clone(), self.hi.clone()))
    }
}

fn default_box_1d() -> BoxConfig {
    BoxConfig {
        lo: vec![-2.5],
        hi: vec![2.5],
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Extra builtin families (with default parameters) to validate besides
    /// the configured model; empty means the model only.
    #[serde(default)]
    pub families: Vec<String>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_fd_step")]
    pub h: f64,
    #[serde(default = "default_fd_tol")]
    pub tol: f64,
    #[serde(default)]
    pub sample_box: Option<BoxConfig>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            families: Vec::new(),
            n_samples: default_n_samples(),
            h: default_fd_step(),
            tol: default_fd_tol(),
            sample_box: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub u0: Vec<f64>,
    #[serde(default)]
    pub t_span: Option<[f64; 2]>,
    #[serde(default = "default_audit_tol")]
    pub audit_tol: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default)]
    pub dt_init: Option<f64>,
    #[serde(default)]
    pub dt_max: Option<f64>,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            epsilons: Vec::new(),
            u0: Vec::new(),
            t_span: None,
            audit_tol: default_audit_tol(),
            newton_tol: default_newton_tol(),
            dt_init: None,
            dt_max: None,
            max_nodes: default_max_nodes(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchesConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    #[serde(default = "default_box_1d")]
    pub search_box: BoxConfig,
    #[serde(default = "default_arc_step")]
    pub arc_step: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    /// Radii for the Lojasiewicz fits at each catalogued point.
    #[serde(default = "default_loja_radii")]
    pub loja_radii: Vec<f64>,
    #[serde(default = "default_n_dirs")]
    pub n_dirs: usize,
}

impl Default for BranchesConfig {
    fn default() -> Self {
        BranchesConfig {
            t0: 0.0,
            n_starts: default_n_starts(),
            search_box: default_box_1d(),
            arc_step: default_arc_step(),
            newton_tol: default_newton_tol(),
            loja_radii: default_loja_radii(),
            n_dirs: default_n_dirs(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    #[serde(default)]
    pub t_star: f64,
    #[serde(default)]
    pub u_from: Vec<f64>,
    /// Launch direction; when absent the Hessian null vector is used.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_box_1d")]
    pub search_box: BoxConfig,
}

impl Default for JumpConfig {
    fn default() -> Self {
        JumpConfig {
            t_star: 0.0,
            u_from: Vec::new(),
            direction: None,
            delta: None,
            search_box: default_box_1d(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_oracle")]
    pub oracle: String,
    #[serde(default = "default_n_quad")]
    pub n_quad: usize,
    #[serde(default)]
    pub grid_box: Option<BoxConfig>,
    #[serde(default = "default_mesh")]
    pub mesh: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            t: 0.0,
            points: Vec::new(),
            oracle: default_oracle(),
            n_quad: default_n_quad(),
            grid_box: None,
            mesh: default_mesh(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    #[serde(default)]
    pub u0: Vec<f64>,
    #[serde(default)]
    pub t_span: Option<[f64; 2]>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_window")]
    pub window_halfwidth: f64,
    #[serde(default = "default_window")]
    pub exclusion_radius: f64,
    #[serde(default = "default_limit_samples")]
    pub n_samples: usize,
    #[serde(default = "default_ladder_audit")]
    pub audit_tol: f64,
    #[serde(default = "default_ladder_nodes")]
    pub max_nodes: usize,
    #[serde(default = "default_box_1d")]
    pub search_box: BoxConfig,
    #[serde(default = "default_max_jumps")]
    pub max_jumps: usize,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig {
            u0: Vec::new(),
            t_span: None,
            epsilons: Vec::new(),
            window_halfwidth: default_window(),
            exclusion_radius: default_window(),
            n_samples: default_limit_samples(),
            audit_tol: default_ladder_audit(),
            max_nodes: default_ladder_nodes(),
            search_box: default_box_1d(),
            max_jumps: default_max_jumps(),
        }
    }
}

fn default_horizon() -> f64 {
    1.0
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_n_samples() -> usize {
    200
}
fn default_fd_step() -> f64 {
    1e-5
}
fn default_fd_tol() -> f64 {
    1e-6
}
fn default_audit_tol() -> f64 {
    1e-6
}
fn default_newton_tol() -> f64 {
    1e-10
}
fn default_max_nodes() -> usize {
    2_000_000
}
fn default_n_starts() -> usize {
    64
}
fn default_arc_step() -> f64 {
    1e-2
}
fn default_loja_radii() -> Vec<f64> {
    vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2]
}
fn default_n_dirs() -> usize {
    8
}
fn default_oracle() -> String {
    "quadrature_1d".into()
}
fn default_n_quad() -> usize {
    2000
}
fn default_mesh() -> f64 {
    0.01
}
fn default_window() -> f64 {
    0.05
}
fn default_limit_samples() -> usize {
    41
}
fn default_ladder_audit() -> f64 {
    1.2e-5
}
fn default_ladder_nodes() -> usize {
    500_000
}
fn default_max_jumps() -> usize {
    16
}

/// Parse the file, apply `key=value` overrides to the raw tree, then type it.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("config {} is not valid TOML", path.display()))?;
    let mut tree = toml::Value::Table(table);
    for ov in overrides {
        apply_override(&mut tree, ov)?;
    }
    let cfg: RunConfig = tree
        .try_into()
        .context("config does not match the expected schema")?;
    Ok(cfg)
}

/// `a.b.c=value`: value is parsed as a TOML literal, falling back to string.
fn apply_override(tree: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form key=value"))?;
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cur = tree;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| anyhow!("override path `{path}` crosses a non-table"))?;
        if i + 1 == segments.len() {
            table.insert(seg.to_string(), parsed);
            return Ok(());
        }
        cur = table
            .entry(seg.to_string())
            .or_insert(toml::Value::Table(toml::Table::new()));
    }
    unreachable!()
}

impl ModelConfig {
    pub fn build(&self) -> Result<EnergyModel> {
        if self.family == "polynomial" {
            let poly = self
                .polynomial
                .as_ref()
                .ok_or_else(|| anyhow!("family `polynomial` needs a [model.polynomial] table"))?;
            let terms: Vec<(Vec<u32>, f64)> = poly
                .terms
                .iter()
                .map(|t| (t.exponents.clone(), t.coeff))
                .collect();
            let tilt = poly.tilt.as_ref().map(|t| {
                (
                    State::from_vec(t.direction.clone()),
                    t.time_coeffs.clone(),
                )
            });
            return EnergyModel::polynomial("polynomial", poly.dim, terms, tilt, self.horizon)
                .map_err(|e| anyhow!("invalid polynomial model: {e}"));
        }
        let mut params = self.params.clone();
        params.entry("T".into()).or_insert(self.horizon);
        EnergyModel::make_builtin(&self.family, &params)
            .map_err(|e| anyhow!("invalid model: {e}"))
    }
}

pub fn state_from(v: &[f64]) -> State {
    State::from_vec(v.to_vec())
}
