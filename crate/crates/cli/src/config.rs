//! Run configuration: one TOML document drives every subcommand, so a
//! reproduction recipe is a single checked-in file. Dotted-path `--set`
//! overrides patch the parsed document before validation; unknown keys are
//! rejected everywhere, and every command option has a default so partial
//! sections stay valid.

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

use hopfstream::ModelParams;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub command: CommandConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CommandConfig {
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default)]
    pub hopf: HopfConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub normal_form: NormalFormConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_dr")]
    pub dr: f64,
}

fn default_r_max() -> f64 {
    0.5
}

fn default_dr() -> f64 {
    0.01
}

impl Default for SteadyConfig {
    fn default() -> Self {
        SteadyConfig {
            r_max: default_r_max(),
            dr: default_dr(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfConfig {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    3
}

impl Default for HopfConfig {
    fn default() -> Self {
        HopfConfig {
            n_max: default_n_max(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Delays to scan; `0` uses the delay-free matrix.
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    #[serde(default = "default_m_colloc")]
    pub m_colloc: usize,
    #[serde(default = "default_k_eig")]
    pub k_eigenvalues: usize,
}

fn default_taus() -> Vec<f64> {
    vec![0.0]
}

fn default_m_colloc() -> usize {
    24
}

fn default_k_eig() -> usize {
    12
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            taus: default_taus(),
            m_colloc: default_m_colloc(),
            k_eigenvalues: default_k_eig(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NormalFormConfig {
    /// Ladder index of the delay `tau_n` to expand at.
    #[serde(default)]
    pub n_index: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_m_delay")]
    pub m_delay: usize,
    /// Relative amplitude of the perturbation applied to the steady state.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// "cosine" (deterministic, the default) or "random" (seeded, for
    /// exploratory runs only).
    #[serde(default = "default_history")]
    pub history: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_history() -> String {
    "cosine".into()
}

fn default_t_end() -> f64 {
    500.0
}

fn default_m_delay() -> usize {
    256
}

fn default_perturbation() -> f64 {
    0.01
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            t_end: default_t_end(),
            m_delay: default_m_delay(),
            perturbation: default_perturbation(),
            history: default_history(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// "monotonicity" scans h0 derivative signs; "tau0" computes the first
    /// Hopf delay per cell.
    #[serde(default = "default_sweep_mode")]
    pub mode: String,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<f64>,
}

fn default_sweep_mode() -> String {
    "monotonicity".into()
}

fn default_alphas() -> Vec<f64> {
    (0..21).map(|k| -2.0 + 4.0 * k as f64 / 20.0).collect()
}

fn default_lengths() -> Vec<f64> {
    (0..21).map(|k| 0.5 + 2.5 * k as f64 / 20.0).collect()
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            mode: default_sweep_mode(),
            alphas: default_alphas(),
            lengths: default_lengths(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    /// "csv" or "json".
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_format() -> String {
    "csv".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
            format: default_format(),
            snapshot_times: Vec::new(),
        }
    }
}

/// Parse one `key=value` override into the TOML document.
fn apply_override(doc: &mut toml::Value, spec: &str) -> anyhow::Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override '{spec}' is not of the form key.path=value"))?;
    // Interpret the value as a TOML literal; fall back to a string.
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(table) => table["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("'{part}' in '{path}' is not a table"))?
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| anyhow!("'{path}' does not address a table entry"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Load, patch, and validate a run configuration.
pub fn load(path: &str, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {path}"))?;
    let mut doc = toml::Value::Table(table);
    for spec in overrides {
        apply_override(&mut doc, spec)?;
    }
    let config: RunConfig = doc
        .try_into()
        .map_err(|e| anyhow!("invalid config {path}: {e}"))?;
    if config.output.format != "csv" && config.output.format != "json" {
        bail!(
            "output.format must be 'csv' or 'json', got '{}'",
            config.output.format
        );
    }
    if let Some(model) = &config.model {
        model
            .validate()
            .map_err(|e| anyhow!("invalid [model]: {e}"))?;
    }
    Ok(config)
}

/// The model section, required by every computing subcommand.
pub fn require_model(config: &RunConfig) -> anyhow::Result<ModelParams> {
    config
        .model
        .clone()
        .ok_or_else(|| anyhow!("config is missing the [model] section"))
}
