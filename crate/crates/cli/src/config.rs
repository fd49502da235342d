use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cavity_soliton::dissipation::CavityParams;
use cavity_soliton::{Error as CoreError, SimulationParams, Warning};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration, overrides or parameters (exit code 2).
    #[error("{0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error(transparent)]
    Core(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NumericalAbort { .. } => CliError::Numerical(e.to_string()),
            CoreError::InvalidParam { .. }
            | CoreError::StepGuard { .. }
            | CoreError::GridTooSmall { .. }
            | CoreError::NotGridEnsemble
            | CoreError::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig2,
    Fig3,
    Fig4,
    Detect,
    Dissipation,
    Dispersion,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Fig4,
        Experiment::Detect,
        Experiment::Dissipation,
        Experiment::Dispersion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Detect => "detect",
            Experiment::Dissipation => "dissipation",
            Experiment::Dispersion => "dispersion",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
            CliError::Config(format!(
                "unknown experiment `{s}`; expected one of {}",
                names.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Options {
    /// Spacing of recorded samples, τ.
    pub sample_interval: f64,
    /// Position points in the exported heat maps.
    pub heatmap_points: usize,
    /// Position points used for the width fits.
    pub fit_points: usize,
}

impl Default for Fig2Options {
    fn default() -> Self {
        Self {
            sample_interval: 0.5,
            heatmap_points: 512,
            fit_points: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Options {
    pub chi_min: f64,
    pub chi_max: f64,
    pub chi_points: usize,
    pub thetas: Vec<f64>,
}

impl Default for Fig3Options {
    fn default() -> Self {
        Self {
            chi_min: -4.0,
            chi_max: 0.0,
            chi_points: 41,
            thetas: (1..8).map(|k| k as f64 * PI / 8.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig4Options {
    pub chi_values: Vec<f64>,
    /// Momentum nodes per axis.
    pub n_axis: usize,
    /// Position points per axis.
    pub grid_points: usize,
    /// τ
    pub t_final: f64,
    /// τ
    pub dt: f64,
    /// τ
    pub sample_interval: f64,
}

impl Default for Fig4Options {
    fn default() -> Self {
        Self {
            chi_values: vec![-4.0, -3.0, -2.5, -2.0, -1.5, -1.0, 0.0],
            n_axis: 41,
            grid_points: 128,
            t_final: 100.0,
            dt: 5e-3,
            sample_interval: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectOptions {
    /// Readout spacing, τ.
    pub sample_interval: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { sample_interval: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DissipationOptions {
    pub n_atoms: u64,
    /// Rate per pump in the balanced run; the unbalanced run puts 2Γ on pump 2.
    pub gamma: f64,
    /// Derive the two rates from cavity parameters instead of `gamma`.
    pub cavity: Option<CavityParams>,
    /// Initial polar angle of the collective spin.
    pub theta: f64,
    /// τ
    pub t_final: f64,
    /// τ
    pub dt: f64,
    /// Spacing of exported rows, τ.
    pub sample_interval: f64,
}

impl Default for DissipationOptions {
    fn default() -> Self {
        Self {
            n_atoms: 1000,
            gamma: 0.02,
            cavity: None,
            theta: PI / 3.0,
            t_final: 30.0,
            dt: 1e-4,
            sample_interval: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionOptions {
    /// Couplings to tabulate; empty means `params.chiN`.
    pub chi_values: Vec<f64>,
    /// Momentum range ±p_max in ħk.
    pub p_max: f64,
    pub points: usize,
}

impl Default for DispersionOptions {
    fn default() -> Self {
        Self {
            chi_values: Vec::new(),
            p_max: 0.5,
            points: 201,
        }
    }
}

/// On-disk configuration. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub output_dir: Option<PathBuf>,
    pub params: SimulationParams,
    pub fig2: Fig2Options,
    pub fig3: Fig3Options,
    pub fig4: Fig4Options,
    pub detect: DetectOptions,
    pub dissipation: DissipationOptions,
    pub dispersion: DispersionOptions,
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub name: Experiment,
    pub params: SimulationParams,
    pub overrides: Vec<String>,
    pub output_dir: PathBuf,
    pub config: ConfigFile,
    #[serde(skip)]
    pub warnings: Vec<Warning>,
}

impl ExperimentSpec {
    /// Directory holding this experiment's bundle.
    pub fn bundle_dir(&self) -> PathBuf {
        self.output_dir.join(self.name.name())
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub experiment: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// `key=value` pairs; keys are dotted paths such as `sigma_p` or `fig3.chi_points`.
    pub set: Vec<String>,
}

enum Format {
    Toml,
    Json,
}

fn format_of(path: &Path) -> Format {
    if path.extension().is_some_and(|e| e == "json") {
        Format::Json
    } else {
        Format::Toml
    }
}

/// 1-based line of the first `key = …` / `"key": …` assignment in `text`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let t = l.trim_start().trim_start_matches('"');
            t.strip_prefix(key)
                .map(|rest| rest.trim_start_matches('"').trim_start())
                .is_some_and(|rest| rest.starts_with('=') || rest.starts_with(':'))
        })
        .map(|i| i + 1)
}

fn parse_document(text: &str, format: &Format, origin: &str) -> Result<serde_json::Value, CliError> {
    let value: serde_json::Value = match format {
        Format::Toml => {
            let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
            serde_json::to_value(table).map_err(|e| CliError::Config(format!("{origin}: {e}")))?
        }
        Format::Json => serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?,
    };
    if !value.is_object() {
        return Err(CliError::Config(format!("{origin}: top level must be a table")));
    }
    // A manifest carries its resolved configuration under `spec.config`.
    if let Some(config) = value.get("spec").and_then(|s| s.get("config")) {
        return Ok(config.clone());
    }
    Ok(value)
}

fn key_location(text: &str, key: &str, origin: &str) -> String {
    match line_of_key(text, key) {
        Some(line) => format!("{origin}:{line}"),
        None => origin.to_string(),
    }
}

/// Parses `value` as a TOML scalar or array, falling back to a bare string.
fn parse_override_value(raw: &str) -> serde_json::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("key present")).unwrap_or(serde_json::Value::Null),
        Err(_) => serde_json::Value::String(raw.to_string()),
    }
}

fn apply_override(doc: &mut serde_json::Value, template: &serde_json::Value, entry: &str) -> Result<(), CliError> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{entry}` is not of the form key=value")))?;
    let key = key.trim();
    let mut path: Vec<&str> = key.split('.').collect();
    // Bare keys address the parameter table.
    if path.len() == 1 && template.get(path[0]).is_none() {
        path.insert(0, "params");
    }
    let mut probe = template;
    for part in &path {
        probe = probe
            .get(part)
            .ok_or_else(|| CliError::Config(format!("override `{key}` does not name an existing key")))?;
    }
    let mut slot = doc;
    for part in &path[..path.len() - 1] {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: not a table")))?;
        slot = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let mut value = parse_override_value(raw.trim());
    // Integers given for float keys stay floats.
    if probe.is_f64() {
        if let Some(v) = value.as_i64() {
            value = serde_json::Value::from(v as f64);
        }
    }
    slot.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override `{key}`: not a table")))?
        .insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

/// Reads, merges and validates a configuration into a runnable spec.
///
/// `path` may be a TOML or JSON config, or a manifest written by a previous
/// run. Without a path the defaults are used.
pub fn load_spec(path: Option<&Path>, cli: &CliOverrides) -> Result<ExperimentSpec, CliError> {
    let (text, origin, format) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                context: format!("reading {}", p.display()),
                source,
            })?;
            (text, p.display().to_string(), format_of(p))
        }
        None => (String::new(), "<defaults>".to_string(), Format::Toml),
    };
    let mut doc = if text.trim().is_empty() {
        serde_json::Value::Object(Default::default())
    } else {
        parse_document(&text, &format, &origin)?
    };
    let template = serde_json::to_value(ConfigFile {
        experiment: Some(Experiment::Fig2),
        output_dir: Some(PathBuf::new()),
        ..ConfigFile::default()
    })
    .expect("defaults serialize");
    for entry in &cli.set {
        apply_override(&mut doc, &template, entry)?;
    }
    let mut config: ConfigFile = serde_json::from_value(doc).map_err(|e| {
        // The TOML parser reports line and column directly when the file alone is at fault.
        if matches!(format, Format::Toml) && !text.trim().is_empty() {
            if let Err(te) = toml::from_str::<ConfigFile>(&text) {
                return CliError::Config(format!("{origin}: {te}"));
            }
        }
        let msg = e.to_string();
        let loc = msg
            .split('`')
            .nth(1)
            .map_or(origin.clone(), |field| key_location(&text, field, &origin));
        CliError::Config(format!("{loc}: {msg}"))
    })?;

    if let Some(seed) = cli.seed {
        config.params.seed = seed;
    }
    let name = match (&cli.experiment, config.experiment) {
        (Some(s), _) => s.parse()?,
        (None, Some(e)) => e,
        (None, None) => {
            return Err(CliError::Config(
                "no experiment given; pass --experiment or set `experiment` in the config".into(),
            ))
        }
    };
    config.experiment = Some(name);
    if let Some(dir) = &cli.output_dir {
        config.output_dir = Some(dir.clone());
    }
    let output_dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    config.output_dir = Some(output_dir.clone());

    let warnings = config.params.validate().map_err(|e| match &e {
        CoreError::InvalidParam { field, .. } => {
            CliError::Config(format!("{}: {e}", key_location(&text, field, &origin)))
        }
        _ => CliError::Config(format!("{origin}: {e}")),
    })?;
    validate_options(&config)?;
    Ok(ExperimentSpec {
        name,
        params: config.params.clone(),
        overrides: cli.set.clone(),
        output_dir,
        config,
        warnings,
    })
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("invalid `{field}`: must be > 0, got {v}")))
    }
}

fn validate_options(c: &ConfigFile) -> Result<(), CliError> {
    positive("fig2.sample_interval", c.fig2.sample_interval)?;
    if c.fig2.heatmap_points < 2 || c.fig2.fit_points < 16 {
        return Err(CliError::Config(
            "fig2 grids need at least 2 (heatmap) and 16 (fit) points".into(),
        ));
    }
    if c.fig3.chi_points < 2 || !(c.fig3.chi_min < c.fig3.chi_max) {
        return Err(CliError::Config(
            "fig3 needs chi_points >= 2 and chi_min < chi_max".into(),
        ));
    }
    if c.fig3.thetas.is_empty() || c.fig3.thetas.iter().any(|t| !(0.0..=PI).contains(t)) {
        return Err(CliError::Config(
            "fig3.thetas must be non-empty and lie in [0, pi]".into(),
        ));
    }
    if c.fig4.chi_values.is_empty() || c.fig4.n_axis < 3 || c.fig4.n_axis.is_multiple_of(2) {
        return Err(CliError::Config(
            "fig4 needs at least one chi value and an odd n_axis >= 3".into(),
        ));
    }
    positive("fig4.t_final", c.fig4.t_final)?;
    positive("fig4.dt", c.fig4.dt)?;
    positive("fig4.sample_interval", c.fig4.sample_interval)?;
    positive("detect.sample_interval", c.detect.sample_interval)?;
    if c.dissipation.n_atoms == 0 {
        return Err(CliError::Config("dissipation.n_atoms must be positive".into()));
    }
    if !(c.dissipation.gamma.is_finite() && c.dissipation.gamma >= 0.0) {
        return Err(CliError::Config("dissipation.gamma must be >= 0".into()));
    }
    if let Some(cav) = &c.dissipation.cavity {
        cav.validate()?;
    }
    positive("dissipation.t_final", c.dissipation.t_final)?;
    positive("dissipation.dt", c.dissipation.dt)?;
    positive("dissipation.sample_interval", c.dissipation.sample_interval)?;
    positive("dispersion.p_max", c.dispersion.p_max)?;
    if c.dispersion.points < 5 {
        return Err(CliError::Config("dispersion.points must be >= 5".into()));
    }
    Ok(())
}
