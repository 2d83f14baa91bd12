//! Experiment runner: flat `key = value` configs in, manifest, result JSON and
//! plot-ready CSV out.

pub mod config;
pub mod experiments;
pub mod output;

use config::{Config, Experiment};
use experiments::Outcome;
use serde_json::{json, Map, Value as Json};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// bad experiment name, key or value
    Config(String),
    /// the simulation itself failed
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hqip::Error> for CliError {
    fn from(e: hqip::Error) -> Self {
        use hqip::Error::*;
        match e {
            InvalidParameter(_) | Graph(_) | Program(_) | NonQuadratic(_) | Unnormalized(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// One command-line invocation.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub experiment: String,
    pub config_file: Option<PathBuf>,
    pub set: Vec<String>,
    /// `param=v1,v2,...`
    pub sweep: Option<String>,
    pub out: Option<PathBuf>,
}

/// Paths written and the names of tolerance checks that failed.
#[derive(Debug, Clone)]
pub struct Report {
    pub manifest: PathBuf,
    pub result: PathBuf,
    pub csv: PathBuf,
    pub failed: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.failed.is_empty() {
            0
        } else {
            3
        }
    }
}

pub fn resolve(inv: &Invocation) -> Result<Config, CliError> {
    let experiment: Experiment = inv.experiment.parse()?;
    let mut config = Config::defaults(experiment);
    if let Some(path) = &inv.config_file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.apply_file(&text)?;
    }
    for pair in &inv.set {
        config.set_pair(pair)?;
    }
    Ok(config)
}

fn parse_sweep(config: &Config, spec: &str) -> Result<(String, Vec<Config>), CliError> {
    let (key, list) = spec.split_once('=').ok_or_else(|| CliError::Config(format!("sweep expects param=v1,v2,..., got '{spec}'")))?;
    let key = key.trim();
    if !config.accepts(key) {
        return Err(CliError::Config(format!("cannot sweep '{key}': not a numeric parameter of {}", config.experiment)));
    }
    let runs = list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            let mut c = config.clone();
            c.set(key, v)?;
            Ok(c)
        })
        .collect::<Result<_, CliError>>()?;
    Ok((key.to_string(), runs))
}

fn run_record(outcome: &Outcome) -> Map<String, Json> {
    let mut m = Map::new();
    m.insert("results".into(), Json::Object(outcome.results.clone()));
    m.insert("checks".into(), json!(outcome.checks));
    m
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Runs the invocation and writes `<prefix>.manifest.json`,
/// `<prefix>.result.json` and `<prefix>.csv`.
pub fn execute(inv: &Invocation) -> Result<Report, CliError> {
    let config = resolve(inv)?;
    let e = config.experiment;
    let sweep = inv.sweep.as_deref().map(|s| parse_sweep(&config, s)).transpose()?;
    let prefix = inv.out.clone().unwrap_or_else(|| PathBuf::from(e.name()));
    let mut columns: Vec<String> = experiments::columns(e).iter().map(|s| s.to_string()).collect();

    let params: Map<String, Json> = config.values.keys().map(|k| (k.to_string(), config.json(k))).collect();
    let mut manifest = Map::new();
    manifest.insert("experiment".into(), json!(e.name()));
    manifest.insert("params".into(), Json::Object(params));
    manifest.insert("defaults".into(), json!(config.defaulted));
    manifest.insert("seed".into(), json!(config.int("seed")));
    manifest.insert("versions".into(), json!({ "hqip-core": hqip::VERSION, "hqip-cli": env!("CARGO_PKG_VERSION") }));

    let mut result = Map::new();
    result.insert("experiment".into(), json!(e.name()));
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    match sweep {
        None => {
            let outcome = experiments::run(&config)?;
            manifest.insert("resolved".into(), Json::Object(outcome.resolved.clone()));
            result.extend(run_record(&outcome));
            failed.extend(outcome.checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()));
            rows = outcome.rows;
        }
        Some((key, runs)) => {
            let values: Vec<Json> = runs.iter().map(|c| c.json(&key)).collect();
            manifest.insert("sweep".into(), json!({ "param": key, "values": values }));
            let mut resolved = Vec::new();
            let mut records = Vec::new();
            for (c, v) in runs.iter().zip(&values) {
                let outcome = experiments::run(c)?;
                let x = c.get(&key).num().unwrap_or(f64::NAN);
                rows.extend(outcome.rows.iter().map(|row| std::iter::once(x).chain(row.iter().copied()).collect::<Vec<_>>()));
                failed.extend(outcome.checks.iter().filter(|c| !c.pass).map(|c| format!("{key}={v}: {}", c.name)));
                resolved.push(Json::Object(outcome.resolved.clone()));
                let mut record = run_record(&outcome);
                record.insert("value".into(), v.clone());
                records.push(Json::Object(record));
            }
            manifest.insert("resolved".into(), Json::Array(resolved));
            result.insert("sweep".into(), json!({ "param": key, "values": values }));
            result.insert("runs".into(), Json::Array(records));
            columns.insert(0, key);
        }
    }

    let report = Report { manifest: with_suffix(&prefix, ".manifest.json"), result: with_suffix(&prefix, ".result.json"), csv: with_suffix(&prefix, ".csv"), failed };
    manifest.insert(
        "outputs".into(),
        json!({ "result": report.result.display().to_string(), "csv": report.csv.display().to_string() }),
    );
    write(&report.result, &output::to_json(&result))?;
    write(&report.csv, &output::to_csv(&columns, &rows))?;
    write(&report.manifest, &output::to_json(&manifest))?;
    Ok(report)
}
