use crate::CliError;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Experiments the runner knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    EprCorrelations,
    TeleportCoherent,
    TeleportQubit,
    TeleportDv,
    ClusterNullifiers,
    ClusterGate,
    Squeezer,
    CubicGate,
    ChannelEquivalence,
}

pub const EXPERIMENTS: [Experiment; 9] = [
    Experiment::EprCorrelations,
    Experiment::TeleportCoherent,
    Experiment::TeleportQubit,
    Experiment::TeleportDv,
    Experiment::ClusterNullifiers,
    Experiment::ClusterGate,
    Experiment::Squeezer,
    Experiment::CubicGate,
    Experiment::ChannelEquivalence,
];

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::EprCorrelations => "epr-correlations",
            Self::TeleportCoherent => "teleport-coherent",
            Self::TeleportQubit => "teleport-qubit",
            Self::TeleportDv => "teleport-dv",
            Self::ClusterNullifiers => "cluster-nullifiers",
            Self::ClusterGate => "cluster-gate",
            Self::Squeezer => "squeezer",
            Self::CubicGate => "cubic-gate",
            Self::ChannelEquivalence => "channel-equivalence",
        }
    }

    /// Accepted keys with their defaults.
    pub fn params(self) -> Vec<ParamDef> {
        use Kind::*;
        let p = |key, kind, default| ParamDef { key, kind, default };
        let n = Value::Num;
        const AUTO: Value = Value::Auto;
        match self {
            Self::EprCorrelations => vec![p("r", Real, n(1.0)), p("cutoff", Int, n(16.0)), p("seed", Int, n(0.0))],
            Self::TeleportCoherent => vec![
                p("r", Real, n(1.0)),
                p("g", RealOrAuto, n(1.0)),
                p("alpha.re", Real, n(0.5)),
                p("alpha.im", Real, n(0.0)),
                p("cutoff", Int, n(16.0)),
                p("grid.L", RealOrAuto, AUTO),
                p("grid.points", Int, n(512.0)),
                p("seed", Int, n(0.0)),
            ],
            Self::TeleportQubit => vec![
                p("r", Real, n(1.01)),
                p("g", RealOrAuto, AUTO),
                p("input.population", Real, n(1.0)),
                p("cutoff", Int, n(3.0)),
                p("grid.L", RealOrAuto, AUTO),
                p("grid.points", Int, n(512.0)),
                p("seed", Int, n(0.0)),
            ],
            Self::TeleportDv => vec![p("samples", Int, n(20.0)), p("seed", Int, n(0.0))],
            Self::ClusterNullifiers => vec![p("nodes", Int, n(4.0)), p("r", Real, n(1.0)), p("seed", Int, n(0.0))],
            Self::ClusterGate => vec![
                p("nodes", Int, n(3.0)),
                p("r", Real, n(1.0)),
                p("z", Real, n(0.0)),
                p("shear", Real, n(0.0)),
                p("alpha.re", Real, n(0.3)),
                p("alpha.im", Real, n(0.0)),
                p("seed", Int, n(0.0)),
            ],
            Self::Squeezer => vec![
                p("T", Real, n(0.5)),
                p("r", Real, n(1.0)),
                p("g", RealOrAuto, AUTO),
                p("alpha.re", Real, n(0.5)),
                p("alpha.im", Real, n(0.0)),
                p("seed", Int, n(0.0)),
            ],
            Self::CubicGate => vec![
                p("chi", Real, n(0.05)),
                p("r", Real, n(2.0)),
                p("cutoff", Int, n(20.0)),
                p("grid.points", Int, n(512.0)),
                p("seed", Int, n(0.0)),
            ],
            Self::ChannelEquivalence => vec![
                p("r", Real, n(0.7)),
                p("g", RealOrAuto, AUTO),
                p("cutoff", Int, n(12.0)),
                p("grid.L", RealOrAuto, AUTO),
                p("grid.points", Int, n(512.0)),
                p("seed", Int, n(0.0)),
            ],
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

    fn from_str(s: &str) -> Result<Self, CliError> {
        EXPERIMENTS.iter().copied().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = EXPERIMENTS.iter().map(|e| e.name()).collect();
            CliError::Config(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Real,
    Int,
    RealOrAuto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Auto,
}

impl Value {
    pub fn num(self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(v),
            Value::Auto => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamDef {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Value,
}

impl ParamDef {
    fn parse(&self, text: &str) -> Result<Value, CliError> {
        let text = text.trim();
        if text == "auto" {
            return match self.kind {
                Kind::RealOrAuto => Ok(Value::Auto),
                _ => Err(CliError::Config(format!("'{}' does not accept auto", self.key))),
            };
        }
        let v: f64 = text.parse().map_err(|_| CliError::Config(format!("'{}' expects a number, got '{text}'", self.key)))?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("'{}' must be finite", self.key)));
        }
        if self.kind == Kind::Int && (v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64) {
            return Err(CliError::Config(format!("'{}' expects a non-negative integer, got '{text}'", self.key)));
        }
        Ok(Value::Num(v))
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub experiment: Experiment,
    pub values: BTreeMap<&'static str, Value>,
    /// keys left at their default
    pub defaulted: Vec<&'static str>,
}

impl Config {
    pub fn defaults(experiment: Experiment) -> Self {
        let values = experiment.params().iter().map(|d| (d.key, d.default)).collect();
        let defaulted = experiment.params().iter().map(|d| d.key).collect();
        Self { experiment, values, defaulted }
    }

    fn def(&self, key: &str) -> Result<ParamDef, CliError> {
        self.experiment
            .params()
            .into_iter()
            .find(|d| d.key == key)
            .ok_or_else(|| CliError::Config(format!("unknown key '{key}' for {}", self.experiment)))
    }

    pub fn set(&mut self, key: &str, text: &str) -> Result<(), CliError> {
        let def = self.def(key.trim())?;
        self.values.insert(def.key, def.parse(text)?);
        self.defaulted.retain(|k| *k != def.key);
        Ok(())
    }

    /// Applies `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| CliError::Config(format!("expected key=value, got '{pair}'")))?;
        self.set(k, v)
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line).map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn accepts(&self, key: &str) -> bool {
        self.def(key).is_ok()
    }

    /// `key` as JSON: integers stay integers, `auto` is a string.
    pub fn json(&self, key: &str) -> serde_json::Value {
        match (self.get(key), self.def(key).map(|d| d.kind)) {
            (Value::Auto, _) => "auto".into(),
            (Value::Num(v), Ok(Kind::Int)) => (v as u64).into(),
            (Value::Num(v), _) => v.into(),
        }
    }

    pub fn get(&self, key: &str) -> Value {
        self.values[key]
    }

    pub fn real(&self, key: &str) -> f64 {
        self.get(key).num().expect("numeric parameter")
    }

    pub fn int(&self, key: &str) -> usize {
        self.real(key) as usize
    }
}
