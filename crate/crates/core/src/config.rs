//! Run configuration: built-in defaults, an optional TOML file and
//! command-line overrides, resolved in that order.
//!
//! ```toml
//! [params]
//! g1d = -1.0
//! mu = -0.5
//!
//! [numerics]
//! periods = 5100
//! ```
//!
//! Every resolved value remembers where it came from and what it replaced,
//! so the run manifest can echo the whole resolution.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chaos::Thresholds;
use crate::exact::FamilySign;
use crate::experiments::{builtin_case, RunSettings};
use crate::model::{constants, to_dimensionless, LatticeParams, PhysicalInputs};
use crate::modulus::{IntegrationOptions, OrbitParams};
use crate::ode::Tolerances;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Exact,
    Poincare,
    Lyapunov,
    Evolve,
    Case,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Exact => "exact",
            Command::Poincare => "poincare",
            Command::Lyapunov => "lyapunov",
            Command::Evolve => "evolve",
            Command::Case => "case",
            Command::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    Str,
    Bool,
}

/// Every key the file and flags may set, with its type.
const KEYS: &[(&str, Kind)] = &[
    ("params.g1d", Kind::Float),
    ("params.v0", Kind::Float),
    ("params.mu", Kind::Float),
    ("params.n_prime", Kind::Float),
    ("params.j0", Kind::Float),
    ("params.alpha", Kind::Float),
    ("params.angle", Kind::Float),
    ("params.sign", Kind::Str),
    ("params.r0", Kind::Float),
    ("params.r_xi0", Kind::Float),
    ("physical.mass_amu", Kind::Float),
    ("physical.k_l", Kind::Float),
    ("physical.acceleration", Kind::Float),
    ("physical.depth", Kind::Float),
    ("physical.scattering_length", Kind::Float),
    ("physical.radial_length", Kind::Float),
    ("numerics.tol_rel", Kind::Float),
    ("numerics.tol_abs", Kind::Float),
    ("numerics.periods", Kind::Int),
    ("numerics.drop", Kind::Int),
    ("numerics.grid", Kind::Int),
    ("numerics.lattice_periods", Kind::Int),
    ("numerics.dt", Kind::Float),
    ("numerics.t_end", Kind::Float),
    ("numerics.snapshots", Kind::Int),
    ("numerics.r_escape", Kind::Float),
    ("numerics.xi0", Kind::Float),
    ("run.seed", Kind::Int),
    ("run.case_id", Kind::Int),
    ("run.out", Kind::Str),
    ("run.orbits", Kind::Int),
    ("run.svg", Kind::Bool),
    ("run.source", Kind::Str),
    ("thresholds.lambda_hi", Kind::Float),
    ("thresholds.lambda_lo", Kind::Float),
    ("thresholds.occupancy_hi", Kind::Float),
    ("thresholds.occupancy_lo", Kind::Float),
    ("thresholds.min_samples", Kind::Int),
    ("thresholds.grid_resolution", Kind::Int),
    ("sweep.axis1", Kind::Str),
    ("sweep.axis2", Kind::Str),
    ("sweep.budget", Kind::Int),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, t)| *t)
}

/// Closest known key by edit distance, if any is reasonably close.
fn suggest(key: &str) -> Option<String> {
    KEYS.iter()
        .map(|(k, _)| (strsim::levenshtein(key, k), *k))
        .filter(|(d, _)| *d <= 4)
        .min()
        .map(|(_, k)| k.to_string())
}

fn coerce(key: &str, value: Value) -> std::result::Result<Value, String> {
    let kind = kind_of(key).expect("key checked before coercion");
    match (kind, value) {
        (Kind::Float, Value::Float(x)) => Ok(Value::Float(x)),
        (Kind::Float, Value::Int(i)) => Ok(Value::Float(i as f64)),
        (Kind::Int, Value::Int(i)) => Ok(Value::Int(i)),
        (Kind::Str, Value::Str(s)) => Ok(Value::Str(s)),
        (Kind::Bool, Value::Bool(b)) => Ok(Value::Bool(b)),
        (kind, v) => Err(format!("{key} expects {kind:?}, got {v}").to_lowercase()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overridden {
    pub source: Source,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub value: Value,
    pub source: Source,
    /// Lower-precedence values this one replaced.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub overridden: Vec<Overridden>,
}

fn default_values(command: Command) -> Vec<(&'static str, Value)> {
    use Value::*;
    let mut v = vec![
        ("params.g1d", Float(-1.0)),
        ("params.v0", Float(0.05)),
        ("params.j0", Float(0.01)),
        ("params.alpha", Float(0.0)),
        ("params.angle", Float(0.0)),
        ("params.sign", Str("+".into())),
        ("numerics.tol_rel", Float(1e-10)),
        ("numerics.tol_abs", Float(1e-12)),
        ("numerics.periods", Int(5100)),
        ("numerics.drop", Int(100)),
        ("numerics.lattice_periods", Int(crate::gpe::DEFAULT_LATTICE_PERIODS as i64)),
        ("numerics.t_end", Float(10.0)),
        ("numerics.snapshots", Int(100)),
        ("numerics.r_escape", Float(1e3)),
        ("numerics.xi0", Float(0.0)),
        ("run.seed", Int(0)),
        ("run.out", Str(".".into())),
        ("run.orbits", Int(10)),
        ("run.svg", Bool(false)),
        ("run.source", Str("modulus".into())),
        ("sweep.budget", Int(crate::experiments::DEFAULT_SWEEP_BUDGET as i64)),
    ];
    let t = Thresholds::default();
    v.extend([
        ("thresholds.lambda_hi", Float(t.lambda_hi)),
        ("thresholds.lambda_lo", Float(t.lambda_lo)),
        ("thresholds.occupancy_hi", Float(t.occupancy_hi)),
        ("thresholds.occupancy_lo", Float(t.occupancy_lo)),
        ("thresholds.min_samples", Int(t.min_samples as i64)),
        ("thresholds.grid_resolution", Int(t.grid_resolution as i64)),
    ]);
    match command {
        // The exact family is parametrized by N'; the orbit commands by mu.
        Command::Exact => v.push(("params.n_prime", Float(1.0))),
        _ => v.push(("params.mu", Float(-0.5))),
    }
    let grid = match command {
        Command::Exact => 512,
        _ => crate::gpe::DEFAULT_POINTS as i64,
    };
    v.push(("numerics.grid", Int(grid)));
    v
}

/// A `key = value` assignment read from a file, with its line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`; 0 if it cannot be located.
fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    0
}

/// Parse a configuration file body into flat `section.key` assignments.
pub fn parse_config_text(text: &str) -> Result<Vec<Assignment>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map_or(0, |s| line_of_offset(text, s.start));
        let key = text
            .lines()
            .nth(line.saturating_sub(1))
            .and_then(|l| l.split_once('='))
            .map(|(k, _)| k.trim().to_string());
        let message = match key {
            Some(k) => format!("key '{k}': {}", e.message()),
            None => e.message().to_string(),
        };
        Error::Config { line, message }
    })?;
    let mut out = Vec::new();
    for (section, body) in table {
        let toml::Value::Table(body) = body else {
            let key = section.clone();
            return Err(Error::UnknownKey {
                suggestion: suggest(&key),
                key,
            });
        };
        for (k, v) in body {
            let full = format!("{section}.{k}");
            let line = locate(text, &section, &k);
            if kind_of(&full).is_none() {
                return Err(Error::UnknownKey {
                    suggestion: suggest(&full),
                    key: full,
                });
            }
            let value = match v {
                toml::Value::Float(x) => Value::Float(x),
                toml::Value::Integer(i) => Value::Int(i),
                toml::Value::String(s) => Value::Str(s),
                toml::Value::Boolean(b) => Value::Bool(b),
                other => {
                    return Err(Error::Config {
                        line,
                        message: format!("{full}: unsupported value {other}"),
                    })
                }
            };
            let value = coerce(&full, value).map_err(|message| Error::Config { line, message })?;
            out.push(Assignment { key: full, value, line });
        }
    }
    Ok(out)
}

pub fn parse_config_file(path: &Path) -> Result<Vec<Assignment>> {
    parse_config_text(&std::fs::read_to_string(path)?)
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub config_file: Option<PathBuf>,
    pub values: BTreeMap<String, Resolved>,
}

impl RunConfig {
    /// Resolve defaults, then `file`, then `flags`.
    pub fn resolve(command: Command, file: Option<&Path>, flags: &[(String, Value)]) -> Result<Self> {
        let mut values: BTreeMap<String, Resolved> = BTreeMap::new();
        let mut set = |key: &str, value: Value, source: Source| {
            let entry = values.entry(key.to_string());
            match entry {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(Resolved {
                        value,
                        source,
                        overridden: Vec::new(),
                    });
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let r = e.get_mut();
                    let old = std::mem::replace(&mut r.value, value);
                    r.overridden.push(Overridden { source: r.source, value: old });
                    r.source = source;
                }
            }
        };
        for (k, v) in default_values(command) {
            set(k, v, Source::Default);
        }
        if command == Command::Case {
            // Case parameters come from the built-in table unless overridden.
            let id = flags
                .iter()
                .find(|(k, _)| k == "run.case_id")
                .map(|(_, v)| v.clone())
                .or_else(|| {
                    file.and_then(|p| parse_config_file(p).ok())
                        .and_then(|a| a.into_iter().find(|a| a.key == "run.case_id").map(|a| a.value))
                });
            if let Some(Value::Int(id)) = id {
                if let Ok(spec) = builtin_case(id.clamp(0, u32::MAX as i64) as u32) {
                    let p = spec.sets[0];
                    set("params.g1d", Value::Float(p.g1d), Source::Default);
                    set("params.mu", Value::Float(p.mu), Source::Default);
                    set("params.j0", Value::Float(p.j0), Source::Default);
                    set("params.v0", Value::Float(p.v0), Source::Default);
                }
            }
        }
        let mut explicit: Vec<String> = Vec::new();
        if let Some(path) = file {
            for a in parse_config_file(path)? {
                explicit.push(a.key.clone());
                set(&a.key, a.value, Source::File);
            }
        }
        for (k, v) in flags {
            if kind_of(k).is_none() {
                return Err(Error::UnknownKey {
                    suggestion: suggest(k),
                    key: k.clone(),
                });
            }
            let v = coerce(k, v.clone()).map_err(|message| Error::Config { line: 0, message })?;
            explicit.push(k.clone());
            set(k, v, Source::Flag);
        }
        let physical = explicit.iter().any(|k| k.starts_with("physical."));
        let clash: Vec<&String> = explicit
            .iter()
            .filter(|k| ["params.g1d", "params.v0", "params.alpha"].contains(&k.as_str()))
            .collect();
        if physical && !clash.is_empty() {
            return Err(Error::Conflict(format!(
                "physical inputs determine g1d, V0 and alpha; remove {} or the [physical] section",
                clash.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        let explicit_mu = explicit.iter().any(|k| k == "params.mu");
        let explicit_n = explicit.iter().any(|k| k == "params.n_prime");
        // An explicit mu or N' wins over the other one's default.
        if explicit_mu && !explicit_n && values.get("params.n_prime").is_some_and(|r| r.source == Source::Default) {
            values.remove("params.n_prime");
        }
        if explicit_n && !explicit_mu && values.get("params.mu").is_some_and(|r| r.source == Source::Default) {
            values.remove("params.mu");
        }
        let cfg = Self {
            command,
            config_file: file.map(Path::to_path_buf),
            values,
        };
        cfg.lattice_params()?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key).map(|r| &r.value)
    }

    pub fn source(&self, key: &str) -> Option<Source> {
        self.values.get(key).map(|r| r.source)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.opt_f64(key)?
            .ok_or_else(|| Error::InvalidInput(format!("{key} is not set")))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Int(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(Error::InvalidInput(format!("{key} is not a number: {v}"))),
        }
    }

    pub fn opt_int(&self, key: &str) -> Result<Option<i64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Int(i)) => Ok(Some(*i)),
            Some(v) => Err(Error::InvalidInput(format!("{key} is not an integer: {v}"))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let i = self
            .opt_int(key)?
            .ok_or_else(|| Error::InvalidInput(format!("{key} is not set")))?;
        usize::try_from(i).map_err(|_| Error::InvalidInput(format!("{key} must be non-negative, got {i}")))
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        match self.get(key) {
            Some(Value::Str(s)) => Some(s),
            _ => None,
        }
    }

    pub fn bool(&self, key: &str) -> bool {
        matches!(self.get(key), Some(Value::Bool(true)))
    }

    pub fn seed(&self) -> Result<u64> {
        let s = self.opt_int("run.seed")?.unwrap_or(0);
        u64::try_from(s).map_err(|_| Error::InvalidInput(format!("seed must be non-negative, got {s}")))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.str("run.out").unwrap_or("."))
    }

    pub fn physical_inputs(&self) -> Result<Option<PhysicalInputs>> {
        if !self.values.keys().any(|k| k.starts_with("physical.")) {
            return Ok(None);
        }
        let get = |k: &str, d: f64| -> Result<f64> { Ok(self.opt_f64(&format!("physical.{k}"))?.unwrap_or(d)) };
        let inputs = PhysicalInputs {
            atomic_mass: get("mass_amu", constants::RB87_MASS_AMU)? * constants::ATOMIC_MASS_UNIT,
            wave_number_kl: self.f64("physical.k_l")?,
            acceleration: get("acceleration", 0.0)?,
            potential_depth: get("depth", 0.0)?,
            scattering_length: get("scattering_length", 0.0)?,
            radial_length: self.f64("physical.radial_length")?,
        };
        inputs.validate()?;
        Ok(Some(inputs))
    }

    pub fn lattice_params(&self) -> Result<LatticeParams> {
        let j0 = self.f64("params.j0")?;
        let mu = self.opt_f64("params.mu")?;
        let n_prime = self.opt_f64("params.n_prime")?;
        let (v0, g1d, alpha) = match self.physical_inputs()? {
            Some(inputs) => {
                let p = to_dimensionless(&inputs)?;
                (p.signed_v0(), p.g1d, p.alpha)
            }
            None => (self.f64("params.v0")?, self.f64("params.g1d")?, self.f64("params.alpha")?),
        };
        LatticeParams::from_optional(v0, g1d, alpha, j0, mu, n_prime)
    }

    pub fn orbit_params(&self) -> Result<OrbitParams> {
        OrbitParams::from_lattice(&self.lattice_params()?)
    }

    pub fn family_sign(&self) -> Result<FamilySign> {
        match self.str("params.sign").unwrap_or("+") {
            "+" | "plus" => Ok(FamilySign::Plus),
            "-" | "minus" => Ok(FamilySign::Minus),
            s => Err(Error::InvalidInput(format!("params.sign must be '+' or '-', got {s:?}"))),
        }
    }

    pub fn integration(&self) -> Result<IntegrationOptions> {
        let o = IntegrationOptions {
            tol: Tolerances {
                rel: self.f64("numerics.tol_rel")?,
                abs: self.f64("numerics.tol_abs")?,
            },
            r_escape: self.f64("numerics.r_escape")?,
            xi0: self.f64("numerics.xi0")?,
            ..Default::default()
        };
        o.validate()?;
        Ok(o)
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Ok(Thresholds {
            lambda_hi: self.f64("thresholds.lambda_hi")?,
            lambda_lo: self.f64("thresholds.lambda_lo")?,
            occupancy_hi: self.f64("thresholds.occupancy_hi")?,
            occupancy_lo: self.f64("thresholds.occupancy_lo")?,
            min_samples: self.usize("thresholds.min_samples")?,
            grid_resolution: self.usize("thresholds.grid_resolution")?,
        })
    }

    pub fn run_settings(&self) -> Result<RunSettings> {
        Ok(RunSettings {
            n_periods: self.usize("numerics.periods")?,
            drop: self.usize("numerics.drop")?,
            integration: self.integration()?,
            thresholds: self.thresholds()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults_need_no_file() {
        let c = RunConfig::resolve(Command::Poincare, None, &[]).unwrap();
        let p = c.orbit_params().unwrap();
        assert_eq!((p.g1d, p.mu, p.j0, p.v0), (-1.0, -0.5, 0.01, 0.05));
        assert_eq!(c.run_settings().unwrap(), RunSettings::default());
        assert_eq!(c.seed().unwrap(), 0);
    }

    #[test]
    fn case_command_takes_builtin_parameters() {
        let flags = [("run.case_id".to_string(), Value::Int(6))];
        let c = RunConfig::resolve(Command::Case, None, &flags).unwrap();
        let p = c.orbit_params().unwrap();
        assert_eq!((p.g1d, p.mu, p.j0, p.v0), (-1.0, -0.5, 0.16, 5.0));
    }

    #[test]
    fn flags_override_file_and_both_are_recorded() {
        let f = file("[params]\nv0 = 0.2\n\n[numerics]\nperiods = 300\n");
        let flags = [("params.v0".to_string(), Value::Float(0.5))];
        let c = RunConfig::resolve(Command::Poincare, Some(f.path()), &flags).unwrap();
        let r = &c.values["params.v0"];
        assert_eq!(r.value, Value::Float(0.5));
        assert_eq!(r.source, Source::Flag);
        assert_eq!(
            r.overridden,
            vec![
                Overridden { source: Source::Default, value: Value::Float(0.05) },
                Overridden { source: Source::File, value: Value::Float(0.2) },
            ]
        );
        assert_eq!(c.usize("numerics.periods").unwrap(), 300);
        assert_eq!(c.source("numerics.periods"), Some(Source::File));
    }

    #[test]
    fn unknown_keys_get_a_suggestion() {
        let err = parse_config_text("[params]\nvo = 0.2\n").unwrap_err();
        match err {
            Error::UnknownKey { key, suggestion } => {
                assert_eq!(key, "params.vo");
                assert_eq!(suggestion.as_deref(), Some("params.v0"));
            }
            e => panic!("{e:?}"),
        }
        assert!(err_text("[numerics]\nperiod = 10\n").contains("numerics.periods"));
    }

    fn err_text(s: &str) -> String {
        parse_config_text(s).unwrap_err().to_string()
    }

    #[test]
    fn malformed_numbers_name_line_and_key() {
        match parse_config_text("[params]\ng1d = -1\nv0 = 0.2.3\n").unwrap_err() {
            Error::Config { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("v0"), "{message}");
            }
            e => panic!("{e:?}"),
        }
        match parse_config_text("[numerics]\n\nperiods = \"many\"\n").unwrap_err() {
            Error::Config { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("numerics.periods"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn physical_and_dimensionless_inputs_conflict() {
        let f = file("[physical]\nk_l = 8.0e6\nradial_length = 1e-6\n[params]\nv0 = 0.3\n");
        assert!(matches!(
            RunConfig::resolve(Command::Poincare, Some(f.path()), &[]),
            Err(Error::Conflict(_))
        ));
        // Physical inputs alone are fine and set g1d = 0 when a_s = 0.
        let f = file("[physical]\nk_l = 8.0e6\nradial_length = 1e-6\ndepth = 1e-30\n");
        let c = RunConfig::resolve(Command::Poincare, Some(f.path()), &[]).unwrap();
        assert_eq!(c.lattice_params().unwrap().g1d, 0.0);
    }

    #[test]
    fn explicit_mu_and_n_prime_must_agree() {
        let flags = [
            ("params.mu".to_string(), Value::Float(0.0)),
            ("params.n_prime".to_string(), Value::Float(3.0)),
        ];
        assert!(matches!(
            RunConfig::resolve(Command::Exact, None, &flags),
            Err(Error::Conflict(_))
        ));
        let flags = [("params.mu".to_string(), Value::Float(-0.5))];
        let c = RunConfig::resolve(Command::Exact, None, &flags).unwrap();
        assert_eq!(c.lattice_params().unwrap().n_prime, Some(1.5));
    }
}
