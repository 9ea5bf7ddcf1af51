//! TOML experiment configs.
//!
//! ```toml
//! [system]
//! k = 250
//! horizon = 50
//! A = 1.1            # 1×1 shorthand
//! B = [[0.3]]        # matrix, one inner array per row
//! C = 0.2
//! P = 0.4
//! Q = 0.8            # P and Q per-t lists have horizon + 1 entries
//! R = 1.2            # A, B, C and R per-t lists have horizon entries
//!
//! [disturbance]
//! support = [7.5, -2.5]        # scalar atoms, or [[w1, w2], ...] for vectors
//! probs = [0.25, 0.75]
//!
//! [experiment]
//! lambda_grid = [0.0, 1e-3, 1e-2, 1e-1, 1.0]
//! n_runs = 10000
//! base_seed = 2024
//! tail = 0.05
//! verify_samples = 10000
//! output_dir = "out"
//!
//! [initial_state]
//! mode = "normal"    # or "explicit" with states = [[x1...], ...]
//! mean = 10.0
//! variance = 2.0
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::disturbance::DiscreteDisturbance;
use crate::error::{Error, Result};
use crate::mfsim::{normal_initial_states, DEFAULT_TAIL, MIN_PV_SAMPLES};
use crate::riccati::{SystemMatrices, SystemSpec};

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.0, 1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_N_RUNS: usize = 1000;
pub const DEFAULT_BASE_SEED: u64 = 0;
pub const DEFAULT_INITIAL_VARIANCE: f64 = 2.0;
pub const DEFAULT_OUTPUT_DIR: &str = "mflqr-out";

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Explicit(Vec<DVector<f64>>),
    Normal {
        mean: f64,
        variance: f64,
        /// Falls back to the base seed when absent.
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// System at `λ = 0`; use [`ExperimentConfig::spec_at`] for grid points.
    pub spec: SystemSpec,
    pub lambda_grid: Vec<f64>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub tail: f64,
    pub verify_samples: usize,
    pub output_dir: PathBuf,
    pub initial_state: InitialState,
    /// Hex SHA-256 of the config file bytes.
    pub sha256: String,
}

impl ExperimentConfig {
    pub fn spec_at(&self, lambda: f64) -> Result<SystemSpec> {
        self.spec.with_lambda(lambda)
    }

    pub fn initial_states(&self) -> Result<Vec<DVector<f64>>> {
        match &self.initial_state {
            InitialState::Explicit(states) => Ok(states.clone()),
            InitialState::Normal {
                mean,
                variance,
                seed,
            } => normal_initial_states(
                self.spec.k(),
                self.spec.n(),
                *mean,
                *variance,
                seed.unwrap_or(self.base_seed),
            ),
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Config {
        key: String::new(),
        line: 0,
        message: format!("not valid UTF-8: {e}"),
    })?;
    let mut config = parse_config_str(&text)?;
    config.sha256 = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(config)
}

/// Parses config text; the returned config has an empty `sha256`.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
            .unwrap_or(0);
        Error::Config {
            key: String::new(),
            line,
            message: e.message().to_string(),
        }
    })?;
    let doc = Doc { text, root: &root };

    let system = doc.section("system", true)?.unwrap_or_default();
    let k = doc
        .usize(&system, "system", "k")?
        .ok_or_else(|| doc.missing("system", "k"))?;
    let horizon = doc
        .usize(&system, "system", "horizon")?
        .ok_or_else(|| doc.missing("system", "horizon"))?;
    let a = doc.matrices(&system, "A", horizon)?;
    let b = doc.matrices(&system, "B", horizon)?;
    let c = doc.matrices(&system, "C", horizon)?;
    let p = doc.matrices(&system, "P", horizon + 1)?;
    let q = doc.matrices(&system, "Q", horizon + 1)?;
    let r = doc.matrices(&system, "R", horizon)?;
    let n = a.first().or(p.first()).map_or(0, |m| m.nrows());
    let m = b.first().or(r.first()).map_or(0, |m| m.ncols());
    for (key, expected) in [("n", n), ("m", m)] {
        if let Some(given) = doc.usize(&system, "system", key)? {
            if given != expected {
                return Err(doc.error(
                    "system",
                    key,
                    format!("declared {given} but the matrices imply {expected}"),
                ));
            }
        }
    }

    let dist_table = doc
        .section("disturbance", true)?
        .ok_or_else(|| doc.missing("disturbance", ""))?;
    let disturbance = doc.disturbance(&dist_table)?;

    let matrices = SystemMatrices { a, b, c, p, q, r };
    let spec = SystemSpec::new(k, matrices, 0.0, disturbance)
        .map_err(|e| doc.error("system", "", e.to_string()))?;

    let exp = doc.section("experiment", false)?.unwrap_or_default();
    let lambda_grid = match exp.get("lambda_grid") {
        None => DEFAULT_LAMBDA_GRID.to_vec(),
        Some(v) => doc.numbers(v, "experiment", "lambda_grid")?,
    };
    if lambda_grid.is_empty() {
        return Err(doc.error("experiment", "lambda_grid", "must not be empty".into()));
    }
    if lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(doc.error(
            "experiment",
            "lambda_grid",
            "entries must be finite and ≥ 0".into(),
        ));
    }
    if lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(doc.error(
            "experiment",
            "lambda_grid",
            "must be strictly increasing".into(),
        ));
    }
    let n_runs = doc
        .usize(&exp, "experiment", "n_runs")?
        .unwrap_or(DEFAULT_N_RUNS);
    if n_runs == 0 {
        return Err(doc.error("experiment", "n_runs", "must be at least 1".into()));
    }
    let base_seed = doc
        .u64(&exp, "experiment", "base_seed")?
        .unwrap_or(DEFAULT_BASE_SEED);
    let tail = match exp.get("tail") {
        None => DEFAULT_TAIL,
        Some(v) => doc.number(v, "experiment", "tail")?,
    };
    if !(0.0..0.5).contains(&tail) {
        return Err(doc.error("experiment", "tail", "must lie in [0, 0.5)".into()));
    }
    let verify_samples = doc
        .usize(&exp, "experiment", "verify_samples")?
        .unwrap_or(MIN_PV_SAMPLES);
    if verify_samples < MIN_PV_SAMPLES {
        return Err(doc.error(
            "experiment",
            "verify_samples",
            format!("must be at least {MIN_PV_SAMPLES}"),
        ));
    }
    let output_dir = match exp.get("output_dir") {
        None => PathBuf::from(DEFAULT_OUTPUT_DIR),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => return Err(doc.error("experiment", "output_dir", "expected a string".into())),
    };

    let init = doc.section("initial_state", false)?.unwrap_or_default();
    let initial_state = doc.initial_state(&init, k, n)?;

    Ok(ExperimentConfig {
        spec,
        lambda_grid,
        n_runs,
        base_seed,
        tail,
        verify_samples,
        output_dir,
        initial_state,
        sha256: String::new(),
    })
}

struct Doc<'a> {
    text: &'a str,
    root: &'a Table,
}

impl Doc<'_> {
    /// 1-based line of `key` inside `[section]`, else of the section header, else 0.
    fn line_of(&self, section: &str, key: &str) -> usize {
        let header = format!("[{section}]");
        let mut in_section = false;
        let mut section_line = 0;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if line.starts_with('[') {
                in_section = line == header;
                if in_section {
                    section_line = i + 1;
                }
                continue;
            }
            if in_section && !key.is_empty() {
                if let Some(rest) = line.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return i + 1;
                    }
                }
            }
        }
        section_line
    }

    fn error(&self, section: &str, key: &str, message: String) -> Error {
        let full = if key.is_empty() {
            section.to_string()
        } else {
            format!("{section}.{key}")
        };
        Error::Config {
            key: full,
            line: self.line_of(section, key),
            message,
        }
    }

    fn missing(&self, section: &str, key: &str) -> Error {
        self.error(section, key, "missing".into())
    }

    fn section(&self, name: &str, required: bool) -> Result<Option<Table>> {
        match self.root.get(name) {
            Some(Value::Table(t)) => Ok(Some(t.clone())),
            Some(_) => Err(self.error(name, "", "expected a table".into())),
            None if required => Err(self.missing(name, "")),
            None => Ok(None),
        }
    }

    fn number(&self, v: &Value, section: &str, key: &str) -> Result<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.error(
                section,
                key,
                format!("expected a number, found {}", v.type_str()),
            )),
        }
    }

    fn numbers(&self, v: &Value, section: &str, key: &str) -> Result<Vec<f64>> {
        match v {
            Value::Array(items) => items.iter().map(|x| self.number(x, section, key)).collect(),
            _ => Err(self.error(
                section,
                key,
                format!("expected an array, found {}", v.type_str()),
            )),
        }
    }

    fn u64(&self, table: &Table, section: &str, key: &str) -> Result<Option<u64>> {
        match table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(self.error(
                section,
                key,
                format!("expected a nonnegative integer, found {}", v.type_str()),
            )),
        }
    }

    fn usize(&self, table: &Table, section: &str, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(table, section, key)?.map(|v| v as usize))
    }

    fn matrix(&self, v: &Value, key: &str) -> Result<DMatrix<f64>> {
        match v {
            Value::Float(_) | Value::Integer(_) => {
                Ok(DMatrix::from_element(1, 1, self.number(v, "system", key)?))
            }
            Value::Array(rows) => {
                let rows: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| self.numbers(r, "system", key))
                    .collect::<Result<_>>()?;
                let cols = rows.first().map_or(0, Vec::len);
                if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
                    return Err(self.error(
                        "system",
                        key,
                        "matrix rows must be nonempty and equal length".into(),
                    ));
                }
                Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
            }
            _ => Err(self.error(
                "system",
                key,
                format!("expected a matrix, found {}", v.type_str()),
            )),
        }
    }

    /// A constant matrix expanded to `len` copies, or a per-t list of exactly `len`.
    fn matrices(&self, table: &Table, key: &str, len: usize) -> Result<Vec<DMatrix<f64>>> {
        let v = table.get(key).ok_or_else(|| self.missing("system", key))?;
        let per_t = matches!(v, Value::Array(rows)
            if rows.first().is_some_and(|r| matches!(r, Value::Array(inner)
                if inner.first().is_some_and(Value::is_array))));
        if !per_t {
            return Ok(vec![self.matrix(v, key)?; len]);
        }
        let Value::Array(items) = v else {
            unreachable!()
        };
        if items.len() != len {
            return Err(self.error(
                "system",
                key,
                format!("per-t list has {} entries, expected {len}", items.len()),
            ));
        }
        items.iter().map(|m| self.matrix(m, key)).collect()
    }

    fn disturbance(&self, table: &Table) -> Result<DiscreteDisturbance> {
        let support = table
            .get("support")
            .ok_or_else(|| self.missing("disturbance", "support"))?;
        let support: Vec<DVector<f64>> = match support {
            Value::Array(items) => items
                .iter()
                .map(|atom| match atom {
                    Value::Array(_) => Ok(DVector::from_vec(self.numbers(
                        atom,
                        "disturbance",
                        "support",
                    )?)),
                    _ => Ok(DVector::from_element(
                        1,
                        self.number(atom, "disturbance", "support")?,
                    )),
                })
                .collect::<Result<_>>()?,
            _ => return Err(self.error("disturbance", "support", "expected an array".into())),
        };
        let probs = table
            .get("probs")
            .ok_or_else(|| self.missing("disturbance", "probs"))?;
        let probs = self.numbers(probs, "disturbance", "probs")?;
        if probs.len() != support.len() {
            return Err(self.error(
                "disturbance",
                "probs",
                format!("{} probabilities for {} atoms", probs.len(), support.len()),
            ));
        }
        DiscreteDisturbance::new(support, probs)
            .map_err(|e| self.error("disturbance", "probs", e.to_string()))
    }

    fn initial_state(&self, table: &Table, k: usize, n: usize) -> Result<InitialState> {
        let mode = match table.get("mode") {
            None => "normal",
            Some(Value::String(s)) => s.as_str(),
            Some(_) => return Err(self.error("initial_state", "mode", "expected a string".into())),
        };
        match mode {
            "normal" => {
                let mean = match table.get("mean") {
                    None => 0.0,
                    Some(v) => self.number(v, "initial_state", "mean")?,
                };
                let variance = match table.get("variance") {
                    None => DEFAULT_INITIAL_VARIANCE,
                    Some(v) => self.number(v, "initial_state", "variance")?,
                };
                if !(variance.is_finite() && variance >= 0.0) {
                    return Err(self.error(
                        "initial_state",
                        "variance",
                        "must be finite and ≥ 0".into(),
                    ));
                }
                let seed = self.u64(table, "initial_state", "seed")?;
                Ok(InitialState::Normal {
                    mean,
                    variance,
                    seed,
                })
            }
            "explicit" => {
                let states = table
                    .get("states")
                    .ok_or_else(|| self.missing("initial_state", "states"))?;
                let Value::Array(items) = states else {
                    return Err(self.error("initial_state", "states", "expected an array".into()));
                };
                let states: Vec<DVector<f64>> = items
                    .iter()
                    .map(|x| match x {
                        Value::Array(_) => Ok(DVector::from_vec(self.numbers(
                            x,
                            "initial_state",
                            "states",
                        )?)),
                        _ => Ok(DVector::from_element(
                            1,
                            self.number(x, "initial_state", "states")?,
                        )),
                    })
                    .collect::<Result<_>>()?;
                if states.len() != k || states.iter().any(|x| x.len() != n) {
                    return Err(self.error(
                        "initial_state",
                        "states",
                        format!("expected {k} states of length {n}"),
                    ));
                }
                Ok(InitialState::Explicit(states))
            }
            other => Err(self.error(
                "initial_state",
                "mode",
                format!("unknown mode `{other}`, expected `normal` or `explicit`"),
            )),
        }
    }
}
