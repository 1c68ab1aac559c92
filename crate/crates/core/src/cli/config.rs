//! TOML experiment configuration.
//!
//! ```toml
//! seed = 42                 # global seed; --seed overrides it
//! lambda = 1e-6             # ridge regularisation
//! washout = 100             # optional, default 10% of the training segment
//! train_fraction = 0.7
//! include_input = false     # append the input to the reservoir signals
//! out = "out"               # output directory; --out overrides it
//! workers = 4               # sweep threads; --workers overrides it
//!
//! [task]
//! kind = "sine-prediction"  # narma10 | delay-memory | sine-prediction | mackey-glass
//! length = 1000
//!
//! [esn]                     # exactly one of [esn] or [qrc]
//! nodes = 100
//! spectral_radius = 0.9
//!
//! [diagnostics]             # used by `diagnose` only
//! max_delay = 40
//!
//! [[sweep]]                 # Cartesian product, first declaration varies slowest
//! parameter = "esn.spectral_radius"
//! values = [0.5, 0.9, 1.2]
//! ```
//!
//! Unknown keys anywhere are errors. Sections without a `seed` derive one from
//! the global seed: backends use `seed`, tasks `seed + 1`, diagnostics
//! `seed + 2`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::backend::BackendSpec;
use crate::diagnostics::DiagnosticsConfig;
use crate::esn::EsnConfig;
use crate::experiment::ExperimentConfig;
use crate::qrc::QrcConfig;
use crate::readout::DEFAULT_LAMBDA;
use crate::tasks::TaskSpec;

use super::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default)]
    washout: Option<usize>,
    #[serde(default = "default_train_fraction")]
    train_fraction: f64,
    #[serde(default)]
    include_input: bool,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    workers: Option<usize>,
    task: TaskSpec,
    #[serde(default)]
    esn: Option<EsnConfig>,
    #[serde(default)]
    qrc: Option<QrcConfig>,
    #[serde(default)]
    diagnostics: Option<DiagnosticsConfig>,
    #[serde(default)]
    sweep: Vec<SweepDecl>,
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_train_fraction() -> f64 {
    0.7
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepDecl {
    pub parameter: String,
    pub values: Vec<Value>,
}

/// One resolved configuration, after sweep substitution.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfig {
    pub index: usize,
    /// `(parameter, value)` pairs that produced this point.
    pub assignments: Vec<(String, String)>,
    pub seed: u64,
    pub experiment: ExperimentConfig,
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub path: PathBuf,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub sweeps: Vec<SweepDecl>,
    pub points: Vec<PointConfig>,
}

impl Config {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path, seed_override)
    }

    pub fn parse(text: &str, path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err(path, &e.to_string()))?;
        if let Some(seed) = seed_override {
            table.insert("seed".into(), Value::Integer(seed as i64));
        }
        let global = match table.get("seed") {
            None => 0,
            Some(Value::Integer(s)) if *s >= 0 => *s as u64,
            Some(_) => return Err(config_err(path, "seed must be a nonnegative integer")),
        };
        derive_seed(&mut table, "esn", global);
        derive_seed(&mut table, "qrc", global);
        derive_seed(&mut table, "task", global.wrapping_add(1));
        derive_seed(&mut table, "diagnostics", global.wrapping_add(2));

        let base = resolve(&table, path)?;
        let sweeps = base.sweep.clone();
        for s in &sweeps {
            check_sweep(s, &table, path)?;
        }

        let mut points = Vec::new();
        for (index, assignments) in cartesian(&sweeps).into_iter().enumerate() {
            let mut t = table.clone();
            for (param, value) in &assignments {
                set_dotted(&mut t, param, value.clone());
            }
            let file = resolve(&t, path)?;
            points.push(point(index, &assignments, file, path)?);
        }
        Ok(Config {
            path: path.to_path_buf(),
            out: base.out,
            workers: base.workers,
            sweeps,
            points,
        })
    }

    pub fn base(&self) -> &PointConfig {
        &self.points[0]
    }
}

fn config_err(path: &Path, msg: &str) -> CliError {
    CliError::Config(format!("{}: {}", path.display(), msg))
}

fn derive_seed(table: &mut Table, section: &str, seed: u64) {
    if let Some(Value::Table(t)) = table.get_mut(section) {
        t.entry("seed").or_insert(Value::Integer(seed as i64));
    }
}

fn resolve(table: &Table, path: &Path) -> Result<FileConfig, CliError> {
    FileConfig::deserialize(Value::Table(table.clone())).map_err(|e| config_err(path, &e.to_string()))
}

fn check_sweep(sweep: &SweepDecl, table: &Table, path: &Path) -> Result<(), CliError> {
    if sweep.values.is_empty() {
        return Err(config_err(
            path,
            &format!("sweep over {} has no values", sweep.parameter),
        ));
    }
    let parts: Vec<&str> = sweep.parameter.split('.').collect();
    let valid_shape = match parts.as_slice() {
        [top] => !matches!(
            *top,
            "sweep" | "task" | "esn" | "qrc" | "diagnostics" | "out" | "workers"
        ),
        [section, _] => matches!(*section, "task" | "esn" | "qrc" | "diagnostics") && table.contains_key(*section),
        _ => false,
    };
    if !valid_shape {
        return Err(config_err(
            path,
            &format!("sweep parameter {} does not name a config field", sweep.parameter),
        ));
    }
    // Assigning the first value and deserialising rejects unknown field names.
    let mut probe = table.clone();
    set_dotted(&mut probe, &sweep.parameter, sweep.values[0].clone());
    FileConfig::deserialize(Value::Table(probe))
        .map_err(|e| config_err(path, &format!("sweep parameter {}: {}", sweep.parameter, e)))?;
    Ok(())
}

fn set_dotted(table: &mut Table, key: &str, value: Value) {
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
        }
        Some((section, field)) => {
            if let Some(Value::Table(t)) = table.get_mut(section) {
                t.insert(field.to_string(), value);
            }
        }
    }
}

fn cartesian(sweeps: &[SweepDecl]) -> Vec<Vec<(String, Value)>> {
    let mut acc: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for s in sweeps {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                s.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((s.parameter.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    acc
}

fn point(
    index: usize,
    assignments: &[(String, Value)],
    file: FileConfig,
    path: &Path,
) -> Result<PointConfig, CliError> {
    let backend = match (file.esn, file.qrc) {
        (Some(e), None) => BackendSpec::Esn(e),
        (None, Some(q)) => BackendSpec::Qrc(q),
        (Some(_), Some(_)) => return Err(config_err(path, "configure exactly one of [esn] or [qrc], not both")),
        (None, None) => return Err(config_err(path, "missing backend section: [esn] or [qrc]")),
    };
    match &backend {
        BackendSpec::Esn(c) => c.validate(),
        BackendSpec::Qrc(c) => c.validate(),
    }
    .map_err(|e| config_err(path, &e.to_string()))?;
    if !(file.train_fraction > 0.0 && file.train_fraction < 1.0) {
        return Err(config_err(path, "train_fraction must lie strictly between 0 and 1"));
    }
    if !(file.lambda >= 0.0 && file.lambda.is_finite()) {
        return Err(config_err(path, "lambda must be a nonnegative number"));
    }
    let experiment = ExperimentConfig {
        task: file.task,
        backend,
        lambda: file.lambda,
        washout: file.washout,
        train_fraction: file.train_fraction,
        include_input: file.include_input,
    };
    let diagnostics = file.diagnostics.unwrap_or_else(|| DiagnosticsConfig {
        seed: file.seed.wrapping_add(2),
        ..DiagnosticsConfig::default()
    });
    Ok(PointConfig {
        index,
        assignments: assignments.iter().map(|(k, v)| (k.clone(), value_text(v))).collect(),
        seed: file.seed,
        experiment,
        diagnostics,
    })
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7
[task]
kind = "sine-prediction"
length = 300
[esn]
nodes = 20
spectral_radius = 0.9
"#;

    fn parse(text: &str) -> Result<Config, CliError> {
        Config::parse(text, Path::new("test.toml"), None)
    }

    #[test]
    fn seeds_derive_from_global() {
        let c = parse(BASE).unwrap();
        let p = c.base();
        assert_eq!(p.experiment.backend.seed(), 7);
        assert_eq!(p.experiment.task.seed, 8);
        let o = Config::parse(BASE, Path::new("t"), Some(100)).unwrap();
        assert_eq!(o.base().experiment.backend.seed(), 100);
        assert_eq!(o.base().seed, 100);
    }

    #[test]
    fn unknown_keys_fail_closed() {
        assert!(matches!(
            parse(&format!("{BASE}\nbogus = 1\n")),
            Err(CliError::Config(_))
        ));
        let nested = BASE.replace("nodes = 20", "nodes = 20\nwidth = 3");
        assert!(parse(&nested).is_err());
    }

    #[test]
    fn exactly_one_backend() {
        let both = format!("{BASE}\n[qrc]\nqubits = 2\ntau = 1.0\n");
        assert!(parse(&both).unwrap_err().to_string().contains("exactly one"));
        let none = BASE.replace("[esn]\nnodes = 20\nspectral_radius = 0.9\n", "");
        assert!(parse(&none).is_err());
    }

    #[test]
    fn sweeps_expand_in_declaration_order() {
        let text = format!(
            "{BASE}\n[[sweep]]\nparameter = \"esn.spectral_radius\"\nvalues = [0.5, 0.9, 1.2]\n[[sweep]]\nparameter = \"lambda\"\nvalues = [1e-6, 1e-2]\n"
        );
        let c = parse(&text).unwrap();
        assert_eq!(c.points.len(), 6);
        let radii: Vec<f64> = c
            .points
            .iter()
            .map(|p| match &p.experiment.backend {
                BackendSpec::Esn(e) => e.spectral_radius,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(radii, vec![0.5, 0.5, 0.9, 0.9, 1.2, 1.2]);
        assert_eq!(c.points[1].experiment.lambda, 1e-2);
    }

    #[test]
    fn sweep_must_name_existing_field() {
        let text = format!("{BASE}\n[[sweep]]\nparameter = \"esn.radius\"\nvalues = [0.5]\n");
        assert!(parse(&text).is_err());
        let text = format!("{BASE}\n[[sweep]]\nparameter = \"qrc.tau\"\nvalues = [0.5]\n");
        assert!(parse(&text).is_err());
        let text = format!("{BASE}\n[[sweep]]\nparameter = \"task\"\nvalues = [1]\n");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn train_fraction_bounds() {
        assert!(parse(&format!("train_fraction = 1.0\n{BASE}")).is_err());
        assert!(parse(&format!("train_fraction = 0.5\n{BASE}")).is_ok());
    }
}
