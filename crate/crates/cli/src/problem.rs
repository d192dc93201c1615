//! Problem files and configuration resolution.

use std::collections::BTreeMap;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::report::{Bar, CliError};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Task {
    MttoKernel,
    NearInvariance,
    EaeVerify,
    LpDiagnose,
    WhSolve,
    MimoSim,
    PaperExamples,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::MttoKernel => "mtto-kernel",
            Task::NearInvariance => "near-invariance",
            Task::EaeVerify => "eae-verify",
            Task::LpDiagnose => "lp-diagnose",
            Task::WhSolve => "wh-solve",
            Task::MimoSim => "mimo-sim",
            Task::PaperExamples => "paper-examples",
        }
    }

    pub fn uses_grid(self) -> bool {
        matches!(self, Task::WhSolve | Task::MimoSim)
    }

    pub fn uses_convention(self) -> bool {
        self == Task::MimoSim
    }
}

/// Per-check overrides of pass bars. `all` applies to every upper bar.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub all: Option<f64>,
    #[serde(default)]
    pub checks: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: String,
    pub task: Task,
    pub payload: Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ProblemFile = serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("problem file: {e}")))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                file.schema_version
            )));
        }
        match &file.payload {
            Value::Object(m) if !m.is_empty() => Ok(file),
            _ => Err(CliError::Input("payload must be a non-empty object".into())),
        }
    }
}

/// Command-line overrides. `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub convention: Option<mtto_core::wiener_hopf::Convention>,
    pub csv: Option<String>,
}

/// Everything a task needs besides its payload; embedded in the report.
#[derive(Clone, Debug, Serialize)]
pub struct Config {
    pub task: Task,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<mtto_core::wiener_hopf::Convention>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Resolved pass bar of every check the task can emit.
    pub tolerances: BTreeMap<String, f64>,
}

impl Config {
    /// Flag > file > default. Flags the task has no use for are rejected, as
    /// are overrides naming checks the task does not have.
    pub fn resolve(
        task: Task,
        file: &ProblemFile,
        flags: &Overrides,
        bars: &[Bar],
    ) -> Result<Self, CliError> {
        let reject = |flag: &str| {
            Err(CliError::Input(format!(
                "--{flag} does not apply to task {}",
                task.name()
            )))
        };
        if flags.grid.is_some() && !task.uses_grid() {
            return reject("grid");
        }
        if flags.csv.is_some() && !task.uses_grid() {
            return reject("csv");
        }
        if flags.convention.is_some() && !task.uses_convention() {
            return reject("convention");
        }
        if flags.tol.is_some() && bars.iter().all(|b| !b.upper) {
            return reject("tol");
        }
        if flags.grid == Some(0) {
            return Err(CliError::Input("--grid must be positive".into()));
        }
        let given = file.tolerances.clone().unwrap_or_default();
        for name in given.checks.keys() {
            if !bars.iter().any(|b| b.name == name) {
                return Err(CliError::Input(format!(
                    "tolerance override for unknown check {name:?} of task {}",
                    task.name()
                )));
            }
        }
        for t in flags
            .tol
            .iter()
            .chain(given.all.iter())
            .chain(given.checks.values())
        {
            if !(t.is_finite() && *t > 0.0) {
                return Err(CliError::Input(format!(
                    "tolerance {t} must be positive and finite"
                )));
            }
        }
        let tolerances = bars
            .iter()
            .map(|b| {
                let value = if b.upper {
                    flags
                        .tol
                        .or_else(|| given.checks.get(b.name).copied())
                        .or(given.all)
                        .unwrap_or(b.default)
                } else {
                    given.checks.get(b.name).copied().unwrap_or(b.default)
                };
                (b.name.to_string(), value)
            })
            .collect();
        Ok(Config {
            task,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            grid: flags.grid,
            convention: flags.convention,
            csv: flags.csv.clone(),
            tolerances,
        })
    }

    pub fn bar(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}
