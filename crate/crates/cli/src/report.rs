//! Report assembly and error classification.

use serde::Serialize;
use serde_json::Value;

use crate::problem::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input-error",
            CliError::Numerical(_) => "numerical-failure",
        }
    }
}

impl From<mtto_core::Error> for CliError {
    fn from(e: mtto_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// A pass bar a task can apply. Upper bars pass when `value < bar` and are
/// the ones `--tol` replaces; lower bars pass when `value > bar`.
#[derive(Clone, Copy, Debug)]
pub struct Bar {
    pub name: &'static str,
    pub default: f64,
    pub upper: bool,
}

pub const fn upper(name: &'static str, default: f64) -> Bar {
    Bar {
        name,
        default,
        upper: true,
    }
}

pub const fn lower(name: &'static str, default: f64) -> Bar {
    Bar {
        name,
        default,
        upper: false,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Value,
    /// `"<"`, `">"` or `"="`.
    pub relation: &'static str,
    pub expected: Value,
    pub pass: bool,
}

/// Collects checks against the resolved bars of a [`Config`].
pub struct Checks<'a> {
    config: &'a Config,
    pub list: Vec<Check>,
}

impl<'a> Checks<'a> {
    pub fn new(config: &'a Config) -> Self {
        Self {
            config,
            list: vec![],
        }
    }

    /// `value < offset + bar`; the offset carries truncation tails.
    pub fn below(&mut self, name: &str, value: f64, offset: f64) {
        let bound = offset + self.config.bar(name);
        self.list.push(Check {
            name: name.to_string(),
            value: value.into(),
            relation: "<",
            expected: bound.into(),
            pass: value < bound,
        });
    }

    pub fn above(&mut self, name: &str, value: f64) {
        let bound = self.config.bar(name);
        self.list.push(Check {
            name: name.to_string(),
            value: value.into(),
            relation: ">",
            expected: bound.into(),
            pass: value > bound,
        });
    }

    pub fn equal<T: Serialize + PartialEq>(&mut self, name: &str, value: T, expected: T) {
        self.list.push(Check {
            name: name.to_string(),
            pass: value == expected,
            value: serde_json::to_value(value).unwrap_or(Value::Null),
            relation: "=",
            expected: serde_json::to_value(expected).unwrap_or(Value::Null),
        });
    }
}

#[derive(Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool {
    name: "mtto",
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub tool: Tool,
    pub schema_version: &'static str,
    pub config: &'a Config,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

#[derive(Serialize)]
pub struct ErrorReport {
    pub tool: Tool,
    pub error: ErrorBody,
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
}

/// Serialises with `indent` spaces, or compactly for `indent = 0`.
pub fn to_json<T: Serialize>(value: &T, indent: usize) -> String {
    if indent == 0 {
        return serde_json::to_string(value).expect("reports serialise");
    }
    let pad = vec![b' '; indent];
    let mut out = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(&pad);
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser).expect("reports serialise");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        let input: CliError = mtto_core::Error::InvalidInput("x".into()).into();
        assert_eq!(input.exit_code(), 2);
        let numerical: CliError = mtto_core::Error::Numerical("x".into()).into();
        assert_eq!(numerical.exit_code(), 3);
        let degenerate: CliError = mtto_core::Error::Degenerate { degree: 3 }.into();
        assert_eq!(degenerate.exit_code(), 3);
    }

    #[test]
    fn zero_indent_is_compact() {
        let v = serde_json::json!({"a": [1, 2]});
        assert_eq!(to_json(&v, 0), r#"{"a":[1,2]}"#);
        assert_eq!(to_json(&v, 1), "{\n \"a\": [\n  1,\n  2\n ]\n}");
    }
}
