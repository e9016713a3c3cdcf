use std::fmt;

use serde::Serialize;

/// Why a run stopped, with the exit code and the record written for it.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
    #[serde(skip)]
    code: i32,
}

impl Failure {
    pub fn config(field: Option<String>, message: impl Into<String>) -> Self {
        Self {
            error: "ConfigError".into(),
            field,
            message: message.into(),
            code: 2,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            error: "IoError".into(),
            field: None,
            message: message.into(),
            code: 1,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.code
    }

    pub fn record(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("failure serializes");
        v["exit_code"] = self.code.into();
        v
    }
}

impl From<xssh_core::Error> for Failure {
    fn from(e: xssh_core::Error) -> Self {
        let field = match &e {
            xssh_core::Error::InvalidSpec { field, .. } => Some(format!("system.{field}")),
            _ => None,
        };
        Self {
            error: e.name().into(),
            field,
            message: e.to_string(),
            code: if e.is_input_error() { 2 } else { 3 },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{} ({field}): {}", self.error, self.message),
            None => write!(f, "{}: {}", self.error, self.message),
        }
    }
}
