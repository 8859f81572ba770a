use std::fmt;

use thiserror::Error;

/// A config problem, located by line and key where possible.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    /// Section of a required key that is absent.
    pub section: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn at(line: usize, key: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            key: key.map(str::to_string),
            section: None,
            message: message.into(),
        }
    }

    pub fn missing(section: &str, key: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            key: Some(key.to_string()),
            section: Some(section.to_string()),
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            line: None,
            key: None,
            section: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.key, &self.section) {
            (Some(line), Some(key), _) => write!(f, "line {line}: key `{key}`: {}", self.message),
            (Some(line), None, _) => write!(f, "line {line}: {}", self.message),
            (None, Some(key), Some(section)) => write!(f, "[{section}] missing key `{key}`: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}
