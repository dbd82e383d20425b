//! Library surface of the command-line driver, split out so integration
//! tests can call commands directly.

pub mod commands;
pub mod config;
pub mod store;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad inputs detected before computation starts; exit code 1.
    #[error("{0}")]
    Validation(String),
    /// Failures during computation or output writing; exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Split dotted-path config overrides (`--agent.gamma=0.95`) from ordinary
/// CLI arguments.
pub fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut overrides = Vec::new();
    let mut rest = Vec::new();
    for arg in args {
        if let Some(body) = arg.strip_prefix("--") {
            if let Some((key, _)) = body.split_once('=') {
                if key.contains('.')
                    && key
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_')
                {
                    overrides.push(body.to_string());
                    continue;
                }
            }
        }
        rest.push(arg);
    }
    (overrides, rest)
}
