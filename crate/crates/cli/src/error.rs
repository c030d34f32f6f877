use std::process::ExitCode;

use selmem_core::eval::EvalError;
use selmem_core::{CaptureError, IdentityError, RetrievalError, StoreError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Input(_) => ExitCode::from(2),
            CliError::NotFound(_) => ExitCode::from(3),
            CliError::Failed(_) => ExitCode::from(1),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownUser(_) | StoreError::UnknownRecord(_) => CliError::NotFound(e.to_string()),
            StoreError::Dimension { .. } | StoreError::InvalidRecord(_) => CliError::Input(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<CaptureError> for CliError {
    fn from(e: CaptureError) -> Self {
        match e {
            CaptureError::Storage(s) => s.into(),
            CaptureError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Store(s) => s.into(),
            RetrievalError::Config(_) => CliError::Config(e.to_string()),
            RetrievalError::Vector(_) => CliError::Input(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<IdentityError> for CliError {
    fn from(e: IdentityError) -> Self {
        match e {
            IdentityError::Storage(s) => s.into(),
            IdentityError::Patterns(_) => CliError::Config(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Encoder(_) => CliError::Failed(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
