//! One error type for the CLI and the service, with its HTTP status and
//! process exit code.
//!
//! | exit | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | success; audit clean; ledger intact                       |
//! | 1    | ledger verification or proof check failed                |
//! | 2    | audit completed with discrepancies                        |
//! | 3    | audit or report unavailable (not analysed, store fault)   |
//! | 4    | the protocol rejected the operation                       |
//! | 5    | invalid arguments or input files                          |
//! | 6    | configuration, key file or filesystem problem             |

use std::path::PathBuf;

use axum::http::StatusCode;
use codewe_core::analysis::AnalysisError;
use codewe_core::audit::AuditError;
use codewe_core::cas::CasError;
use codewe_core::coproduction::CoProductionError;
use codewe_core::ledger::LedgerError;
use codewe_core::{NodeError, Rejection};
use thiserror::Error;

use crate::config::ConfigError;
use crate::keys::KeyFileError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_DISCREPANT: u8 = 2;
pub const EXIT_UNAVAILABLE: u8 = 3;
pub const EXIT_REJECTED: u8 = 4;
pub const EXIT_INPUT: u8 = 5;
pub const EXIT_ENVIRONMENT: u8 = 6;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Codesign(#[from] CoProductionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Key(#[from] KeyFileError),
    #[error("{0}")]
    Input(String),
    #[error("survey {0} has not been analysed yet")]
    NotYetAnalyzed(codewe_core::Digest),
    #[error("{0}")]
    ReportUnavailable(String),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl From<CasError> for AppError {
    fn from(e: CasError) -> Self {
        AppError::Node(NodeError::Cas(e))
    }
}

impl From<Rejection> for AppError {
    fn from(r: Rejection) -> Self {
        AppError::Node(NodeError::Rejected(r))
    }
}

impl From<LedgerError> for AppError {
    fn from(e: LedgerError) -> Self {
        AppError::Node(NodeError::Ledger(e))
    }
}

pub type AppResult<T> = Result<T, AppError>;

fn rejection_status(r: &Rejection) -> StatusCode {
    match r {
        Rejection::UnknownContract | Rejection::UnknownCommitment => StatusCode::NOT_FOUND,
        Rejection::Unauthorized | Rejection::UnknownToken => StatusCode::FORBIDDEN,
        Rejection::InvalidSignature | Rejection::InvalidRules(_) | Rejection::MalformedBody(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        Rejection::DuplicateContract
        | Rejection::InvalidTransition { .. }
        | Rejection::SurveyClosed
        | Rejection::NotYetOpen
        | Rejection::TokenReplay
        | Rejection::DuplicateKey
        | Rejection::SurveyFull
        | Rejection::AlreadyAnalyzed
        | Rejection::AlreadyErased => StatusCode::CONFLICT,
    }
}

impl AppError {
    /// Stable machine-readable reason.
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Node(e) => match e {
                NodeError::Rejected(r) => r.code(),
                NodeError::InvalidParams(_) => "InvalidParams",
                NodeError::StigmaGateFailed(_) => "StigmaGateFailed",
                NodeError::CoProductionMissing(_) => "CoProductionMissing",
                NodeError::TokenCountMismatch { .. } => "TokenCountMismatch",
                NodeError::InvalidAnswers(_) => "InvalidAnswers",
                NodeError::DigestMismatch => "DigestMismatch",
                NodeError::UnknownContract(_) => "UnknownContract",
                NodeError::UnknownCommitment(_) => "UnknownCommitment",
                NodeError::Unauthorized => "Unauthorized",
                NodeError::Cas(CasError::NotFound(_)) => "NotFound",
                NodeError::Cas(CasError::AlreadyErased(_)) => "AlreadyErased",
                NodeError::Cas(CasError::EmptyBlob) => "EmptyBlob",
                NodeError::Cas(CasError::BlobTooLarge { .. }) => "BlobTooLarge",
                NodeError::Cas(CasError::InvalidRequest) => "InvalidRequest",
                NodeError::Cas(CasError::IntegrityViolation(_)) => "IntegrityViolation",
                NodeError::Cas(CasError::StoreUnavailable(_)) => "StoreUnavailable",
                NodeError::Ledger(_) => "LedgerUnavailable",
                NodeError::Analysis(a) => match a {
                    AnalysisError::WrongPhase(_) => "WrongPhase",
                    AnalysisError::UnknownContract(_) => "UnknownContract",
                    AnalysisError::AlreadyAnalyzed => "AlreadyAnalyzed",
                    AnalysisError::Rejected(r) => r.code(),
                    AnalysisError::EmptyAnalysis(_) => "EmptyAnalysis",
                    _ => "StoreUnavailable",
                },
                NodeError::Audit(a) => match a {
                    AuditError::NotYetAnalyzed => "NotYetAnalyzed",
                    AuditError::UnknownContract(_) => "UnknownContract",
                    AuditError::ReportUnavailable => "ReportUnavailable",
                    AuditError::StoreUnavailable(_) => "StoreUnavailable",
                },
            },
            AppError::Codesign(_) => "CodesignRejected",
            AppError::Config(_) => "ConfigError",
            AppError::Key(_) => "KeyFileError",
            AppError::Input(_) => "InvalidInput",
            AppError::NotYetAnalyzed(_) => "NotYetAnalyzed",
            AppError::ReportUnavailable(_) => "ReportUnavailable",
            AppError::Io(..) => "IoError",
        }
    }

    pub fn http_status(&self) -> StatusCode {
        match self {
            AppError::Node(e) => match e {
                NodeError::Rejected(r) | NodeError::Analysis(AnalysisError::Rejected(r)) => {
                    rejection_status(r)
                }
                NodeError::UnknownContract(_)
                | NodeError::UnknownCommitment(_)
                | NodeError::Analysis(AnalysisError::UnknownContract(_))
                | NodeError::Audit(AuditError::UnknownContract(_))
                | NodeError::Audit(AuditError::NotYetAnalyzed)
                | NodeError::Cas(CasError::NotFound(_)) => StatusCode::NOT_FOUND,
                NodeError::Unauthorized => StatusCode::FORBIDDEN,
                NodeError::Cas(CasError::BlobTooLarge { .. }) => StatusCode::PAYLOAD_TOO_LARGE,
                NodeError::InvalidParams(_)
                | NodeError::StigmaGateFailed(_)
                | NodeError::CoProductionMissing(_)
                | NodeError::TokenCountMismatch { .. }
                | NodeError::InvalidAnswers(_)
                | NodeError::DigestMismatch
                | NodeError::Cas(CasError::EmptyBlob)
                | NodeError::Cas(CasError::InvalidRequest) => StatusCode::UNPROCESSABLE_ENTITY,
                NodeError::Cas(CasError::AlreadyErased(_))
                | NodeError::Analysis(AnalysisError::AlreadyAnalyzed)
                | NodeError::Analysis(AnalysisError::WrongPhase(_)) => StatusCode::CONFLICT,
                _ => StatusCode::SERVICE_UNAVAILABLE,
            },
            AppError::Codesign(_) | AppError::Input(_) => StatusCode::UNPROCESSABLE_ENTITY,
            AppError::NotYetAnalyzed(_) => StatusCode::NOT_FOUND,
            AppError::ReportUnavailable(_)
            | AppError::Config(_)
            | AppError::Key(_)
            | AppError::Io(..) => StatusCode::SERVICE_UNAVAILABLE,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Node(e) => match e {
                NodeError::Rejected(_)
                | NodeError::Unauthorized
                | NodeError::StigmaGateFailed(_)
                | NodeError::CoProductionMissing(_)
                | NodeError::TokenCountMismatch { .. }
                | NodeError::Analysis(AnalysisError::Rejected(_))
                | NodeError::Analysis(AnalysisError::AlreadyAnalyzed)
                | NodeError::Analysis(AnalysisError::WrongPhase(_))
                | NodeError::Cas(CasError::AlreadyErased(_)) => EXIT_REJECTED,
                NodeError::InvalidParams(_)
                | NodeError::InvalidAnswers(_)
                | NodeError::DigestMismatch
                | NodeError::UnknownContract(_)
                | NodeError::UnknownCommitment(_)
                | NodeError::Analysis(AnalysisError::UnknownContract(_))
                | NodeError::Audit(AuditError::UnknownContract(_))
                | NodeError::Cas(CasError::EmptyBlob)
                | NodeError::Cas(CasError::BlobTooLarge { .. })
                | NodeError::Cas(CasError::InvalidRequest)
                | NodeError::Cas(CasError::NotFound(_)) => EXIT_INPUT,
                NodeError::Audit(_) => EXIT_UNAVAILABLE,
                NodeError::Cas(CasError::IntegrityViolation(_)) => EXIT_VERIFY_FAILED,
                _ => EXIT_ENVIRONMENT,
            },
            AppError::Codesign(_) => EXIT_REJECTED,
            AppError::Input(_) => EXIT_INPUT,
            AppError::NotYetAnalyzed(_) | AppError::ReportUnavailable(_) => EXIT_UNAVAILABLE,
            AppError::Config(_) | AppError::Key(_) | AppError::Io(..) => EXIT_ENVIRONMENT,
        }
    }
}
