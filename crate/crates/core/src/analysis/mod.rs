//! Ingest, scoring, signed reports and Merkle commitments over the
//! analysed responses.

mod plots;
mod report;
mod scoring;
mod store;

use thiserror::Error;

use crate::contract::{Phase, Rejection};
use crate::crypto::Digest;

pub use plots::{export_plots, render_charts, Chart};
pub use report::{
    build_report, prepare_report, proofs_for, report_message, sign_report, AnalysisReport, ProofFile,
    ReportBody, ReportBundle, EMPTY_ROOT_INPUT,
};
pub use scoring::{
    render_mean, score, DimensionStats, ItemStats, ScoreSummary, TotalStats, ValueCount,
};
pub use store::{
    ingest, load_params, Exclusion, ExclusionReason, Ingested, QueryStore, Row,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("contract is {0:?}; analysis needs a closed survey")]
    WrongPhase(Phase),
    #[error("unknown contract {0}")]
    UnknownContract(Digest),
    #[error("survey parameters for {0} are unavailable")]
    ParamsUnavailable(Digest),
    #[error("store unavailable (retryable): {0}")]
    StoreUnavailable(String),
    #[error("no responses to analyse")]
    EmptyAnalysis(Box<ScoreSummary>),
    #[error("analysis already committed")]
    AlreadyAnalyzed,
    #[error("ledger rejected the analysis commitment: {0}")]
    Rejected(Rejection),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Like [`score`], but reports an empty store as `EmptyAnalysis` carrying
/// the `n = 0` summary.
pub fn score_checked(
    store: &QueryStore,
    params: &crate::contract::SurveyParameters,
) -> Result<ScoreSummary, AnalysisError> {
    let summary = score(store, params);
    if store.is_empty() {
        return Err(AnalysisError::EmptyAnalysis(Box::new(summary)));
    }
    Ok(summary)
}
