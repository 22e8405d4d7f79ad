//! Store access shared by the CLI and the HTTP service.

use std::fs;
use std::path::{Path, PathBuf};

use codewe_core::analysis::{proofs_for, ProofFile, ReportBundle};
use codewe_core::cas::CasRead;
use codewe_core::contract::{CommitmentBody, ContractState};
use codewe_core::coproduction::CoProductionRecord;
use codewe_core::{
    canonical_decode, hash, AnalysisReport, AuditFinding, Digest, EligibilityToken, Node, Phase,
    PublicKey, Signature, SurveyParameters, TxReceipt,
};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::error::{AppError, AppResult};

pub fn open_node(cfg: &ServiceConfig) -> AppResult<Node> {
    cfg.ensure_dirs().map_err(|e| AppError::Io(cfg.cas.clone(), e))?;
    Ok(Node::open(&cfg.ledger, &cfg.cas)?)
}

pub fn report_dir(reports: &Path, survey: &Digest) -> PathBuf {
    reports.join(survey.to_hex())
}

/// What a respondent's client sends to the submission endpoint. `response`
/// is the canonical text of the signed response set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmissionRequest {
    pub response: String,
    pub signature: Signature,
    pub public_key: PublicKey,
    pub token: EligibilityToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionReceipt {
    pub response_digest: Digest,
    pub height: u64,
    pub entry_digest: Digest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyView {
    pub phase: Phase,
    pub parameters: SurveyParameters,
    pub commitment_count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditView {
    pub finding: AuditFinding,
    pub summary: String,
}

fn contract(node: &Node, survey: &Digest) -> AppResult<ContractState> {
    node.read(|l| l.contract(survey).cloned())
        .ok_or(AppError::Node(codewe_core::NodeError::UnknownContract(*survey)))
}

pub fn survey_view(node: &Node, survey: &Digest) -> AppResult<SurveyView> {
    let state = contract(node, survey)?;
    Ok(SurveyView {
        phase: state.phase,
        parameters: node.params(survey)?,
        commitment_count: state.commitments.len() as u64,
    })
}

/// Stores the blob and records the commitment. The digest and CAS address
/// are recomputed from the blob; nothing is signed on the respondent's behalf.
pub fn submit(node: &Node, survey: &Digest, req: &SubmissionRequest) -> AppResult<SubmissionReceipt> {
    let blob = req.response.as_bytes();
    let digest = hash(blob);
    let commitment = CommitmentBody {
        response_digest: digest,
        cas_address: digest,
        respondent_public_key: req.public_key,
        respondent_signature: req.signature,
        eligibility_token: req.token,
    };
    let receipt = node.submit_response(survey, blob, commitment)?;
    Ok(receipt_of(digest, &receipt))
}

pub fn receipt_of(digest: Digest, receipt: &TxReceipt) -> SubmissionReceipt {
    SubmissionReceipt {
        response_digest: digest,
        height: receipt.height.expect("accepted receipts carry a height"),
        entry_digest: receipt.entry_digest.expect("accepted receipts carry a digest"),
    }
}

/// A report file supplied by the user. It must be canonical.
pub fn load_report_file(path: &Path) -> AppResult<AnalysisReport> {
    let bytes = fs::read(path).map_err(|e| AppError::Io(path.into(), e))?;
    canonical_decode(&bytes).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

/// The report for `survey` as last exported by `analyze`.
pub fn load_report(node: &Node, reports: &Path, survey: &Digest) -> AppResult<AnalysisReport> {
    let state = contract(node, survey)?;
    if state.phase != Phase::Analyzed {
        return Err(AppError::NotYetAnalyzed(*survey));
    }
    let path = report_dir(reports, survey).join("report.json");
    if !path.exists() {
        return Err(AppError::ReportUnavailable(format!(
            "survey {survey} is analysed but no report is stored at {}",
            path.display()
        )));
    }
    let bytes = fs::read(&path).map_err(|e| AppError::Io(path.clone(), e))?;
    canonical_decode(&bytes)
        .map_err(|e| AppError::ReportUnavailable(format!("{}: {e}", path.display())))
}

pub fn proof(node: &Node, reports: &Path, survey: &Digest, digest: &Digest) -> AppResult<ProofFile> {
    let report = load_report(node, reports, survey)?;
    proofs_for(&report.body)
        .into_iter()
        .find(|p| &p.response_digest == digest)
        .ok_or(AppError::Node(codewe_core::NodeError::UnknownCommitment(*digest)))
}

pub fn audit(node: &Node, reports: &Path, survey: &Digest) -> AppResult<AuditView> {
    let report = match load_report(node, reports, survey) {
        Ok(r) => Some(r),
        Err(AppError::ReportUnavailable(_)) => None,
        Err(e) => return Err(e),
    };
    let (finding, summary) = node.audit(survey, report.as_ref())?;
    Ok(AuditView { finding, summary })
}

/// The co-production record a deployed survey points to.
pub fn codesign_record(node: &Node, survey: &Digest) -> AppResult<CoProductionRecord> {
    let state = contract(node, survey)?;
    match node.cas().get(&state.coproduction_digest)? {
        CasRead::Blob(bytes) => canonical_decode(&bytes)
            .map_err(|e| AppError::ReportUnavailable(format!("co-production record: {e}"))),
        _ => Err(AppError::ReportUnavailable(format!(
            "co-production record {} is not in the store",
            state.coproduction_digest
        ))),
    }
}

pub fn analyze(node: &Node, reports: &Path, survey: &Digest, admin: &codewe_core::KeyPair) -> AppResult<ReportBundle> {
    let bundle = node.analyze(survey, admin)?;
    let dir = report_dir(reports, survey);
    bundle
        .export(&dir)
        .map_err(|e| AppError::ReportUnavailable(format!("export to {}: {e}", dir.display())))?;
    Ok(bundle)
}
