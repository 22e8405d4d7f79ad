//! Independent verification of a survey run. Uses only ledger reads, CAS
//! reads and the published report; never the administrator's query store.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{load_params, AnalysisReport, ExclusionReason};
use crate::cas::{CasError, CasRead, CasStore};
use crate::contract::{commitment_message, Phase, TxBody, TxKind};
use crate::crypto::{hash, verify, Digest};
use crate::encoding::canonical_decode;
use crate::ledger::Ledger;
use crate::merkle::{merkle_verify, MerkleProof};
use crate::response::ResponseSet;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("no report available for audit")]
    ReportUnavailable,
    #[error("unknown contract {0}")]
    UnknownContract(Digest),
    #[error("contract has not been analysed yet")]
    NotYetAnalyzed,
    #[error("store unavailable: {0}")]
    StoreUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discrepancy {
    ChainBroken,
    Omitted,
    IntegrityFailure,
    SignatureFailure,
    RootMismatch,
    ReportInauthentic,
    UnknownDigestInReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reasons")]
pub enum Verdict {
    Clean,
    Discrepant(Vec<Discrepancy>),
}

impl Verdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, Verdict::Clean)
    }

    pub fn reasons(&self) -> &[Discrepancy] {
        match self {
            Verdict::Clean => &[],
            Verdict::Discrepant(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFinding {
    pub contract_id: Digest,
    /// Ledger length the audit read; results are deterministic for it.
    pub ledger_height: u64,
    pub chain_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_bad_height: Option<u64>,
    pub commitment_count: u64,
    pub analyzed_count: u64,
    pub omitted: Vec<Digest>,
    pub erased: Vec<Digest>,
    pub integrity_failures: Vec<Digest>,
    pub signature_failures: Vec<Digest>,
    /// Authentic blobs that are not valid answer sets; a legitimate exclusion.
    pub invalid_responses: Vec<Digest>,
    /// Digests the report lists that were never committed on-chain.
    pub unknown_in_report: Vec<Digest>,
    pub root_match: bool,
    pub report_authentic: bool,
    pub verdict: Verdict,
}

/// What the auditor itself observes about one committed blob.
enum BlobCheck {
    Valid,
    Integrity,
    Signature,
    Invalid,
}

/// Compares every on-chain commitment against the report's included and
/// excluded lists, re-checks blobs and signatures, and recomputes the root.
pub fn audit_completeness(
    ledger: &Ledger,
    cas: &CasStore,
    contract_id: &Digest,
    report: Option<&AnalysisReport>,
) -> Result<AuditFinding, AuditError> {
    let report = report.ok_or(AuditError::ReportUnavailable)?;
    let state = ledger
        .contract(contract_id)
        .ok_or(AuditError::UnknownContract(*contract_id))?;
    if state.phase != Phase::Analyzed {
        return Err(AuditError::NotYetAnalyzed);
    }
    let chain = ledger.verify_chain();
    let params = load_params(ledger, cas, contract_id).ok();

    let erased_on_chain: BTreeSet<Digest> = ledger
        .read_entries(contract_id, Some(TxKind::RecordErasure))
        .into_iter()
        .filter_map(|(_, tx)| match tx.body {
            TxBody::RecordErasure(b) => Some(b.response_digest),
            _ => None,
        })
        .collect();

    let included: BTreeSet<Digest> = report.body.included_digests.iter().copied().collect();
    let claims: BTreeMap<Digest, ExclusionReason> =
        report.body.excluded.iter().map(|e| (e.digest, e.reason)).collect();

    let mut on_chain = BTreeSet::new();
    let mut omitted = Vec::new();
    let mut erased = Vec::new();
    let mut integrity_failures = Vec::new();
    let mut signature_failures = Vec::new();
    let mut invalid_responses = Vec::new();

    for (_, tx) in ledger.read_entries(contract_id, Some(TxKind::SubmitCommitment)) {
        let TxBody::SubmitCommitment(c) = &tx.body else { continue };
        let d = c.response_digest;
        on_chain.insert(d);

        let sig_ok = c.cas_address == d
            && verify(
                &c.respondent_public_key,
                &commitment_message(contract_id, &d, &c.cas_address),
                &c.respondent_signature,
            );

        if erased_on_chain.contains(&d) {
            erased.push(d);
            if !sig_ok {
                signature_failures.push(d);
            }
            continue;
        }

        let observed = if !sig_ok {
            BlobCheck::Signature
        } else {
            match cas.get(&c.cas_address) {
                Ok(CasRead::Blob(bytes)) if hash(&bytes) == d => {
                    match canonical_decode::<ResponseSet>(&bytes) {
                        Err(_) => BlobCheck::Invalid,
                        Ok(r) if r.respondent_public_key != c.respondent_public_key
                            || r.survey_id != *contract_id =>
                        {
                            BlobCheck::Signature
                        }
                        Ok(r) => match &params {
                            Some(p) if r.validate(p).is_err() => BlobCheck::Invalid,
                            _ => BlobCheck::Valid,
                        },
                    }
                }
                Ok(_) | Err(CasError::IntegrityViolation(_)) => BlobCheck::Integrity,
                Err(e) => return Err(AuditError::StoreUnavailable(e.to_string())),
            }
        };

        match observed {
            BlobCheck::Integrity => integrity_failures.push(d),
            BlobCheck::Signature => signature_failures.push(d),
            BlobCheck::Invalid => invalid_responses.push(d),
            BlobCheck::Valid => {}
        }

        let accounted = if included.contains(&d) {
            true
        } else {
            // An exclusion claim holds only if the auditor sees the same fault.
            match (claims.get(&d), &observed) {
                (Some(ExclusionReason::IntegrityFailure), BlobCheck::Integrity) => true,
                (Some(ExclusionReason::SignatureFailure), BlobCheck::Signature) => true,
                (Some(ExclusionReason::InvalidAnswers), BlobCheck::Invalid) => true,
                _ => false,
            }
        };
        if !accounted {
            omitted.push(d);
        }
    }

    let mut unknown_in_report: Vec<Digest> = included
        .iter()
        .chain(claims.keys())
        .filter(|d| !on_chain.contains(d))
        .copied()
        .collect();
    unknown_in_report.sort();
    unknown_in_report.dedup();
    let duplicate_inclusion = included.len() != report.body.included_digests.len();

    let same_survey = report.body.survey_id == *contract_id;
    let root_match = same_survey
        && state.analysis_root == Some(report.body.analysis_root)
        && report.body.recompute_root() == report.body.analysis_root;
    let report_authentic = same_survey && verify_report_signature(ledger, report);

    let mut reasons = Vec::new();
    if !chain.ok {
        reasons.push(Discrepancy::ChainBroken);
    }
    if !omitted.is_empty() {
        reasons.push(Discrepancy::Omitted);
    }
    if !integrity_failures.is_empty() {
        reasons.push(Discrepancy::IntegrityFailure);
    }
    if !signature_failures.is_empty() {
        reasons.push(Discrepancy::SignatureFailure);
    }
    if !root_match {
        reasons.push(Discrepancy::RootMismatch);
    }
    if !report_authentic {
        reasons.push(Discrepancy::ReportInauthentic);
    }
    if !unknown_in_report.is_empty() || duplicate_inclusion {
        reasons.push(Discrepancy::UnknownDigestInReport);
    }

    Ok(AuditFinding {
        contract_id: *contract_id,
        ledger_height: ledger.len() as u64,
        chain_ok: chain.ok,
        first_bad_height: chain.first_bad_height,
        commitment_count: on_chain.len() as u64,
        analyzed_count: report.body.included_digests.len() as u64,
        omitted,
        erased,
        integrity_failures,
        signature_failures,
        invalid_responses,
        unknown_in_report,
        root_match,
        report_authentic,
        verdict: if reasons.is_empty() {
            Verdict::Clean
        } else {
            Verdict::Discrepant(reasons)
        },
    })
}

/// Checks a respondent's proof against the root committed on-chain.
pub fn verify_inclusion(
    ledger: &Ledger,
    contract_id: &Digest,
    response_digest: &Digest,
    proof: &MerkleProof,
) -> Result<bool, AuditError> {
    let state = ledger
        .contract(contract_id)
        .ok_or(AuditError::UnknownContract(*contract_id))?;
    let root = match (state.phase, state.analysis_root) {
        (Phase::Analyzed, Some(root)) => root,
        _ => return Err(AuditError::NotYetAnalyzed),
    };
    Ok(merkle_verify(&root, response_digest, proof))
}

/// The report is signed by the admin key from the on-chain deployment and
/// its digest is the one committed on-chain.
pub fn verify_report_signature(ledger: &Ledger, report: &AnalysisReport) -> bool {
    let Some(state) = ledger.contract(&report.body.survey_id) else {
        return false;
    };
    state.report_digest == Some(report.report_digest)
        && report.verify_signature(&state.admin_public_key)
}

/// Chain, completeness, root and report-signature checks, plus a
/// plain-language summary for non-technical readers.
pub fn full_audit(
    ledger: &Ledger,
    cas: &CasStore,
    contract_id: &Digest,
    report: Option<&AnalysisReport>,
) -> Result<(AuditFinding, String), AuditError> {
    let finding = audit_completeness(ledger, cas, contract_id, report)?;
    let summary = summarize(&finding);
    Ok((finding, summary))
}

pub fn summarize(f: &AuditFinding) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Audit of survey {}", f.contract_id);
    let _ = writeln!(s, "Ledger read up to height {}.", f.ledger_height);
    match f.first_bad_height {
        None => {
            let _ = writeln!(s, "The ledger is intact: every entry links to the one before it.");
        }
        Some(h) => {
            let _ = writeln!(s, "The ledger has been altered: the chain breaks at entry {h}.");
        }
    }
    let _ = writeln!(
        s,
        "{} responses were recorded on the ledger; the report analysed {}.",
        f.commitment_count, f.analyzed_count
    );
    let mut line = |n: usize, what: &str| {
        if n > 0 {
            let _ = writeln!(s, "{n} {what}");
        }
    };
    line(f.erased.len(), "response(s) were erased at the respondent's request (this is allowed).");
    line(f.invalid_responses.len(), "response(s) were excluded because the submitted answers were not valid.");
    line(f.omitted.len(), "response(s) were left out of the analysis without a valid reason.");
    line(f.integrity_failures.len(), "stored response(s) are missing or no longer match what was recorded.");
    line(f.signature_failures.len(), "response(s) carry a signature that does not check out.");
    line(f.unknown_in_report.len(), "digest(s) in the report were never recorded on the ledger.");
    if !f.root_match {
        let _ = writeln!(s, "The report's summary hash does not match the one recorded on the ledger.");
    }
    if !f.report_authentic {
        let _ = writeln!(s, "The report is not signed by the survey administrator or was changed after signing.");
    }
    match &f.verdict {
        Verdict::Clean => {
            let _ = writeln!(s, "Verdict: CLEAN. Every recorded response is accounted for.");
        }
        Verdict::Discrepant(_) => {
            let _ = writeln!(s, "Verdict: DISCREPANT. See the findings above.");
        }
    }
    s
}
