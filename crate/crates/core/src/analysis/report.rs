use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plots::export_plots;
use super::scoring::{score, ScoreSummary};
use super::store::{ingest, Exclusion};
use super::AnalysisError;
use crate::cas::CasStore;
use crate::contract::{AnalysisBody, Phase, Transaction, TxBody};
use crate::crypto::{hash, verify, Digest, KeyPair, PublicKey, Signature};
use crate::encoding::canonical_encode;
use crate::ledger::Ledger;
use crate::merkle::{merkle_prove, merkle_root, MerkleProof};

/// When nothing is included the committed root is SHA-256 of this (empty)
/// input, the conventional root of an empty tree.
pub const EMPTY_ROOT_INPUT: &[u8] = b"";

/// The deterministic part of a report: everything except the signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBody {
    pub survey_id: Digest,
    /// Response digests analysed, in ledger order. These are the Merkle leaves.
    pub included_digests: Vec<Digest>,
    pub excluded: Vec<Exclusion>,
    pub statistics: ScoreSummary,
    pub analysis_root: Digest,
}

impl ReportBody {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("reports encode")
    }

    pub fn digest(&self) -> Digest {
        hash(&self.canonical_bytes())
    }

    pub fn recompute_root(&self) -> Digest {
        root_over(&self.included_digests)
    }
}

pub(crate) fn root_over(leaves: &[Digest]) -> Digest {
    merkle_root(leaves).unwrap_or_else(|_| hash(EMPTY_ROOT_INPUT))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    #[serde(flatten)]
    pub body: ReportBody,
    pub report_digest: Digest,
    pub admin_signature: Signature,
}

impl AnalysisReport {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("reports encode")
    }

    /// Digest recomputes and the signature verifies under `admin`.
    pub fn verify_signature(&self, admin: &PublicKey) -> bool {
        self.body.digest() == self.report_digest
            && verify(
                admin,
                &report_message(&self.body.survey_id, &self.report_digest),
                &self.admin_signature,
            )
    }
}

pub fn report_message(survey_id: &Digest, report_digest: &Digest) -> Vec<u8> {
    canonical_encode(&serde_json::json!({
        "purpose": "codewe/report",
        "survey_id": survey_id,
        "report_digest": report_digest,
    }))
    .expect("digests encode")
}

pub fn sign_report(body: ReportBody, admin_key: &KeyPair) -> AnalysisReport {
    let report_digest = body.digest();
    AnalysisReport {
        admin_signature: admin_key.sign(&report_message(&body.survey_id, &report_digest)),
        report_digest,
        body,
    }
}

/// A per-respondent inclusion proof as exported next to the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofFile {
    pub survey_id: Digest,
    pub response_digest: Digest,
    pub analysis_root: Digest,
    pub proof: MerkleProof,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub report: AnalysisReport,
    pub proofs: Vec<ProofFile>,
}

impl ReportBundle {
    pub fn proof_for(&self, digest: &Digest) -> Option<&ProofFile> {
        self.proofs.iter().find(|p| &p.response_digest == digest)
    }

    /// Writes `report.json`, the detached `report.sig`, one proof file per
    /// included response under `proofs/`, and charts under `charts/`.
    pub fn export(&self, dir: &Path) -> Result<(), AnalysisError> {
        fs::create_dir_all(dir.join("proofs"))?;
        fs::write(dir.join("report.json"), self.report.canonical_bytes())?;
        fs::write(
            dir.join("report.sig"),
            format!("{}\n", self.report.admin_signature.to_hex()),
        )?;
        for p in &self.proofs {
            fs::write(
                dir.join("proofs").join(format!("{}.json", p.response_digest)),
                canonical_encode(p).expect("proofs encode"),
            )?;
        }
        export_plots(&self.report, &dir.join("charts"))?;
        Ok(())
    }
}

pub fn proofs_for(body: &ReportBody) -> Vec<ProofFile> {
    (0..body.included_digests.len())
        .map(|i| ProofFile {
            survey_id: body.survey_id,
            response_digest: body.included_digests[i],
            analysis_root: body.analysis_root,
            proof: merkle_prove(&body.included_digests, i).expect("index in range"),
        })
        .collect()
}

/// Ingests and scores without touching the ledger. Works on closed or
/// already analysed contracts, so third parties can recompute a report.
pub fn prepare_report(ledger: &Ledger, cas: &CasStore, contract_id: &Digest) -> Result<ReportBody, AnalysisError> {
    let ingested = ingest(ledger, cas, contract_id)?;
    let statistics = score(&ingested.store, &ingested.params);
    let included_digests = ingested.store.included().to_vec();
    Ok(ReportBody {
        survey_id: *contract_id,
        analysis_root: root_over(&included_digests),
        included_digests,
        excluded: ingested.excluded,
        statistics,
    })
}

/// Analyses a closed survey, signs the report, commits root and report
/// digest on-chain, and returns the report with every inclusion proof.
pub fn build_report(
    ledger: &mut Ledger,
    cas: &CasStore,
    contract_id: &Digest,
    admin_key: &KeyPair,
) -> Result<ReportBundle, AnalysisError> {
    let state = ledger
        .contract(contract_id)
        .ok_or(AnalysisError::UnknownContract(*contract_id))?;
    match state.phase {
        Phase::Closed => {}
        Phase::Analyzed => return Err(AnalysisError::AlreadyAnalyzed),
        other => return Err(AnalysisError::WrongPhase(other)),
    }
    let body = prepare_report(ledger, cas, contract_id)?;
    let report = sign_report(body, admin_key);
    let tx = Transaction::signed(
        *contract_id,
        TxBody::CommitAnalysis(AnalysisBody {
            analysis_root: report.body.analysis_root,
            report_digest: report.report_digest,
        }),
        admin_key,
    );
    ledger
        .submit_tx(tx)
        .into_result()
        .map_err(AnalysisError::Rejected)?;
    let proofs = proofs_for(&report.body);
    Ok(ReportBundle { report, proofs })
}
