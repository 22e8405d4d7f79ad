//! One ledger plus one CAS, with the protocol operations composed on top.
//! The CLI and the HTTP service both drive this type, so every state change
//! is reachable the same way from either.

use std::path::PathBuf;

use parking_lot::RwLock;
use thiserror::Error;

use crate::analysis::{build_report, load_params, AnalysisError, AnalysisReport, ReportBundle};
use crate::audit::{full_audit, AuditError, AuditFinding};
use crate::cas::{CasError, CasRead, CasStore, ErasureRequest, Tombstone};
use crate::contract::{
    params_message, CommitmentBody, DeployBody, EligibilityToken, ParamsError, PhaseBody,
    Rejection, SurveyParameters, Transaction, TxBody,
};
use crate::crypto::{hash, Digest, KeyPair};
use crate::encoding::{canonical_decode, canonical_encode};
use crate::ledger::{Ledger, LedgerError, TxReceipt};
use crate::response::{AnswerError, ResponseSet};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("invalid survey parameters: {0}")]
    InvalidParams(#[from] ParamsError),
    #[error("item {0} has not passed stigma review")]
    StigmaGateFailed(String),
    #[error("co-production record {0} is not in the store")]
    CoProductionMissing(Digest),
    #[error("expected {expected} eligibility tokens, got {got}")]
    TokenCountMismatch { expected: u64, got: u64 },
    #[error("rejected: {0}")]
    Rejected(Rejection),
    #[error("invalid answers: {0}")]
    InvalidAnswers(#[from] AnswerError),
    #[error("response blob does not match the committed digest")]
    DigestMismatch,
    #[error("unknown contract {0}")]
    UnknownContract(Digest),
    #[error("no commitment {0} on this contract")]
    UnknownCommitment(Digest),
    #[error("erasure must be requested by the respondent key that committed the response")]
    Unauthorized,
    #[error(transparent)]
    Cas(#[from] CasError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Audit(#[from] AuditError),
}

impl From<Rejection> for NodeError {
    fn from(r: Rejection) -> Self {
        NodeError::Rejected(r)
    }
}

pub type NodeResult<T> = Result<T, NodeError>;

pub fn mint_tokens(count: u64) -> Vec<EligibilityToken> {
    (0..count).map(|_| EligibilityToken::random()).collect()
}

#[derive(Debug)]
pub struct Node {
    ledger: RwLock<Ledger>,
    cas: CasStore,
    ledger_path: Option<PathBuf>,
}

impl Node {
    pub fn new(ledger: Ledger, cas: CasStore) -> Self {
        Self {
            ledger: RwLock::new(ledger),
            cas,
            ledger_path: None,
        }
    }

    /// Opens a node backed by a snapshot file (created on first write) and a
    /// CAS directory.
    pub fn open(ledger_path: impl Into<PathBuf>, cas_dir: impl Into<PathBuf>) -> NodeResult<Self> {
        let ledger_path = ledger_path.into();
        let ledger = if ledger_path.exists() {
            Ledger::restore_from_file(&ledger_path)?
        } else {
            Ledger::new()
        };
        Ok(Self {
            ledger: RwLock::new(ledger),
            cas: CasStore::open(cas_dir)?,
            ledger_path: Some(ledger_path),
        })
    }

    pub fn cas(&self) -> &CasStore {
        &self.cas
    }

    /// Runs `f` with a consistent read view of the ledger.
    pub fn read<T>(&self, f: impl FnOnce(&Ledger) -> T) -> T {
        f(&self.ledger.read())
    }

    /// Serialized write access; the snapshot is rewritten afterwards.
    pub fn write<T>(&self, f: impl FnOnce(&mut Ledger) -> NodeResult<T>) -> NodeResult<T> {
        let mut guard = self.ledger.write();
        let before = guard.len();
        let out = f(&mut guard);
        if guard.len() != before {
            if let Some(path) = &self.ledger_path {
                guard.snapshot_to_file(path)?;
            }
        }
        out
    }

    pub fn persist(&self) -> NodeResult<()> {
        if let Some(path) = &self.ledger_path {
            self.ledger.read().snapshot_to_file(path)?;
        }
        Ok(())
    }

    fn submit(ledger: &mut Ledger, tx: Transaction) -> NodeResult<TxReceipt> {
        Ok(ledger.submit_tx(tx).into_result()?)
    }

    /// Publishes finalized parameters and deploys the contract. Returns the
    /// contract id (the survey id).
    pub fn deploy(
        &self,
        params: &SurveyParameters,
        admin_key: &KeyPair,
        tokens: &[EligibilityToken],
    ) -> NodeResult<Digest> {
        params.validate()?;
        if let Some(item) = params.items.iter().find(|i| !i.stigma_reviewed) {
            return Err(NodeError::StigmaGateFailed(item.item_id.clone()));
        }
        match self.cas.get(&params.coproduction_digest)? {
            CasRead::Blob(_) => {}
            _ => return Err(NodeError::CoProductionMissing(params.coproduction_digest)),
        }
        if tokens.len() as u64 != params.rules.eligibility_token_count {
            return Err(NodeError::TokenCountMismatch {
                expected: params.rules.eligibility_token_count,
                got: tokens.len() as u64,
            });
        }
        let id = params.survey_id;
        let body = DeployBody {
            params_address: Digest::ZERO,
            coproduction_digest: params.coproduction_digest,
            rules: params.rules.clone(),
            token_commitments: tokens.iter().map(|t| t.commitment()).collect(),
            params_signature: admin_key.sign(&params_message(&id)),
        };
        self.write(|ledger| {
            let probe = Transaction::signed(id, TxBody::Deploy(body.clone()), admin_key);
            ledger.dry_run(&probe)?;
            let params_address = self
                .cas
                .put(&canonical_encode(params).expect("params encode"))?;
            let tx = Transaction::signed(
                id,
                TxBody::Deploy(DeployBody {
                    params_address,
                    ..body
                }),
                admin_key,
            );
            Self::submit(ledger, tx)?;
            Ok(id)
        })
    }

    pub fn open_survey(&self, contract_id: &Digest, admin_key: &KeyPair) -> NodeResult<TxReceipt> {
        self.write(|l| {
            Self::submit(l, Transaction::signed(*contract_id, TxBody::Open(PhaseBody {}), admin_key))
        })
    }

    pub fn close_survey(&self, contract_id: &Digest, admin_key: &KeyPair) -> NodeResult<TxReceipt> {
        self.write(|l| {
            Self::submit(l, Transaction::signed(*contract_id, TxBody::Close(PhaseBody {}), admin_key))
        })
    }

    pub fn params(&self, contract_id: &Digest) -> NodeResult<SurveyParameters> {
        self.read(|l| load_params(l, &self.cas, contract_id))
            .map_err(|e| match e {
                AnalysisError::UnknownContract(d) => NodeError::UnknownContract(d),
                other => NodeError::Analysis(other),
            })
    }

    /// Stores a respondent's blob and records the signed commitment. The
    /// blob is only written once the ledger is known to accept the commitment.
    pub fn submit_response(
        &self,
        contract_id: &Digest,
        blob: &[u8],
        commitment: CommitmentBody,
    ) -> NodeResult<TxReceipt> {
        if hash(blob) != commitment.response_digest {
            return Err(NodeError::DigestMismatch);
        }
        let params = self.params(contract_id)?;
        let response: ResponseSet =
            canonical_decode(blob).map_err(|_| NodeError::DigestMismatch)?;
        response.validate(&params)?;
        if response.respondent_public_key != commitment.respondent_public_key {
            return Err(NodeError::Rejected(Rejection::InvalidSignature));
        }
        let tx = Transaction::commitment(*contract_id, commitment);
        self.write(|ledger| {
            ledger.dry_run(&tx)?;
            self.cas.put(blob)?;
            Self::submit(ledger, tx)
        })
    }

    /// Erases a response blob on the respondent's signed request and records
    /// the erasure on-chain. The on-chain commitment itself stays.
    pub fn erase_response(
        &self,
        contract_id: &Digest,
        request: ErasureRequest,
        admin_key: &KeyPair,
    ) -> NodeResult<Tombstone> {
        self.write(|ledger| {
            let state = ledger
                .contract(contract_id)
                .ok_or(NodeError::UnknownContract(*contract_id))?;
            let commitment = state
                .commitment(&request.address)
                .ok_or(NodeError::UnknownCommitment(request.address))?;
            if commitment.respondent_public_key != request.requester_public_key
                || !request.signature_valid()
            {
                return Err(NodeError::Unauthorized);
            }
            let address = request.address;
            let probe = Transaction::signed(
                *contract_id,
                TxBody::RecordErasure(crate::contract::ErasureBody {
                    response_digest: address,
                    tombstone_digest: Digest::ZERO,
                }),
                admin_key,
            );
            ledger.dry_run(&probe)?;
            let tombstone = self
                .cas
                .erase(&address, request, admin_key, ledger.logical_time() + 1)?;
            let tx = Transaction::signed(
                *contract_id,
                TxBody::RecordErasure(crate::contract::ErasureBody {
                    response_digest: address,
                    tombstone_digest: tombstone.digest(),
                }),
                admin_key,
            );
            Self::submit(ledger, tx)?;
            Ok(tombstone)
        })
    }

    pub fn analyze(&self, contract_id: &Digest, admin_key: &KeyPair) -> NodeResult<ReportBundle> {
        self.write(|ledger| Ok(build_report(ledger, &self.cas, contract_id, admin_key)?))
    }

    pub fn audit(
        &self,
        contract_id: &Digest,
        report: Option<&AnalysisReport>,
    ) -> NodeResult<(AuditFinding, String)> {
        Ok(self.read(|l| full_audit(l, &self.cas, contract_id, report))?)
    }

    pub fn advance_clock(&self, ticks: u64) {
        self.ledger.write().advance_clock(ticks);
    }
}
