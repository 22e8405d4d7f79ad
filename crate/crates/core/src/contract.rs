//! The survey contract: on-chain data model and the deterministic
//! state-transition function the ledger executes for every transaction.
//!
//! Lifecycle: `Deployed -> Open -> Closed -> Analyzed`. Only `Deploy`,
//! `Open`, `Close` and `CommitAnalysis` change the phase. Commitments are
//! accepted only while `Open` and inside the half-open window
//! `[open_at, close_at)` of logical time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{canonical_digest, hash_parts, hex_bytes, verify, Digest, PublicKey, Signature};
use crate::encoding::{canonical_encode, EncodingError};

hex_bytes!(
    /// Opaque one-time credential. Carries no identity.
    EligibilityToken,
    16
);

impl EligibilityToken {
    pub fn random() -> Self {
        use rand::RngCore;
        let mut b = [0u8; 16];
        rand::rngs::OsRng.fill_bytes(&mut b);
        Self(b)
    }

    /// The value published on-chain at deploy time; the token itself is only
    /// revealed when it is spent.
    pub fn commitment(&self) -> Digest {
        hash_parts(&[b"codewe/token", &self.0])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertScale {
    pub min: i64,
    pub max: i64,
    /// Either empty or exactly one label per point, `min` first.
    #[serde(default)]
    pub labels: Vec<String>,
}

impl LikertScale {
    pub fn contains(&self, v: i64) -> bool {
        (self.min..=self.max).contains(&v)
    }

    pub fn fold(&self, v: i64) -> i64 {
        self.min + self.max - v
    }

    pub fn points(&self) -> usize {
        (self.max - self.min + 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionItem {
    pub item_id: String,
    pub text: String,
    pub dimension: String,
    pub scale_ref: String,
    #[serde(default)]
    pub reverse_scored: bool,
    #[serde(default)]
    pub stigma_reviewed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRules {
    pub max_responses: u64,
    pub open_at: u64,
    pub close_at: u64,
    pub one_response_per_key: bool,
    pub eligibility_token_count: u64,
}

impl SurveyRules {
    pub fn check(&self) -> Result<(), String> {
        if self.max_responses < 1 {
            return Err("max_responses must be at least 1".into());
        }
        if self.open_at >= self.close_at {
            return Err("open_at must be earlier than close_at".into());
        }
        if !self.one_response_per_key {
            return Err("one_response_per_key is fixed to true".into());
        }
        Ok(())
    }
}

/// The finalized survey definition. `survey_id` is the digest of the
/// canonical encoding of every other field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyParameters {
    pub survey_id: Digest,
    pub title: String,
    pub items: Vec<QuestionItem>,
    pub scales: BTreeMap<String, LikertScale>,
    pub rules: SurveyRules,
    pub coproduction_digest: Digest,
    pub version: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("survey has no items")]
    NoItems,
    #[error("duplicate item id {0}")]
    DuplicateItem(String),
    #[error("item {item} references undefined scale {scale}")]
    UndefinedScale { item: String, scale: String },
    #[error("scale {0} is malformed")]
    BadScale(String),
    #[error("invalid rules: {0}")]
    BadRules(String),
    #[error("version must be at least 1")]
    BadVersion,
    #[error("survey_id does not match the parameters")]
    IdMismatch,
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

impl SurveyParameters {
    /// Digest over every field except `survey_id`.
    pub fn compute_id(&self) -> Result<Digest, EncodingError> {
        let mut tree = serde_json::to_value(self)
            .map_err(|e| EncodingError::EncodingUnsupported(e.to_string()))?;
        tree.as_object_mut().expect("struct").remove("survey_id");
        Ok(crate::crypto::hash(&crate::encoding::encode_value(&tree)?))
    }

    pub fn with_computed_id(mut self) -> Result<Self, EncodingError> {
        self.survey_id = self.compute_id()?;
        Ok(self)
    }

    /// Structural invariants; the id must recompute.
    pub fn validate(&self) -> Result<(), ParamsError> {
        validate_structure(&self.items, &self.scales)?;
        self.rules.check().map_err(ParamsError::BadRules)?;
        if self.version < 1 {
            return Err(ParamsError::BadVersion);
        }
        if self.compute_id()? != self.survey_id {
            return Err(ParamsError::IdMismatch);
        }
        Ok(())
    }

    pub fn item(&self, item_id: &str) -> Option<&QuestionItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn scale_of(&self, item: &QuestionItem) -> &LikertScale {
        &self.scales[&item.scale_ref]
    }
}

pub(crate) fn validate_structure(
    items: &[QuestionItem],
    scales: &BTreeMap<String, LikertScale>,
) -> Result<(), ParamsError> {
    if items.is_empty() {
        return Err(ParamsError::NoItems);
    }
    for (name, s) in scales {
        if s.min >= s.max || (!s.labels.is_empty() && s.labels.len() != s.points()) {
            return Err(ParamsError::BadScale(name.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.item_id.as_str()) {
            return Err(ParamsError::DuplicateItem(item.item_id.clone()));
        }
        if !scales.contains_key(&item.scale_ref) {
            return Err(ParamsError::UndefinedScale {
                item: item.item_id.clone(),
                scale: item.scale_ref.clone(),
            });
        }
    }
    Ok(())
}

/// Message a respondent signs to bind a response to a survey.
pub fn commitment_message(
    survey_id: &Digest,
    response_digest: &Digest,
    cas_address: &Digest,
) -> Vec<u8> {
    canonical_encode(&serde_json::json!({
        "purpose": "codewe/response-commitment",
        "survey_id": survey_id,
        "response_digest": response_digest,
        "cas_address": cas_address,
    }))
    .expect("digests always encode")
}

/// Message the administrator signs to approve a parameter set.
pub fn params_message(survey_id: &Digest) -> Vec<u8> {
    canonical_encode(&serde_json::json!({
        "purpose": "codewe/survey-params",
        "survey_id": survey_id,
    }))
    .expect("digests always encode")
}

/// An accepted response commitment as held in contract state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseCommitment {
    pub response_digest: Digest,
    pub cas_address: Digest,
    pub respondent_public_key: PublicKey,
    pub respondent_signature: Signature,
    pub eligibility_token: EligibilityToken,
    pub logical_time: u64,
}

impl ResponseCommitment {
    pub fn signature_valid(&self, survey_id: &Digest) -> bool {
        verify(
            &self.respondent_public_key,
            &commitment_message(survey_id, &self.response_digest, &self.cas_address),
            &self.respondent_signature,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Deployed,
    Open,
    Closed,
    Analyzed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    pub phase: Phase,
    pub params_digest: Digest,
    pub params_address: Digest,
    pub coproduction_digest: Digest,
    pub admin_public_key: PublicKey,
    pub rules: SurveyRules,
    pub token_commitments: BTreeSet<Digest>,
    pub commitments: Vec<ResponseCommitment>,
    pub used_tokens: BTreeSet<EligibilityToken>,
    pub used_keys: BTreeSet<PublicKey>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub analysis_root: Option<Digest>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report_digest: Option<Digest>,
    pub erasures: Vec<Digest>,
}

impl ContractState {
    pub fn commitment(&self, response_digest: &Digest) -> Option<&ResponseCommitment> {
        self.commitments
            .iter()
            .find(|c| &c.response_digest == response_digest)
    }

    pub fn is_erased(&self, response_digest: &Digest) -> bool {
        self.erasures.contains(response_digest)
    }

    pub fn state_digest(&self) -> Digest {
        canonical_digest(self).expect("contract state always encodes")
    }
}

// ---- transactions ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeployBody {
    pub params_address: Digest,
    pub coproduction_digest: Digest,
    pub rules: SurveyRules,
    pub token_commitments: Vec<Digest>,
    pub params_signature: Signature,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBody {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentBody {
    pub response_digest: Digest,
    pub cas_address: Digest,
    pub respondent_public_key: PublicKey,
    pub respondent_signature: Signature,
    pub eligibility_token: EligibilityToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisBody {
    pub analysis_root: Digest,
    pub report_digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErasureBody {
    pub response_digest: Digest,
    pub tombstone_digest: Digest,
}

/// Kind-specific payload; the serialized `kind` tag selects the schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body")]
pub enum TxBody {
    Deploy(DeployBody),
    Open(PhaseBody),
    SubmitCommitment(CommitmentBody),
    Close(PhaseBody),
    CommitAnalysis(AnalysisBody),
    RecordErasure(ErasureBody),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxKind {
    Deploy,
    Open,
    SubmitCommitment,
    Close,
    CommitAnalysis,
    RecordErasure,
}

impl TxKind {
    pub const ALL: [TxKind; 6] = [
        TxKind::Deploy,
        TxKind::Open,
        TxKind::SubmitCommitment,
        TxKind::Close,
        TxKind::CommitAnalysis,
        TxKind::RecordErasure,
    ];
}

impl TxBody {
    pub fn kind(&self) -> TxKind {
        match self {
            TxBody::Deploy(_) => TxKind::Deploy,
            TxBody::Open(_) => TxKind::Open,
            TxBody::SubmitCommitment(_) => TxKind::SubmitCommitment,
            TxBody::Close(_) => TxKind::Close,
            TxBody::CommitAnalysis(_) => TxKind::CommitAnalysis,
            TxBody::RecordErasure(_) => TxKind::RecordErasure,
        }
    }
}

/// A signed ledger transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub contract_id: Digest,
    #[serde(flatten)]
    pub body: TxBody,
    pub sender_public_key: PublicKey,
    pub sender_signature: Signature,
}

impl Transaction {
    /// Bytes covered by `sender_signature`.
    ///
    /// Administrative transactions sign `{kind, contract_id, body}`. A
    /// `SubmitCommitment` is signed by the respondent over the commitment
    /// message, so a relay can submit it without holding the respondent key.
    pub fn signing_bytes(contract_id: &Digest, body: &TxBody) -> Vec<u8> {
        match body {
            TxBody::SubmitCommitment(c) => {
                commitment_message(contract_id, &c.response_digest, &c.cas_address)
            }
            _ => {
                let mut tree = serde_json::to_value(body).expect("bodies serialize");
                let obj = tree.as_object_mut().expect("tagged enum");
                obj.insert("contract_id".into(), serde_json::json!(contract_id));
                obj.insert("purpose".into(), serde_json::json!("codewe/tx"));
                crate::encoding::encode_value(&tree).expect("bodies encode")
            }
        }
    }

    /// Builds and signs an administrative transaction.
    pub fn signed(contract_id: Digest, body: TxBody, key: &crate::crypto::KeyPair) -> Self {
        let sig = key.sign(&Self::signing_bytes(&contract_id, &body));
        Self {
            contract_id,
            body,
            sender_public_key: key.public_key(),
            sender_signature: sig,
        }
    }

    /// Wraps a respondent-signed commitment; no private key is needed here.
    pub fn commitment(contract_id: Digest, body: CommitmentBody) -> Self {
        Self {
            contract_id,
            sender_public_key: body.respondent_public_key,
            sender_signature: body.respondent_signature,
            body: TxBody::SubmitCommitment(body),
        }
    }

    pub fn kind(&self) -> TxKind {
        self.body.kind()
    }

    pub fn signature_valid(&self) -> bool {
        verify(
            &self.sender_public_key,
            &Self::signing_bytes(&self.contract_id, &self.body),
            &self.sender_signature,
        )
    }
}

/// Why a transaction was refused. Rendered as a stable machine-readable name.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    #[error("InvalidSignature")]
    InvalidSignature,
    #[error("UnknownContract")]
    UnknownContract,
    #[error("DuplicateContract")]
    DuplicateContract,
    #[error("InvalidTransition")]
    InvalidTransition { from: Phase, kind: TxKind },
    #[error("Unauthorized")]
    Unauthorized,
    #[error("SurveyClosed")]
    SurveyClosed,
    #[error("NotYetOpen")]
    NotYetOpen,
    #[error("TokenReplay")]
    TokenReplay,
    #[error("UnknownToken")]
    UnknownToken,
    #[error("DuplicateKey")]
    DuplicateKey,
    #[error("SurveyFull")]
    SurveyFull,
    #[error("AlreadyAnalyzed")]
    AlreadyAnalyzed,
    #[error("UnknownCommitment")]
    UnknownCommitment,
    #[error("AlreadyErased")]
    AlreadyErased,
    #[error("InvalidRules")]
    InvalidRules(String),
    #[error("MalformedBody")]
    MalformedBody(String),
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::InvalidSignature => "InvalidSignature",
            Rejection::UnknownContract => "UnknownContract",
            Rejection::DuplicateContract => "DuplicateContract",
            Rejection::InvalidTransition { .. } => "InvalidTransition",
            Rejection::Unauthorized => "Unauthorized",
            Rejection::SurveyClosed => "SurveyClosed",
            Rejection::NotYetOpen => "NotYetOpen",
            Rejection::TokenReplay => "TokenReplay",
            Rejection::UnknownToken => "UnknownToken",
            Rejection::DuplicateKey => "DuplicateKey",
            Rejection::SurveyFull => "SurveyFull",
            Rejection::AlreadyAnalyzed => "AlreadyAnalyzed",
            Rejection::UnknownCommitment => "UnknownCommitment",
            Rejection::AlreadyErased => "AlreadyErased",
            Rejection::InvalidRules(_) => "InvalidRules",
            Rejection::MalformedBody(_) => "MalformedBody",
        }
    }
}

/// Validates `tx` against current contract state and applies it if legal.
/// Nothing is mutated when an error is returned.
///
/// The envelope signature is checked by the ledger before this runs.
pub fn execute(
    contracts: &mut BTreeMap<Digest, ContractState>,
    tx: &Transaction,
    logical_time: u64,
) -> Result<(), Rejection> {
    let id = tx.contract_id;
    if let TxBody::Deploy(body) = &tx.body {
        if contracts.contains_key(&id) {
            return Err(Rejection::DuplicateContract);
        }
        let state = deploy_state(id, body, &tx.sender_public_key)?;
        contracts.insert(id, state);
        return Ok(());
    }

    let state = contracts.get_mut(&id).ok_or(Rejection::UnknownContract)?;
    match &tx.body {
        TxBody::Deploy(_) => unreachable!(),
        TxBody::SubmitCommitment(body) => {
            let commitment = check_commitment(state, &id, tx, body, logical_time)?;
            state.used_tokens.insert(commitment.eligibility_token);
            state.used_keys.insert(commitment.respondent_public_key);
            state.commitments.push(commitment);
            Ok(())
        }
        admin_body => {
            if tx.sender_public_key != state.admin_public_key {
                return Err(Rejection::Unauthorized);
            }
            let invalid = |from: Phase| Rejection::InvalidTransition {
                from,
                kind: admin_body.kind(),
            };
            match admin_body {
                TxBody::Open(_) => {
                    if state.phase != Phase::Deployed {
                        return Err(invalid(state.phase));
                    }
                    state.phase = Phase::Open;
                }
                TxBody::Close(_) => {
                    if state.phase != Phase::Open {
                        return Err(invalid(state.phase));
                    }
                    state.phase = Phase::Closed;
                }
                TxBody::CommitAnalysis(body) => {
                    match state.phase {
                        Phase::Closed => {}
                        Phase::Analyzed => return Err(Rejection::AlreadyAnalyzed),
                        other => return Err(invalid(other)),
                    }
                    state.phase = Phase::Analyzed;
                    state.analysis_root = Some(body.analysis_root);
                    state.report_digest = Some(body.report_digest);
                }
                TxBody::RecordErasure(body) => {
                    if state.commitment(&body.response_digest).is_none() {
                        return Err(Rejection::UnknownCommitment);
                    }
                    if state.is_erased(&body.response_digest) {
                        return Err(Rejection::AlreadyErased);
                    }
                    state.erasures.push(body.response_digest);
                }
                TxBody::Deploy(_) | TxBody::SubmitCommitment(_) => unreachable!(),
            }
            Ok(())
        }
    }
}

fn deploy_state(
    id: Digest,
    body: &DeployBody,
    admin: &PublicKey,
) -> Result<ContractState, Rejection> {
    body.rules.check().map_err(Rejection::InvalidRules)?;
    if !verify(admin, &params_message(&id), &body.params_signature) {
        return Err(Rejection::InvalidSignature);
    }
    let token_commitments: BTreeSet<Digest> = body.token_commitments.iter().copied().collect();
    if token_commitments.len() != body.token_commitments.len()
        || token_commitments.len() as u64 != body.rules.eligibility_token_count
    {
        return Err(Rejection::MalformedBody(
            "token commitments must be distinct and match eligibility_token_count".into(),
        ));
    }
    Ok(ContractState {
        phase: Phase::Deployed,
        params_digest: id,
        params_address: body.params_address,
        coproduction_digest: body.coproduction_digest,
        admin_public_key: *admin,
        rules: body.rules.clone(),
        token_commitments,
        commitments: Vec::new(),
        used_tokens: BTreeSet::new(),
        used_keys: BTreeSet::new(),
        analysis_root: None,
        report_digest: None,
        erasures: Vec::new(),
    })
}

fn check_commitment(
    state: &ContractState,
    id: &Digest,
    tx: &Transaction,
    body: &CommitmentBody,
    logical_time: u64,
) -> Result<ResponseCommitment, Rejection> {
    if state.phase != Phase::Open {
        return Err(Rejection::SurveyClosed);
    }
    if logical_time < state.rules.open_at {
        return Err(Rejection::NotYetOpen);
    }
    if logical_time >= state.rules.close_at {
        return Err(Rejection::SurveyClosed);
    }
    if body.cas_address != body.response_digest {
        return Err(Rejection::MalformedBody(
            "cas_address must equal response_digest".into(),
        ));
    }
    if tx.sender_public_key != body.respondent_public_key
        || tx.sender_signature != body.respondent_signature
    {
        return Err(Rejection::MalformedBody(
            "envelope must carry the respondent key and signature".into(),
        ));
    }
    if !verify(
        &body.respondent_public_key,
        &commitment_message(id, &body.response_digest, &body.cas_address),
        &body.respondent_signature,
    ) {
        return Err(Rejection::InvalidSignature);
    }
    if state.commitments.len() as u64 >= state.rules.max_responses {
        return Err(Rejection::SurveyFull);
    }
    if state.used_tokens.contains(&body.eligibility_token) {
        return Err(Rejection::TokenReplay);
    }
    if !state
        .token_commitments
        .contains(&body.eligibility_token.commitment())
    {
        return Err(Rejection::UnknownToken);
    }
    if state.used_keys.contains(&body.respondent_public_key) {
        return Err(Rejection::DuplicateKey);
    }
    Ok(ResponseCommitment {
        response_digest: body.response_digest,
        cas_address: body.cas_address,
        respondent_public_key: body.respondent_public_key,
        respondent_signature: body.respondent_signature,
        eligibility_token: body.eligibility_token,
        logical_time,
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::crypto::{hash, KeyPair};

    pub fn key(n: u8) -> KeyPair {
        KeyPair::from_seed(&[n; 32])
    }

    pub fn token(n: u16) -> EligibilityToken {
        let mut b = [0u8; 16];
        b[..2].copy_from_slice(&n.to_be_bytes());
        EligibilityToken(b)
    }

    pub fn rules(tokens: u64) -> SurveyRules {
        SurveyRules {
            max_responses: 1_000,
            open_at: 0,
            close_at: 1_000_000,
            one_response_per_key: true,
            eligibility_token_count: tokens,
        }
    }

    pub fn contract_id(n: u8) -> Digest {
        hash(&[b'c', n])
    }

    pub fn deploy_tx(id: Digest, admin: &KeyPair, rules: SurveyRules) -> Transaction {
        let token_commitments = (0..rules.eligibility_token_count as u16)
            .map(|i| token(i).commitment())
            .collect();
        Transaction::signed(
            id,
            TxBody::Deploy(DeployBody {
                params_address: hash(b"params"),
                coproduction_digest: hash(b"codesign"),
                rules,
                token_commitments,
                params_signature: admin.sign(&params_message(&id)),
            }),
            admin,
        )
    }

    pub fn commit_tx(id: Digest, respondent: &KeyPair, tok: EligibilityToken, payload: &[u8]) -> Transaction {
        let d = hash(payload);
        Transaction::commitment(
            id,
            CommitmentBody {
                response_digest: d,
                cas_address: d,
                respondent_public_key: respondent.public_key(),
                respondent_signature: respondent.sign(&commitment_message(&id, &d, &d)),
                eligibility_token: tok,
            },
        )
    }

    pub fn admin_tx(id: Digest, admin: &KeyPair, kind: TxKind, target: Digest) -> Transaction {
        let body = match kind {
            TxKind::Open => TxBody::Open(PhaseBody {}),
            TxKind::Close => TxBody::Close(PhaseBody {}),
            TxKind::CommitAnalysis => TxBody::CommitAnalysis(AnalysisBody {
                analysis_root: hash(b"root"),
                report_digest: hash(b"report"),
            }),
            TxKind::RecordErasure => TxBody::RecordErasure(ErasureBody {
                response_digest: target,
                tombstone_digest: hash(b"tombstone"),
            }),
            TxKind::Deploy | TxKind::SubmitCommitment => panic!("not an admin phase tx"),
        };
        Transaction::signed(id, body, admin)
    }
}
