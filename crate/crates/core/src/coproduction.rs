//! Co-design of a survey by a panel of stakeholders, ending in a finalized
//! parameter set whose record is stored off-chain and referenced by digest.
//!
//! Every revision produces a new draft version and clears all sign-offs.
//! Finalization needs zero unresolved stigma flags and a quorum of fresh
//! sign-offs on the latest draft.

use std::collections::{BTreeMap, BTreeSet};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cas::{CasError, CasStore};
use crate::contract::{
    validate_structure, LikertScale, ParamsError, QuestionItem, SurveyParameters, SurveyRules,
};
use crate::crypto::{canonical_digest, verify, Digest, KeyPair, PublicKey, Signature};
use crate::encoding::{canonical_encode, EncodingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Administrator,
    Researcher,
    EmployeeParticipant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stakeholder {
    /// Role pseudonym, e.g. `participant-2`. Never a real name.
    pub stakeholder_id: String,
    pub role: Role,
    pub public_key: PublicKey,
}

/// Sign-off threshold: every listed role must sign, and at least
/// `numerator/denominator` of the panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuorumPolicy {
    pub required_roles: Vec<Role>,
    pub numerator: u64,
    pub denominator: u64,
}

impl Default for QuorumPolicy {
    fn default() -> Self {
        Self {
            required_roles: vec![Role::Administrator, Role::Researcher, Role::EmployeeParticipant],
            numerator: 2,
            denominator: 3,
        }
    }
}

impl QuorumPolicy {
    /// Smallest signer count meeting the fraction, i.e. ceil(n * num / den).
    pub fn required_signers(&self, panel_size: usize) -> u64 {
        (panel_size as u64 * self.numerator).div_ceil(self.denominator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyDraft {
    pub version: u64,
    pub title: String,
    pub items: Vec<QuestionItem>,
    pub scales: BTreeMap<String, LikertScale>,
    pub rules: SurveyRules,
}

impl SurveyDraft {
    pub fn digest(&self) -> Digest {
        canonical_digest(self).expect("drafts encode")
    }

    fn item_index(&self, item_id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.item_id == item_id)
    }
}

/// Fields a proposal may change on an existing item. Absent fields keep
/// their current value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemEdit {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dimension: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scale_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reverse_scored: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Change {
    AddItem { item: QuestionItem },
    EditItem { item_id: String, edit: ItemEdit },
    RemoveItem { item_id: String },
    SetScale { name: String, scale: LikertScale },
    SetTitle { title: String },
    SetRules { rules: SurveyRules },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub proposal_id: u64,
    pub stakeholder_id: String,
    pub change: Change,
    pub rationale: String,
    pub resulting_version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub stakeholder_id: String,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRound {
    pub round: u64,
    /// Record revision at which the round was appended.
    pub logical_time: u64,
    pub draft_version: u64,
    pub entries: Vec<FeedbackEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StigmaFlag {
    pub flag_id: u64,
    pub item_id: String,
    pub raised_by: String,
    pub rationale: String,
    pub raised_at_version: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resolution: Option<u64>,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignOff {
    pub stakeholder_id: String,
    pub draft_version: u64,
    pub signature: Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordStatus {
    InProgress,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoProductionRecord {
    pub record_id: Digest,
    pub stakeholders: Vec<Stakeholder>,
    pub policy: QuorumPolicy,
    pub draft_versions: Vec<SurveyDraft>,
    pub proposals: Vec<Proposal>,
    pub feedback_rounds: Vec<FeedbackRound>,
    pub stigma_flags: Vec<StigmaFlag>,
    pub signoffs: Vec<SignOff>,
    pub status: RecordStatus,
    /// Bumped by every mutation; used for optimistic concurrency.
    pub revision: u64,
}

#[derive(Debug, Error)]
pub enum CoProductionError {
    #[error("stakeholder panel is empty")]
    EmptyPanel,
    #[error("duplicate stakeholder {0}")]
    DuplicateStakeholder(String),
    #[error("{0} is not on the panel")]
    Unauthorized(String),
    #[error("record is finalized")]
    RecordFinalized,
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("item {0} already exists")]
    DuplicateItem(String),
    #[error("unknown stigma flag {0}")]
    UnknownFlag(u64),
    #[error("draft version {0} does not exist")]
    UnknownVersion(u64),
    #[error("flag {flag} was raised at version {raised}; resolution must cite a later version")]
    StaleResolution { flag: u64, raised: u64 },
    #[error("sign-off by {0} does not bind the latest draft")]
    StaleSignOff(String),
    #[error("sign-off signature does not verify")]
    InvalidSignature,
    #[error("{unresolved} stigma flag(s) unresolved")]
    FinalizationBlocked { unresolved: usize },
    #[error("quorum not met: {signed} signed, {required} required, unsigned roles {missing_roles:?}")]
    QuorumNotMet {
        signed: u64,
        required: u64,
        missing_roles: Vec<Role>,
    },
    #[error("draft is not a valid survey: {0}")]
    InvalidDraft(#[from] ParamsError),
    #[error("expected revision {expected}, record is at {actual}")]
    ConflictRetry { expected: u64, actual: u64 },
    #[error("unknown record {0}")]
    UnknownRecord(Digest),
    #[error(transparent)]
    Cas(#[from] CasError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

type Result<T> = std::result::Result<T, CoProductionError>;

/// What a stakeholder signs to approve a draft.
pub fn signoff_message(record_id: &Digest, draft_version: u64, draft_digest: &Digest) -> Vec<u8> {
    canonical_encode(&serde_json::json!({
        "purpose": "codewe/codesign-signoff",
        "record_id": record_id,
        "draft_version": draft_version,
        "draft_digest": draft_digest,
    }))
    .expect("signoff message encodes")
}

/// Starting point of a co-design session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialDraft {
    pub title: String,
    pub items: Vec<QuestionItem>,
    pub scales: BTreeMap<String, LikertScale>,
    pub rules: SurveyRules,
}

pub fn open_codesign(
    initial: InitialDraft,
    stakeholders: Vec<Stakeholder>,
    policy: QuorumPolicy,
) -> Result<CoProductionRecord> {
    if stakeholders.is_empty() {
        return Err(CoProductionError::EmptyPanel);
    }
    let mut ids = BTreeSet::new();
    let mut keys = BTreeSet::new();
    for s in &stakeholders {
        if !ids.insert(s.stakeholder_id.clone()) || !keys.insert(s.public_key) {
            return Err(CoProductionError::DuplicateStakeholder(s.stakeholder_id.clone()));
        }
    }
    let draft = SurveyDraft {
        version: 1,
        title: initial.title,
        items: initial.items,
        scales: initial.scales,
        rules: initial.rules,
    };
    let record_id = canonical_digest(&serde_json::json!({
        "purpose": "codewe/codesign-record",
        "initial_draft": draft,
        "stakeholders": stakeholders,
        "policy": policy,
    }))?;
    Ok(CoProductionRecord {
        record_id,
        stakeholders,
        policy,
        draft_versions: vec![draft],
        proposals: Vec::new(),
        feedback_rounds: Vec::new(),
        stigma_flags: Vec::new(),
        signoffs: Vec::new(),
        status: RecordStatus::InProgress,
        revision: 0,
    })
}

impl CoProductionRecord {
    pub fn latest(&self) -> &SurveyDraft {
        self.draft_versions.last().expect("records always hold a draft")
    }

    pub fn latest_version(&self) -> u64 {
        self.latest().version
    }

    pub fn draft(&self, version: u64) -> Option<&SurveyDraft> {
        self.draft_versions.iter().find(|d| d.version == version)
    }

    pub fn stakeholder(&self, id: &str) -> Option<&Stakeholder> {
        self.stakeholders.iter().find(|s| s.stakeholder_id == id)
    }

    pub fn digest(&self) -> Digest {
        canonical_digest(self).expect("records encode")
    }

    pub fn unresolved_flags(&self) -> usize {
        self.stigma_flags.iter().filter(|f| !f.resolved).count()
    }

    fn ensure_open(&self) -> Result<()> {
        match self.status {
            RecordStatus::InProgress => Ok(()),
            RecordStatus::Finalized => Err(CoProductionError::RecordFinalized),
        }
    }

    fn ensure_member(&self, id: &str) -> Result<&Stakeholder> {
        self.stakeholder(id)
            .ok_or_else(|| CoProductionError::Unauthorized(id.to_string()))
    }

    /// Applies `change` to a copy of the latest draft, appends it as a new
    /// version and invalidates every sign-off. Returns the new version.
    pub fn propose_revision(
        &mut self,
        stakeholder_id: &str,
        change: Change,
        rationale: &str,
    ) -> Result<u64> {
        self.ensure_open()?;
        self.ensure_member(stakeholder_id)?;
        let mut next = self.latest().clone();
        next.version += 1;
        match &change {
            Change::AddItem { item } => {
                if next.item_index(&item.item_id).is_some() {
                    return Err(CoProductionError::DuplicateItem(item.item_id.clone()));
                }
                let mut item = item.clone();
                item.stigma_reviewed = false;
                next.items.push(item);
            }
            Change::EditItem { item_id, edit } => {
                let idx = next
                    .item_index(item_id)
                    .ok_or_else(|| CoProductionError::UnknownItem(item_id.clone()))?;
                let item = &mut next.items[idx];
                if let Some(t) = &edit.text {
                    item.text = t.clone();
                }
                if let Some(d) = &edit.dimension {
                    item.dimension = d.clone();
                }
                if let Some(s) = &edit.scale_ref {
                    item.scale_ref = s.clone();
                }
                if let Some(r) = edit.reverse_scored {
                    item.reverse_scored = r;
                }
            }
            Change::RemoveItem { item_id } => {
                let idx = next
                    .item_index(item_id)
                    .ok_or_else(|| CoProductionError::UnknownItem(item_id.clone()))?;
                next.items.remove(idx);
            }
            Change::SetScale { name, scale } => {
                next.scales.insert(name.clone(), scale.clone());
            }
            Change::SetTitle { title } => next.title = title.clone(),
            Change::SetRules { rules } => next.rules = rules.clone(),
        }
        let version = next.version;
        self.proposals.push(Proposal {
            proposal_id: self.proposals.len() as u64,
            stakeholder_id: stakeholder_id.to_string(),
            change,
            rationale: rationale.to_string(),
            resulting_version: version,
        });
        self.draft_versions.push(next);
        self.signoffs.clear();
        self.revision += 1;
        Ok(version)
    }

    /// Appends a feedback round (append-only). Returns its round number.
    pub fn record_feedback(&mut self, entries: Vec<FeedbackEntry>) -> Result<u64> {
        self.ensure_open()?;
        for e in &entries {
            self.ensure_member(&e.stakeholder_id)?;
        }
        self.revision += 1;
        let round = self.feedback_rounds.len() as u64;
        self.feedback_rounds.push(FeedbackRound {
            round,
            logical_time: self.revision,
            draft_version: self.latest_version(),
            entries,
        });
        Ok(round)
    }

    pub fn flag_stigma(&mut self, stakeholder_id: &str, item_id: &str, rationale: &str) -> Result<u64> {
        self.ensure_open()?;
        self.ensure_member(stakeholder_id)?;
        if self.latest().item_index(item_id).is_none() {
            return Err(CoProductionError::UnknownItem(item_id.to_string()));
        }
        let flag_id = self.stigma_flags.len() as u64;
        self.stigma_flags.push(StigmaFlag {
            flag_id,
            item_id: item_id.to_string(),
            raised_by: stakeholder_id.to_string(),
            rationale: rationale.to_string(),
            raised_at_version: self.latest_version(),
            resolution: None,
            resolved: false,
        });
        self.revision += 1;
        Ok(flag_id)
    }

    /// Marks a flag resolved by a later draft in which the item was revised
    /// (or dropped).
    pub fn resolve_stigma(&mut self, flag_id: u64, revised_version: u64) -> Result<()> {
        self.ensure_open()?;
        let latest = self.latest_version();
        let flag = self
            .stigma_flags
            .iter_mut()
            .find(|f| f.flag_id == flag_id)
            .ok_or(CoProductionError::UnknownFlag(flag_id))?;
        if revised_version > latest {
            return Err(CoProductionError::UnknownVersion(revised_version));
        }
        if revised_version <= flag.raised_at_version {
            return Err(CoProductionError::StaleResolution {
                flag: flag_id,
                raised: flag.raised_at_version,
            });
        }
        flag.resolution = Some(revised_version);
        flag.resolved = true;
        self.revision += 1;
        Ok(())
    }

    /// The message `stakeholder` must sign to approve the latest draft.
    pub fn signoff_payload(&self) -> Vec<u8> {
        let latest = self.latest();
        signoff_message(&self.record_id, latest.version, &latest.digest())
    }

    /// Convenience for callers holding the stakeholder key locally.
    pub fn sign_latest(&self, key: &KeyPair) -> (u64, Signature) {
        (self.latest_version(), key.sign(&self.signoff_payload()))
    }

    pub fn signoff(
        &mut self,
        stakeholder_id: &str,
        draft_version: u64,
        signature: Signature,
    ) -> Result<()> {
        self.ensure_open()?;
        let key = self.ensure_member(stakeholder_id)?.public_key;
        if draft_version != self.latest_version() {
            return Err(CoProductionError::StaleSignOff(stakeholder_id.to_string()));
        }
        if !verify(&key, &self.signoff_payload(), &signature) {
            return Err(CoProductionError::InvalidSignature);
        }
        self.signoffs.retain(|s| s.stakeholder_id != stakeholder_id);
        self.signoffs.push(SignOff {
            stakeholder_id: stakeholder_id.to_string(),
            draft_version,
            signature,
        });
        self.revision += 1;
        Ok(())
    }

    /// Checks every finalization gate without mutating anything.
    pub fn check_finalizable(&self) -> Result<()> {
        self.ensure_open()?;
        let unresolved = self.unresolved_flags();
        if unresolved > 0 {
            return Err(CoProductionError::FinalizationBlocked { unresolved });
        }
        let latest = self.latest();
        validate_structure(&latest.items, &latest.scales)?;
        latest.rules.check().map_err(ParamsError::BadRules)?;
        let payload = self.signoff_payload();
        let mut signers = BTreeSet::new();
        let mut roles = BTreeSet::new();
        for s in &self.signoffs {
            let Some(member) = self.stakeholder(&s.stakeholder_id) else {
                return Err(CoProductionError::Unauthorized(s.stakeholder_id.clone()));
            };
            if s.draft_version != latest.version || !verify(&member.public_key, &payload, &s.signature)
            {
                return Err(CoProductionError::StaleSignOff(s.stakeholder_id.clone()));
            }
            signers.insert(member.stakeholder_id.as_str());
            roles.insert(member.role);
        }
        let missing_roles: Vec<Role> = self
            .policy
            .required_roles
            .iter()
            .filter(|r| !roles.contains(r))
            .copied()
            .collect();
        let required = self.policy.required_signers(self.stakeholders.len());
        if (signers.len() as u64) < required || !missing_roles.is_empty() {
            return Err(CoProductionError::QuorumNotMet {
                signed: signers.len() as u64,
                required,
                missing_roles,
            });
        }
        Ok(())
    }

    /// Seals the record, stores it in `cas` and returns the survey parameters
    /// that reference it.
    pub fn finalize(&mut self, cas: &CasStore) -> Result<(SurveyParameters, Digest)> {
        self.check_finalizable()?;
        let mut sealed = self.clone();
        sealed.status = RecordStatus::Finalized;
        sealed.revision += 1;
        let bytes = canonical_encode(&sealed)?;
        let record_digest = cas.put(&bytes)?;
        let latest = sealed.latest().clone();
        let params = SurveyParameters {
            survey_id: Digest::ZERO,
            title: latest.title,
            items: latest
                .items
                .into_iter()
                .map(|mut i| {
                    i.stigma_reviewed = true;
                    i
                })
                .collect(),
            scales: latest.scales,
            rules: latest.rules,
            coproduction_digest: record_digest,
            version: latest.version,
        }
        .with_computed_id()?;
        *self = sealed;
        Ok((params, record_digest))
    }

    /// Public view without free text or keys.
    pub fn summary(&self) -> CodesignSummary {
        let mut roles_signed: BTreeMap<Role, u64> = BTreeMap::new();
        for s in &self.signoffs {
            if let Some(m) = self.stakeholder(&s.stakeholder_id) {
                *roles_signed.entry(m.role).or_default() += 1;
            }
        }
        let mut panel_roles: BTreeMap<Role, u64> = BTreeMap::new();
        for s in &self.stakeholders {
            *panel_roles.entry(s.role).or_default() += 1;
        }
        CodesignSummary {
            record_id: self.record_id,
            status: self.status,
            latest_version: self.latest_version(),
            version_count: self.draft_versions.len() as u64,
            proposal_count: self.proposals.len() as u64,
            feedback_round_count: self.feedback_rounds.len() as u64,
            flags_total: self.stigma_flags.len() as u64,
            flags_unresolved: self.unresolved_flags() as u64,
            panel_size: self.stakeholders.len() as u64,
            panel_roles,
            signoffs_on_latest: self.signoffs.len() as u64,
            signoffs_required: self.policy.required_signers(self.stakeholders.len()),
            roles_signed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodesignSummary {
    pub record_id: Digest,
    pub status: RecordStatus,
    pub latest_version: u64,
    pub version_count: u64,
    pub proposal_count: u64,
    pub feedback_round_count: u64,
    pub flags_total: u64,
    pub flags_unresolved: u64,
    pub panel_size: u64,
    pub panel_roles: BTreeMap<Role, u64>,
    pub signoffs_on_latest: u64,
    pub signoffs_required: u64,
    pub roles_signed: BTreeMap<Role, u64>,
}

/// In-memory set of records with per-record optimistic versioning.
#[derive(Debug, Default)]
pub struct CodesignStore {
    records: Mutex<BTreeMap<Digest, CoProductionRecord>>,
}

impl CodesignStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, record: CoProductionRecord) -> Digest {
        let id = record.record_id;
        self.records.lock().insert(id, record);
        id
    }

    pub fn get(&self, id: &Digest) -> Option<CoProductionRecord> {
        self.records.lock().get(id).cloned()
    }

    /// Runs `f` against the record if it is still at `expected_revision`.
    /// The record is left untouched when `f` fails.
    pub fn mutate<T>(
        &self,
        id: &Digest,
        expected_revision: u64,
        f: impl FnOnce(&mut CoProductionRecord) -> Result<T>,
    ) -> Result<T> {
        let mut guard = self.records.lock();
        let record = guard.get_mut(id).ok_or(CoProductionError::UnknownRecord(*id))?;
        if record.revision != expected_revision {
            return Err(CoProductionError::ConflictRetry {
                expected: expected_revision,
                actual: record.revision,
            });
        }
        let mut working = record.clone();
        let out = f(&mut working)?;
        *record = working;
        Ok(out)
    }
}
