//! The off-chain query store: one row per (response, item), indexed by item.
//! It is a cache; `ingest` rebuilds it from the ledger and CAS alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cas::{CasError, CasRead, CasStore};
use crate::contract::{Phase, SurveyParameters, TxBody, TxKind};
use crate::crypto::Digest;
use crate::encoding::canonical_decode;
use crate::ledger::Ledger;
use crate::response::ResponseSet;

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub response_digest: Digest,
    pub item_id: String,
    pub value: i64,
    pub dimension: String,
    pub logical_time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Erased,
    IntegrityFailure,
    SignatureFailure,
    /// The committed blob is authentic but is not a valid answer set.
    InvalidAnswers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub digest: Digest,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone)]
pub struct QueryStore {
    survey_id: Digest,
    rows: Vec<Row>,
    responses: Vec<Digest>,
    by_item: BTreeMap<String, Vec<usize>>,
}

impl QueryStore {
    pub fn new(survey_id: Digest) -> Self {
        Self {
            survey_id,
            rows: Vec::new(),
            responses: Vec::new(),
            by_item: BTreeMap::new(),
        }
    }

    pub fn survey_id(&self) -> Digest {
        self.survey_id
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn response_count(&self) -> usize {
        self.responses.len()
    }

    pub fn included(&self) -> &[Digest] {
        &self.responses
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Loads one response; rows follow the survey's item order.
    pub fn insert(&mut self, response: &ResponseSet, digest: Digest, params: &SurveyParameters, time: u64) {
        let idx = self.responses.len();
        self.responses.push(digest);
        for item in &params.items {
            let row = self.rows.len();
            self.rows.push(Row {
                response_digest: digest,
                item_id: item.item_id.clone(),
                value: response.answers[&item.item_id],
                dimension: item.dimension.clone(),
                logical_time: time,
            });
            self.by_item.entry(item.item_id.clone()).or_default().push(row);
        }
        debug_assert_eq!(self.rows.len(), (idx + 1) * params.items.len());
    }

    /// `(response index, value)` pairs for one item, in ledger order.
    pub fn item_values(&self, item_id: &str) -> Vec<(usize, i64)> {
        let Some(rows) = self.by_item.get(item_id) else {
            return Vec::new();
        };
        let mut response_idx = BTreeMap::new();
        for (i, d) in self.responses.iter().enumerate() {
            response_idx.insert(*d, i);
        }
        rows.iter()
            .map(|&r| {
                let row = &self.rows[r];
                (response_idx[&row.response_digest], row.value)
            })
            .collect()
    }
}

/// Result of loading a closed survey's committed responses.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub params: SurveyParameters,
    pub store: QueryStore,
    pub excluded: Vec<Exclusion>,
    /// Ledger length at the time of reading.
    pub ledger_height: u64,
}

/// Fetches and decodes the survey parameters a contract was deployed with.
pub fn load_params(ledger: &Ledger, cas: &CasStore, contract_id: &Digest) -> Result<SurveyParameters, AnalysisError> {
    let state = ledger
        .contract(contract_id)
        .ok_or(AnalysisError::UnknownContract(*contract_id))?;
    let bytes = match cas.get(&state.params_address) {
        Ok(CasRead::Blob(b)) => b,
        Ok(_) | Err(CasError::IntegrityViolation(_)) => {
            return Err(AnalysisError::ParamsUnavailable(*contract_id))
        }
        Err(e) => return Err(AnalysisError::StoreUnavailable(e.to_string())),
    };
    let params: SurveyParameters =
        canonical_decode(&bytes).map_err(|_| AnalysisError::ParamsUnavailable(*contract_id))?;
    if params.compute_id().ok() != Some(*contract_id) {
        return Err(AnalysisError::ParamsUnavailable(*contract_id));
    }
    Ok(params)
}

/// Re-verifies every on-chain commitment for `contract_id` against CAS and
/// loads the valid ones. Deterministic for a given ledger and CAS.
pub fn ingest(ledger: &Ledger, cas: &CasStore, contract_id: &Digest) -> Result<Ingested, AnalysisError> {
    let state = ledger
        .contract(contract_id)
        .ok_or(AnalysisError::UnknownContract(*contract_id))?;
    if !matches!(state.phase, Phase::Closed | Phase::Analyzed) {
        return Err(AnalysisError::WrongPhase(state.phase));
    }
    let params = load_params(ledger, cas, contract_id)?;

    let erased: Vec<Digest> = ledger
        .read_entries(contract_id, Some(TxKind::RecordErasure))
        .into_iter()
        .filter_map(|(_, tx)| match tx.body {
            TxBody::RecordErasure(b) => Some(b.response_digest),
            _ => None,
        })
        .collect();

    let mut store = QueryStore::new(*contract_id);
    let mut excluded = Vec::new();
    for (entry, tx) in ledger.read_entries(contract_id, Some(TxKind::SubmitCommitment)) {
        let TxBody::SubmitCommitment(c) = &tx.body else { continue };
        let digest = c.response_digest;
        let exclude = |excluded: &mut Vec<Exclusion>, reason| excluded.push(Exclusion { digest, reason });

        if erased.contains(&digest) {
            exclude(&mut excluded, ExclusionReason::Erased);
            continue;
        }
        let blob = match cas.get(&c.cas_address) {
            Ok(CasRead::Blob(b)) => b,
            Ok(CasRead::NotFound) | Ok(CasRead::Erased(_)) | Err(CasError::IntegrityViolation(_)) => {
                exclude(&mut excluded, ExclusionReason::IntegrityFailure);
                continue;
            }
            Err(e) => return Err(AnalysisError::StoreUnavailable(e.to_string())),
        };
        if crate::crypto::hash(&blob) != digest {
            exclude(&mut excluded, ExclusionReason::IntegrityFailure);
            continue;
        }
        let response: ResponseSet = match canonical_decode(&blob) {
            Ok(r) => r,
            Err(_) => {
                exclude(&mut excluded, ExclusionReason::InvalidAnswers);
                continue;
            }
        };
        let commitment_ok = crate::crypto::verify(
            &c.respondent_public_key,
            &crate::contract::commitment_message(contract_id, &digest, &c.cas_address),
            &c.respondent_signature,
        );
        if !commitment_ok
            || response.respondent_public_key != c.respondent_public_key
            || response.survey_id != *contract_id
        {
            exclude(&mut excluded, ExclusionReason::SignatureFailure);
            continue;
        }
        if response.validate(&params).is_err() {
            exclude(&mut excluded, ExclusionReason::InvalidAnswers);
            continue;
        }
        store.insert(&response, digest, &params, entry.logical_time);
    }

    Ok(Ingested {
        params,
        store,
        excluded,
        ledger_height: ledger.len() as u64,
    })
}
