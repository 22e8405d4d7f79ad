//! Deterministic inputs for the protocol benchmarks.

use std::collections::BTreeMap;

use codewe_core::analysis::QueryStore;
use codewe_core::contract::{SurveyParameters, SurveyRules};
use codewe_core::response::{ClientNonce, ResponseSet};
use codewe_core::scenario::{demo_items, likert5, ScenarioConfig};
use codewe_core::{hash, Digest, PublicKey};

pub fn leaves(n: usize) -> Vec<Digest> {
    (0..n as u64).map(|i| hash(&i.to_be_bytes())).collect()
}

pub fn params(items: usize, dimensions: usize) -> SurveyParameters {
    let cfg = ScenarioConfig { items, dimensions, ..ScenarioConfig::default() };
    SurveyParameters {
        survey_id: Digest::ZERO,
        title: "bench".into(),
        items: demo_items(&cfg),
        scales: BTreeMap::from([("agree5".to_string(), likert5())]),
        rules: SurveyRules {
            max_responses: 1_000_000,
            open_at: 0,
            close_at: u64::MAX,
            one_response_per_key: true,
            eligibility_token_count: 0,
        },
        coproduction_digest: Digest::ZERO,
        version: 1,
    }
}

/// Response `i` with answers derived from a hash of `i`.
pub fn response(params: &SurveyParameters, i: u64) -> ResponseSet {
    let seed = hash(&i.to_le_bytes());
    let answers = params
        .items
        .iter()
        .enumerate()
        .map(|(k, item)| {
            let s = params.scale_of(item);
            let span = (s.max - s.min + 1) as u8;
            (item.item_id.clone(), s.min + (seed.0[k % 32] % span) as i64)
        })
        .collect();
    ResponseSet {
        survey_id: params.survey_id,
        answers,
        respondent_public_key: PublicKey(hash(&seed.0).0),
        client_nonce: ClientNonce(seed.0[..16].try_into().expect("16 bytes")),
    }
}

pub fn store(params: &SurveyParameters, n: u64) -> QueryStore {
    let mut store = QueryStore::new(params.survey_id);
    for i in 0..n {
        let r = response(params, i);
        store.insert(&r, r.digest(), params, i);
    }
    store
}
