#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use codewe_cli::app::SubmissionRequest;
use codewe_cli::service::{router, AppState, RateLimiter};
use codewe_core::response::{prepare_submission, ClientNonce};
use codewe_core::scenario::{Scenario, ScenarioConfig};
use codewe_core::{Digest, KeyPair, SurveyParameters};
use sha2::{Digest as _, Sha256};
use tower::ServiceExt;

pub struct Fixture {
    pub state: Arc<AppState>,
    pub app: Router,
    pub admin: KeyPair,
    pub params: SurveyParameters,
    pub tokens: Vec<codewe_core::EligibilityToken>,
    pub survey: Digest,
}

/// A deployed, open survey served from `dir`, with nothing submitted yet.
pub fn fixture(dir: &Path, respondents: usize, rate_limit: u32) -> Fixture {
    let cfg = ScenarioConfig { respondents, items: 4, dimensions: 2, ..ScenarioConfig::default() };
    let s = Scenario::setup(&dir.join("cas"), &cfg).unwrap();
    let survey = s.survey_id();
    let state = Arc::new(AppState {
        node: s.node,
        reports: dir.join("reports"),
        limiter: RateLimiter::per_minute(rate_limit),
    });
    Fixture {
        app: router(state.clone()),
        state,
        admin: s.admin,
        params: s.params,
        tokens: s.tokens,
        survey,
    }
}

pub fn answers(params: &SurveyParameters, seed: i64) -> BTreeMap<String, i64> {
    params
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let s = params.scale_of(item);
            (item.item_id.clone(), s.min + (seed + i as i64).rem_euclid(s.max - s.min + 1))
        })
        .collect()
}

/// Client side: encode, sign and package a submission.
pub fn submission(f: &Fixture, respondent: u8, token: usize) -> (SubmissionRequest, KeyPair) {
    let key = KeyPair::from_seed(&[respondent; 32]);
    let p = prepare_submission(
        &f.params,
        answers(&f.params, respondent as i64),
        &key,
        f.tokens[token],
        ClientNonce([respondent; 16]),
    )
    .unwrap();
    (
        SubmissionRequest {
            response: String::from_utf8(p.blob).unwrap(),
            signature: p.commitment.respondent_signature,
            public_key: p.commitment.respondent_public_key,
            token: f.tokens[token],
        },
        key,
    )
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, serde_json::Value, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let json = serde_json::from_str(&text).unwrap_or(serde_json::Value::Null);
    (status, json, text)
}

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

fn split(n: u64) -> u64 {
    let mut k = 1;
    while k * 2 < n {
        k *= 2;
    }
    k
}

fn climb(index: u64, size: u64, leaf: [u8; 32], siblings: &[[u8; 32]]) -> Option<[u8; 32]> {
    if size == 1 {
        return siblings.is_empty().then_some(leaf);
    }
    let (top, rest) = siblings.split_last()?;
    let k = split(size);
    Some(if index < k {
        sha256(&[&[1], &climb(index, k, leaf, rest)?, top])
    } else {
        sha256(&[&[1], top, &climb(index - k, size - k, leaf, rest)?])
    })
}

/// Recursive inclusion check over raw JSON, sharing no code with the core.
pub fn independent_verify(proof_json: &serde_json::Value, root_hex: &str) -> bool {
    let hexbytes = |v: &serde_json::Value| -> [u8; 32] {
        hex::decode(v.as_str().unwrap()).unwrap().try_into().unwrap()
    };
    let leaf = hexbytes(&proof_json["response_digest"]);
    let p = &proof_json["proof"];
    let index = p["leaf_index"].as_u64().unwrap();
    let size = p["tree_size"].as_u64().unwrap();
    if index >= size {
        return false;
    }
    let siblings: Vec<[u8; 32]> = p["siblings"].as_array().unwrap().iter().map(hexbytes).collect();
    let leaf_hash = sha256(&[&[0], &leaf]);
    climb(index, size, leaf_hash, &siblings).map(hex::encode).as_deref() == Some(root_hex)
}
