//! A respondent's answers and the client-side steps that turn them into a
//! signed commitment: canonical encoding, digest, signature.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{commitment_message, CommitmentBody, EligibilityToken, SurveyParameters};
use crate::crypto::{hash, hex_bytes, Digest, KeyPair, PublicKey};
use crate::encoding::canonical_encode;

hex_bytes!(
    /// Client-chosen randomness so identical answer sets hash differently.
    ClientNonce,
    16
);

impl ClientNonce {
    pub fn random() -> Self {
        Self(rand::random())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub survey_id: Digest,
    pub answers: BTreeMap<String, i64>,
    pub respondent_public_key: PublicKey,
    pub client_nonce: ClientNonce,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnswerError {
    #[error("response is for survey {found}, expected {expected}")]
    WrongSurvey { expected: Digest, found: Digest },
    #[error("item {0} is unanswered")]
    Missing(String),
    #[error("answer for unknown item {0}")]
    UnknownItem(String),
    #[error("item {item}: value {value} outside [{min}, {max}]")]
    OutOfRange {
        item: String,
        value: i64,
        min: i64,
        max: i64,
    },
}

impl ResponseSet {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_encode(self).expect("responses encode")
    }

    pub fn digest(&self) -> Digest {
        hash(&self.canonical_bytes())
    }

    /// Every item answered exactly once, every value on its scale.
    pub fn validate(&self, params: &SurveyParameters) -> Result<(), AnswerError> {
        if self.survey_id != params.survey_id {
            return Err(AnswerError::WrongSurvey {
                expected: params.survey_id,
                found: self.survey_id,
            });
        }
        for item in &params.items {
            let Some(&value) = self.answers.get(&item.item_id) else {
                return Err(AnswerError::Missing(item.item_id.clone()));
            };
            let scale = params.scale_of(item);
            if !scale.contains(value) {
                return Err(AnswerError::OutOfRange {
                    item: item.item_id.clone(),
                    value,
                    min: scale.min,
                    max: scale.max,
                });
            }
        }
        if let Some(extra) = self.answers.keys().find(|k| params.item(k).is_none()) {
            return Err(AnswerError::UnknownItem(extra.clone()));
        }
        Ok(())
    }
}

/// Everything a respondent sends: the blob for storage and the signed
/// commitment for the ledger.
#[derive(Debug, Clone)]
pub struct PreparedSubmission {
    pub response: ResponseSet,
    pub blob: Vec<u8>,
    pub commitment: CommitmentBody,
}

/// Builds and signs a submission locally with the respondent's per-survey key.
pub fn prepare_submission(
    params: &SurveyParameters,
    answers: BTreeMap<String, i64>,
    key: &KeyPair,
    token: EligibilityToken,
    nonce: ClientNonce,
) -> Result<PreparedSubmission, AnswerError> {
    let response = ResponseSet {
        survey_id: params.survey_id,
        answers,
        respondent_public_key: key.public_key(),
        client_nonce: nonce,
    };
    response.validate(params)?;
    Ok(sign_response(response, key, token))
}

/// Signs an already-built response without validating it against a survey.
pub fn sign_response(response: ResponseSet, key: &KeyPair, token: EligibilityToken) -> PreparedSubmission {
    let blob = response.canonical_bytes();
    let digest = hash(&blob);
    let signature = key.sign(&commitment_message(&response.survey_id, &digest, &digest));
    PreparedSubmission {
        commitment: CommitmentBody {
            response_digest: digest,
            cas_address: digest,
            respondent_public_key: key.public_key(),
            respondent_signature: signature,
            eligibility_token: token,
        },
        response,
        blob,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::verify;
    use crate::scenario::{demo_items, likert5, ScenarioConfig};

    fn params() -> SurveyParameters {
        let mut scales = BTreeMap::new();
        scales.insert("agree5".to_string(), likert5());
        SurveyParameters {
            survey_id: Digest::ZERO,
            title: "t".into(),
            items: demo_items(&ScenarioConfig { items: 2, ..ScenarioConfig::default() }),
            scales,
            rules: crate::contract::fixtures::rules(1),
            coproduction_digest: hash(b"c"),
            version: 1,
        }
        .with_computed_id()
        .unwrap()
    }

    fn answers(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn validation_errors() {
        let p = params();
        let key = KeyPair::from_seed(&[1; 32]);
        let tok = EligibilityToken([0; 16]);
        let n = ClientNonce([0; 16]);
        let go = |a| prepare_submission(&p, a, &key, tok, n).map(|_| ());
        assert_eq!(go(answers(&[("q01", 1), ("q02", 5)])), Ok(()));
        assert!(matches!(go(answers(&[("q01", 1)])), Err(AnswerError::Missing(_))));
        assert!(matches!(
            go(answers(&[("q01", 1), ("q02", 6)])),
            Err(AnswerError::OutOfRange { value: 6, .. })
        ));
        assert!(matches!(
            go(answers(&[("q01", 1), ("q02", 2), ("q99", 3)])),
            Err(AnswerError::UnknownItem(_))
        ));
        let mut other = p.clone();
        other.survey_id = hash(b"elsewhere");
        let r = ResponseSet {
            survey_id: p.survey_id,
            answers: answers(&[("q01", 1), ("q02", 1)]),
            respondent_public_key: key.public_key(),
            client_nonce: n,
        };
        assert!(matches!(r.validate(&other), Err(AnswerError::WrongSurvey { .. })));
    }

    #[test]
    fn commitment_binds_blob_and_survey() {
        let p = params();
        let key = KeyPair::from_seed(&[2; 32]);
        let s = prepare_submission(&p, answers(&[("q01", 3), ("q02", 4)]), &key, EligibilityToken([1; 16]), ClientNonce([9; 16])).unwrap();
        assert_eq!(hash(&s.blob), s.commitment.response_digest);
        assert_eq!(s.commitment.cas_address, s.commitment.response_digest);
        assert_eq!(s.response.digest(), s.commitment.response_digest);
        let msg = commitment_message(&p.survey_id, &s.commitment.response_digest, &s.commitment.cas_address);
        assert!(verify(&key.public_key(), &msg, &s.commitment.respondent_signature));
        let other = commitment_message(&hash(b"x"), &s.commitment.response_digest, &s.commitment.cas_address);
        assert!(!verify(&key.public_key(), &other, &s.commitment.respondent_signature));
    }

    #[test]
    fn nonce_separates_identical_answers() {
        let p = params();
        let key = KeyPair::from_seed(&[2; 32]);
        let a = answers(&[("q01", 3), ("q02", 4)]);
        let x = prepare_submission(&p, a.clone(), &key, EligibilityToken([1; 16]), ClientNonce::random()).unwrap();
        let y = prepare_submission(&p, a, &key, EligibilityToken([1; 16]), ClientNonce::random()).unwrap();
        assert_ne!(x.commitment.response_digest, y.commitment.response_digest);
    }
}
