//! Acceptance criteria 1 to 8. Each test writes one PASS/FAIL line straight
//! to stderr so the lines show up even when test output is captured.
//!
//! Run: `cargo test -p codewe-core --test acceptance`

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use codewe_core::analysis::{
    prepare_report, score, sign_report, AnalysisReport, Exclusion, ExclusionReason, QueryStore,
    ReportBody,
};
use codewe_core::audit::{audit_completeness, verify_report_signature, Discrepancy};
use codewe_core::cas::{CasError, CasRead};
use codewe_core::contract::{
    commitment_message, params_message, AnalysisBody, CommitmentBody, DeployBody, ErasureBody,
    LikertScale, PhaseBody, QuestionItem, SurveyRules, TxBody,
};
use codewe_core::encoding::canonical_decode;
use codewe_core::ledger::inspect_snapshot;
use codewe_core::merkle::{merkle_prove, merkle_root, merkle_verify};
use codewe_core::response::ClientNonce;
use codewe_core::scenario::{Scenario, ScenarioConfig};
use codewe_core::{
    canonical_encode, hash, keygen, sign, verify, Digest, EligibilityToken, ErasureRequest,
    KeyPair, Ledger, Phase, Rejection, ResponseSet, SurveyParameters, Transaction, TxKind,
};
use common::{naive_score, reference_root};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn criterion(n: u8, title: &str, body: impl FnOnce() -> String) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let took = start.elapsed();
    let line = match &outcome {
        Ok(detail) => format!("criterion {n} PASS  {title}: {detail} [{took:.2?}]"),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            format!("criterion {n} FAIL  {title}: {msg}")
        }
    };
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    if let Err(e) = outcome {
        std::panic::resume_unwind(e);
    }
}

fn closed_scenario(dir: &Path, respondents: usize, seed: u64) -> Scenario {
    let cfg = ScenarioConfig { respondents, seed, ..ScenarioConfig::default() };
    let mut s = Scenario::setup(dir, &cfg).unwrap();
    s.submit_all().unwrap();
    s.close().unwrap();
    s
}

fn commit_report(ledger: &mut Ledger, report: &AnalysisReport, admin: &KeyPair) {
    let tx = Transaction::signed(
        report.body.survey_id,
        TxBody::CommitAnalysis(AnalysisBody {
            analysis_root: report.body.analysis_root,
            report_digest: report.report_digest,
        }),
        admin,
    );
    ledger.submit_tx(tx).into_result().unwrap();
}

#[test]
fn criterion_1_end_to_end_honest_run() {
    criterion(1, "end-to-end honest scenario", || {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let cfg = ScenarioConfig::default();
        let (s, bundle) = Scenario::run_honest(dir.path(), &cfg).unwrap();
        let (finding, summary) = s.node.audit(&s.survey_id(), Some(&bundle.report)).unwrap();
        let took = start.elapsed();

        assert_eq!(s.panel.len(), 3);
        assert_eq!(s.record.stigma_flags.len(), 1);
        assert!(s.record.stigma_flags[0].resolved);
        assert_eq!(s.params.items.len(), 10);
        assert_eq!(s.respondents.len(), 100);
        assert!(finding.verdict.is_clean(), "{summary}");
        assert_eq!(finding.commitment_count, 100);
        assert_eq!(finding.analyzed_count, 100);

        let responses: Vec<ResponseSet> = s.respondents.iter().map(|r| r.response.clone()).collect();
        assert_eq!(bundle.report.body.statistics, naive_score(&s.params, &responses));
        let root = s.node.read(|l| l.contract(&s.survey_id()).unwrap().analysis_root).unwrap();
        for r in &s.respondents {
            let p = bundle.proof_for(&r.digest).unwrap();
            assert!(merkle_verify(&root, &r.digest, &p.proof));
        }
        assert!(took.as_secs_f64() < 30.0, "took {took:?}");
        format!("audit Clean, 100/100 included, runtime {took:.2?} (< 30 s)")
    });
}

#[test]
fn criterion_2_omission_detection() {
    criterion(2, "omission detection over every subset of 10", || {
        let dir = tempfile::tempdir().unwrap();
        let s = closed_scenario(dir.path(), 10, 2);
        let id = s.survey_id();
        let base = s.node.read(|l| l.clone());
        let cas = s.node.cas();
        let honest = prepare_report(&base, cas, &id).unwrap();
        assert_eq!(honest.included_digests.len(), 10);

        let mut detected = 0;
        let mut false_positives = 0;
        for mask in 0u32..1024 {
            let dropped: BTreeSet<Digest> = (0..10)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| s.respondents[i].digest)
                .collect();
            let mut store = QueryStore::new(id);
            for r in s.respondents.iter().filter(|r| !dropped.contains(&r.digest)) {
                store.insert(&r.response, r.digest, &s.params, 0);
            }
            let included = store.included().to_vec();
            // Odd masks also claim a fault for the dropped responses.
            let excluded = if mask % 2 == 1 {
                dropped
                    .iter()
                    .map(|d| Exclusion { digest: *d, reason: ExclusionReason::IntegrityFailure })
                    .collect()
            } else {
                Vec::new()
            };
            let mut body = ReportBody {
                survey_id: id,
                included_digests: included,
                excluded,
                statistics: score(&store, &s.params),
                analysis_root: Digest::ZERO,
            };
            body.analysis_root = body.recompute_root();
            let report = sign_report(body, &s.admin);
            let mut ledger = base.clone();
            commit_report(&mut ledger, &report, &s.admin);
            let f = audit_completeness(&ledger, cas, &id, Some(&report)).unwrap();
            let omitted: BTreeSet<Digest> = f.omitted.iter().copied().collect();
            assert_eq!(omitted, dropped, "mask {mask:010b}");
            if dropped.is_empty() {
                if !f.verdict.is_clean() {
                    false_positives += 1;
                }
            } else {
                assert_eq!(f.verdict.reasons(), &[Discrepancy::Omitted], "mask {mask:010b}");
                detected += 1;
            }
        }
        assert_eq!(false_positives, 0);
        assert_eq!(detected, 1023);
        "1023/1023 non-empty drops detected with exact omitted sets, 0 false positives".into()
    });
}

fn flip(bytes: &mut [u8], rng: &mut impl Rng, range: std::ops::Range<usize>) {
    let pos = rng.gen_range(range);
    bytes[pos] ^= 1 << rng.gen_range(0..8);
}

#[test]
fn criterion_3_tamper_detection() {
    criterion(3, "single-bit tamper detection", || {
        const N: usize = 1000;
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig { respondents: 20, seed: 3, ..ScenarioConfig::default() };
        let (s, bundle) = Scenario::run_honest(dir.path(), &cfg).unwrap();
        let id = s.survey_id();
        let cas = s.node.cas();
        let ledger = s.node.read(|l| l.clone());
        let mut rng = ChaCha20Rng::seed_from_u64(33);

        // honest controls
        assert!(audit_completeness(&ledger, cas, &id, Some(&bundle.report)).unwrap().verdict.is_clean());
        assert!(inspect_snapshot(&ledger.snapshot_bytes()).1.ok);
        assert!(verify_report_signature(&ledger, &bundle.report));

        // (a) CAS blobs
        let mut cas_hits = 0;
        let mut audited = 0;
        for i in 0..N {
            let r = &s.respondents[i % s.respondents.len()];
            let path = cas.object_path(&r.digest);
            let original = std::fs::read(&path).unwrap();
            let mut bytes = original.clone();
            let len = bytes.len();
            flip(&mut bytes, &mut rng, 0..len);
            std::fs::write(&path, &bytes).unwrap();
            if matches!(cas.get(&r.digest), Err(CasError::IntegrityViolation(_))) {
                cas_hits += 1;
            }
            if i % 100 == 0 {
                let f = audit_completeness(&ledger, cas, &id, Some(&bundle.report)).unwrap();
                assert_eq!(f.integrity_failures, vec![r.digest]);
                assert!(f.verdict.reasons().contains(&Discrepancy::IntegrityFailure));
                audited += 1;
            }
            std::fs::write(&path, &original).unwrap();
            assert_eq!(cas.get(&r.digest).unwrap(), CasRead::Blob(original));
        }
        assert_eq!(cas_hits, N);

        // (b) ledger entries, with the snapshot footer recomputed so only the
        // chain itself can give the change away
        let snapshot = ledger.snapshot_bytes();
        let body_len = snapshot.len() - 32;
        let mut ledger_hits = 0;
        for _ in 0..N {
            let mut bytes = snapshot[..body_len].to_vec();
            flip(&mut bytes, &mut rng, 0..body_len);
            let footer = hash(&bytes);
            bytes.extend_from_slice(footer.as_bytes());
            let (footer_ok, verdict) = inspect_snapshot(&bytes);
            assert!(footer_ok);
            if !verdict.ok && Ledger::restore_from_bytes(&bytes).is_err() {
                ledger_hits += 1;
            }
        }
        assert_eq!(ledger_hits, N);

        // (c) report bodies
        let body_bytes = bundle.report.body.canonical_bytes();
        let mut report_hits = 0;
        let mut decodable = 0;
        for i in 0..N {
            let mut bytes = body_bytes.clone();
            flip(&mut bytes, &mut rng, 0..body_bytes.len());
            let Ok(body) = canonical_decode::<ReportBody>(&bytes) else {
                report_hits += 1;
                continue;
            };
            decodable += 1;
            let forged = AnalysisReport { body, ..bundle.report.clone() };
            let authentic = verify_report_signature(&ledger, &forged);
            let clean = i % 10 == 0
                && audit_completeness(&ledger, cas, &id, Some(&forged))
                    .map(|f| f.verdict.is_clean())
                    .unwrap_or(false);
            if !authentic && !clean {
                report_hits += 1;
            }
        }
        assert_eq!(report_hits, N);

        // (d) Merkle proof siblings
        let root = bundle.report.body.analysis_root;
        let mut proof_hits = 0;
        for _ in 0..N {
            let p = &bundle.proofs[rng.gen_range(0..bundle.proofs.len())];
            assert!(merkle_verify(&root, &p.response_digest, &p.proof));
            let mut proof = p.proof.clone();
            let k = rng.gen_range(0..proof.siblings.len());
            let mut sib = *proof.siblings[k].as_bytes();
            flip(&mut sib, &mut rng, 0..32);
            proof.siblings[k] = Digest::from_slice(&sib).unwrap();
            if !merkle_verify(&root, &p.response_digest, &proof) {
                proof_hits += 1;
            }
        }
        assert_eq!(proof_hits, N);

        format!(
            "CAS {cas_hits}/{N} (+{audited} audits), ledger {ledger_hits}/{N}, \
             report {report_hits}/{N} ({decodable} decodable), proofs {proof_hits}/{N}; controls pass"
        )
    });
}

// FIPS 180-2 appendix B and the long-message vector.
const SHA256_VECTORS: [(&str, &str); 4] = [
    ("", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
    ("abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
    (
        "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1",
    ),
    (
        "abcdefghbcdefghicdefghijdefghijkefghijklfghijklmghijklmnhijklmnoijklmnopjklmnopqklmnopqrlmnopqrsmnopqrstnopqrstu",
        "cf5b16a778af8380036ce59e7b0492370b249b11e8f07a51afac45037afee9d1",
    ),
];

// RFC 8032 section 7.1, tests 1 to 3: secret, public, message, signature.
const ED25519_VECTORS: [(&str, &str, &str, &str); 3] = [
    (
        "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
        "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a",
        "",
        "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b",
    ),
    (
        "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
        "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c",
        "72",
        "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00",
    ),
    (
        "c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7",
        "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025",
        "af82",
        "6291d657deec24024827e69c3abe01a30ce548a284743a445e3680d7db5ac3ac18ff9b538d16f290ae67f760984dc6594a7c15e9716ed28dc027beceea1ec40a",
    ),
];

#[test]
fn criterion_4_crypto_conformance() {
    criterion(4, "crypto conformance", || {
        for (msg, digest) in SHA256_VECTORS {
            assert_eq!(hash(msg.as_bytes()).to_hex(), digest);
        }
        assert_eq!(
            hash(&vec![b'a'; 1_000_000]).to_hex(),
            "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0"
        );
        for (sk, pk, msg, sig) in ED25519_VECTORS {
            let sk = hex::decode(sk).unwrap();
            let msg = hex::decode(msg).unwrap();
            let kp = keygen(Some(&sk)).unwrap();
            assert_eq!(kp.public_key().to_hex(), pk);
            let s = sign(&sk, &msg).unwrap();
            assert_eq!(s.to_hex(), sig);
            assert!(verify(&kp.public_key(), &msg, &s));
            let mut bad = msg.clone();
            bad.push(0);
            assert!(!verify(&kp.public_key(), &bad, &s));
        }

        let mut proofs = 0usize;
        let mut perturbations = 0usize;
        for n in 1..=64usize {
            let leaves: Vec<Digest> = (0..n as u32).map(|i| hash(&i.to_be_bytes())).collect();
            let root = merkle_root(&leaves).unwrap();
            assert_eq!(root.as_bytes(), &reference_root(&leaves));
            for i in 0..n {
                let proof = merkle_prove(&leaves, i).unwrap();
                assert!(merkle_verify(&root, &leaves[i], &proof), "n={n} i={i}");
                proofs += 1;
                for k in 0..proof.siblings.len() {
                    let mut bad = proof.clone();
                    let mut b = *bad.siblings[k].as_bytes();
                    b[(i + k) % 32] ^= 1 << (k % 8);
                    bad.siblings[k] = Digest::from_slice(&b).unwrap();
                    assert!(!merkle_verify(&root, &leaves[i], &bad), "n={n} i={i} k={k}");
                    perturbations += 1;
                }
            }
        }
        format!(
            "{} SHA-256 + 3 Ed25519 vectors bit-exact; {proofs} Merkle proofs verified, \
             {perturbations} sibling perturbations rejected",
            SHA256_VECTORS.len() + 1
        )
    });
}

#[test]
fn criterion_5_replay_determinism() {
    criterion(5, "replay determinism", || {
        let mut checked = 0;
        for (seed, respondents) in [(5u64, 30usize), (6, 1), (7, 12)] {
            let cfg = ScenarioConfig { respondents, seed, ..ScenarioConfig::default() };
            let run = || {
                let dir = tempfile::tempdir().unwrap();
                let (s, _) = Scenario::run_honest(dir.path(), &cfg).unwrap();
                let ledger = s.node.read(|l| l.clone());
                let body = prepare_report(&ledger, s.node.cas(), &s.survey_id()).unwrap();
                let replayed = Ledger::restore_from_bytes(&ledger.snapshot_bytes()).unwrap();
                let replay_body = prepare_report(&replayed, s.node.cas(), &s.survey_id()).unwrap();
                (
                    ledger.snapshot_bytes(),
                    canonical_encode(ledger.contracts()).unwrap(),
                    canonical_encode(replayed.contracts()).unwrap(),
                    body.canonical_bytes(),
                    replay_body.canonical_bytes(),
                )
            };
            let a = run();
            let b = run();
            assert_eq!(a.0, b.0, "snapshot bytes differ across runs");
            assert_eq!(a.1, b.1, "contract state differs across runs");
            assert_eq!(a.1, a.2, "replay from genesis changed contract state");
            assert_eq!(a.3, b.3, "report body differs across runs");
            assert_eq!(a.3, a.4, "report body differs after replay");
            checked += 1;
        }
        format!("{checked} ledgers: byte-identical state and report bodies across 2 runs and after replay")
    });
}

fn random_survey(rng: &mut impl Rng) -> SurveyParameters {
    let mut scales = BTreeMap::new();
    for s in 0..rng.gen_range(1..=3) {
        let min = rng.gen_range(-5..=2);
        let max = min + rng.gen_range(1..=10);
        scales.insert(format!("scale{s}"), LikertScale { min, max, labels: vec![] });
    }
    let names: Vec<String> = scales.keys().cloned().collect();
    let dims = rng.gen_range(1..=4);
    let items = (0..rng.gen_range(1..=20))
        .map(|i| QuestionItem {
            item_id: format!("i{i}"),
            text: format!("item {i}"),
            dimension: format!("d{}", rng.gen_range(0..dims)),
            scale_ref: names[rng.gen_range(0..names.len())].clone(),
            reverse_scored: rng.gen_bool(0.4),
            stigma_reviewed: true,
        })
        .collect();
    SurveyParameters {
        survey_id: Digest::ZERO,
        title: "random".into(),
        items,
        scales,
        rules: SurveyRules {
            max_responses: 100,
            open_at: 0,
            close_at: 10,
            one_response_per_key: true,
            eligibility_token_count: 100,
        },
        coproduction_digest: hash(b"c"),
        version: 1,
    }
    .with_computed_id()
    .unwrap()
}

#[test]
fn criterion_6_scoring_oracle() {
    criterion(6, "scoring against a naive oracle", || {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let key = KeyPair::from_seed(&[6; 32]);
        let mut values = 0usize;
        for _ in 0..200 {
            let params = random_survey(&mut rng);
            let n = rng.gen_range(0..=100);
            let responses: Vec<ResponseSet> = (0..n)
                .map(|_| ResponseSet {
                    survey_id: params.survey_id,
                    answers: params
                        .items
                        .iter()
                        .map(|i| {
                            let s = &params.scales[&i.scale_ref];
                            (i.item_id.clone(), rng.gen_range(s.min..=s.max))
                        })
                        .collect(),
                    respondent_public_key: key.public_key(),
                    client_nonce: ClientNonce(rng.gen()),
                })
                .collect();
            let mut store = QueryStore::new(params.survey_id);
            for r in &responses {
                r.validate(&params).unwrap();
                store.insert(r, r.digest(), &params, 0);
            }
            assert_eq!(score(&store, &params), naive_score(&params, &responses));
            values += n * params.items.len();
        }
        format!("200 surveys, {values} answers, all statistics equal at 4 decimals")
    });
}

#[test]
fn criterion_7_erasure() {
    criterion(7, "GDPR erasure path", || {
        let n = 10;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for m in 0..=n {
            for after_analysis in [false, true] {
                if after_analysis && m == 0 {
                    continue;
                }
                let dir = tempfile::tempdir().unwrap();
                let s = closed_scenario(dir.path(), n, 70 + m as u64);
                let id = s.survey_id();
                let mut idx: Vec<usize> = (0..n).collect();
                for i in 0..n {
                    idx.swap(i, rng.gen_range(i..n));
                }
                let victims: BTreeSet<Digest> = idx[..m].iter().map(|&i| s.respondents[i].digest).collect();

                let erase = || {
                    for &i in &idx[..m] {
                        let r = &s.respondents[i];
                        let req = ErasureRequest::new(r.digest, &r.key);
                        s.node.erase_response(&id, req, &s.admin).unwrap();
                    }
                };
                let bundle = if after_analysis {
                    let b = s.analyze().unwrap();
                    erase();
                    b
                } else {
                    erase();
                    s.analyze().unwrap()
                };

                let (f, summary) = s.node.audit(&id, Some(&bundle.report)).unwrap();
                assert!(f.verdict.is_clean(), "m={m}: {summary}");
                assert_eq!(f.erased.iter().copied().collect::<BTreeSet<_>>(), victims);
                if !after_analysis {
                    let excluded: BTreeSet<Digest> = bundle
                        .report
                        .body
                        .excluded
                        .iter()
                        .map(|e| {
                            assert_eq!(e.reason, ExclusionReason::Erased);
                            e.digest
                        })
                        .collect();
                    assert_eq!(excluded, victims);
                    assert_eq!(bundle.report.body.included_digests.len(), n - m);
                    assert!(bundle.report.body.included_digests.iter().all(|d| !victims.contains(d)));
                }
                for &i in &idx[..m] {
                    let r = &s.respondents[i];
                    assert!(matches!(s.node.cas().get(&r.digest).unwrap(), CasRead::Erased(_)));
                    assert!(!s.node.cas().object_path(&r.digest).exists());
                    assert!(matches!(
                        s.node.cas().put(&r.response.canonical_bytes()),
                        Err(CasError::AlreadyErased(_))
                    ));
                }
                let leftovers = scan_for(dir.path(), &s, &idx[..m]);
                assert_eq!(leftovers, 0, "erased bytes still on disk");
            }
        }
        "m = 0..=10 of 10, erased before and after analysis: blobs gone, audit Clean, exactly m excluded".into()
    });
}

/// Counts files under `root` that still contain any erased blob.
fn scan_for(root: &Path, s: &Scenario, victims: &[usize]) -> usize {
    let needles: Vec<Vec<u8>> = victims.iter().map(|&i| s.respondents[i].response.canonical_bytes()).collect();
    let mut hits = 0;
    let mut stack = vec![root.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in std::fs::read_dir(&p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                stack.push(e);
            } else {
                let bytes = std::fs::read(&e).unwrap();
                if needles.iter().any(|n| bytes.windows(n.len()).any(|w| w == n.as_slice())) {
                    hits += 1;
                }
            }
        }
    }
    hits
}

// ---- criterion 8 ----------------------------------------------------------

fn token(i: u8) -> EligibilityToken {
    EligibilityToken([i; 16])
}

fn deploy(id: Digest, admin: &KeyPair) -> Transaction {
    Transaction::signed(
        id,
        TxBody::Deploy(DeployBody {
            params_address: hash(b"params"),
            coproduction_digest: hash(b"record"),
            rules: SurveyRules {
                max_responses: 10,
                open_at: 0,
                close_at: 1_000,
                one_response_per_key: true,
                eligibility_token_count: 4,
            },
            token_commitments: (0..4).map(|i| token(i).commitment()).collect(),
            params_signature: admin.sign(&params_message(&id)),
        }),
        admin,
    )
}

fn commitment(id: Digest, seed: u8, tok: u8) -> Transaction {
    let k = KeyPair::from_seed(&[seed; 32]);
    let d = hash(&[seed]);
    Transaction::commitment(
        id,
        CommitmentBody {
            response_digest: d,
            cas_address: d,
            respondent_public_key: k.public_key(),
            respondent_signature: k.sign(&commitment_message(&id, &d, &d)),
            eligibility_token: token(tok),
        },
    )
}

fn tx_for(kind: TxKind, id: Digest, key: &KeyPair) -> Transaction {
    let body = match kind {
        TxKind::Deploy => return deploy(id, key),
        TxKind::SubmitCommitment => return commitment(id, 201, 1),
        TxKind::Open => TxBody::Open(PhaseBody {}),
        TxKind::Close => TxBody::Close(PhaseBody {}),
        TxKind::CommitAnalysis => TxBody::CommitAnalysis(AnalysisBody {
            analysis_root: hash(b"root"),
            report_digest: hash(b"report"),
        }),
        TxKind::RecordErasure => TxBody::RecordErasure(ErasureBody {
            response_digest: hash(&[200]),
            tombstone_digest: hash(b"tomb"),
        }),
    };
    Transaction::signed(id, body, key)
}

fn ledger_at(phase: Phase, id: Digest, admin: &KeyPair) -> Ledger {
    let mut l = Ledger::new();
    l.submit_tx(deploy(id, admin)).into_result().unwrap();
    let path = [
        (Phase::Open, TxKind::Open),
        (Phase::Closed, TxKind::Close),
        (Phase::Analyzed, TxKind::CommitAnalysis),
    ];
    for (p, k) in path {
        if phase < p {
            break;
        }
        l.submit_tx(tx_for(k, id, admin)).into_result().unwrap();
        if p == Phase::Open {
            l.submit_tx(commitment(id, 200, 0)).into_result().unwrap();
        }
    }
    assert_eq!(l.contract(&id).unwrap().phase, phase);
    l
}

fn expected(phase: Phase, kind: TxKind) -> Result<Phase, Rejection> {
    let invalid = Err(Rejection::InvalidTransition { from: phase, kind });
    match (kind, phase) {
        (TxKind::Deploy, _) => Err(Rejection::DuplicateContract),
        (TxKind::Open, Phase::Deployed) => Ok(Phase::Open),
        (TxKind::Open, _) => invalid,
        (TxKind::SubmitCommitment, Phase::Open) => Ok(Phase::Open),
        (TxKind::SubmitCommitment, _) => Err(Rejection::SurveyClosed),
        (TxKind::Close, Phase::Open) => Ok(Phase::Closed),
        (TxKind::Close, _) => invalid,
        (TxKind::CommitAnalysis, Phase::Closed) => Ok(Phase::Analyzed),
        (TxKind::CommitAnalysis, Phase::Analyzed) => Err(Rejection::AlreadyAnalyzed),
        (TxKind::CommitAnalysis, _) => invalid,
        (TxKind::RecordErasure, Phase::Deployed) => Err(Rejection::UnknownCommitment),
        (TxKind::RecordErasure, p) => Ok(p),
    }
}

#[test]
fn criterion_8_state_machine_exhaustion() {
    criterion(8, "state-machine exhaustion", || {
        let admin = KeyPair::from_seed(&[1; 32]);
        let id = hash(b"survey");
        let phases = [Phase::Deployed, Phase::Open, Phase::Closed, Phase::Analyzed];
        let mut phase_changes = BTreeSet::new();
        let mut rejected = 0;

        // Deploy on a fresh id is the transition into Deployed.
        let mut fresh = Ledger::new();
        assert!(fresh.submit_tx(deploy(id, &admin)).is_accepted());
        assert_eq!(fresh.contract(&id).unwrap().phase, Phase::Deployed);
        phase_changes.insert((None, TxKind::Deploy));

        for phase in phases {
            for kind in TxKind::ALL {
                let mut l = ledger_at(phase, id, &admin);
                let before = (l.digest_sequence(), l.contracts().clone());
                let receipt = l.submit_tx(tx_for(kind, id, &admin));
                match expected(phase, kind) {
                    Ok(next) => {
                        assert!(receipt.is_accepted(), "{phase:?} x {kind:?}: {receipt:?}");
                        assert_eq!(l.len(), before.0.len() + 1);
                        let now = l.contract(&id).unwrap().phase;
                        assert_eq!(now, next);
                        if now != phase {
                            phase_changes.insert((Some(phase), kind));
                        }
                    }
                    Err(e) => {
                        assert_eq!(receipt.rejection(), Some(&e), "{phase:?} x {kind:?}");
                        assert_eq!((l.digest_sequence(), l.contracts().clone()), before);
                        rejected += 1;
                    }
                }

                // Any admin kind from a non-admin key: Unauthorized, nothing changes.
                if !matches!(kind, TxKind::Deploy | TxKind::SubmitCommitment) {
                    let mut rng = ChaCha20Rng::seed_from_u64(phase as u64 * 10 + kind as u64);
                    let mut l = ledger_at(phase, id, &admin);
                    let before = l.digest_sequence();
                    for _ in 0..25 {
                        let intruder = KeyPair::from_seed(&rng.gen());
                        let r = l.submit_tx(tx_for(kind, id, &intruder));
                        assert_eq!(r.rejection(), Some(&Rejection::Unauthorized));
                    }
                    assert_eq!(l.digest_sequence(), before);
                }
            }
        }
        let legal: BTreeSet<_> = [
            (None, TxKind::Deploy),
            (Some(Phase::Deployed), TxKind::Open),
            (Some(Phase::Open), TxKind::Close),
            (Some(Phase::Closed), TxKind::CommitAnalysis),
        ]
        .into_iter()
        .collect();
        assert_eq!(phase_changes, legal);
        format!(
            "24 phase x kind pairs: 4 phase transitions, {rejected} documented rejections with \
             unchanged digest sequence, 400 non-admin attempts refused"
        )
    });
}
