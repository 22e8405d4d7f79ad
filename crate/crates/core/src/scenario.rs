//! A complete, seeded survey run for demos, benchmarks and end-to-end tests:
//! co-design, deploy, submissions, close, analysis.

use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::analysis::ReportBundle;
use crate::cas::CasStore;
use crate::contract::{EligibilityToken, LikertScale, QuestionItem, SurveyParameters, SurveyRules};
use crate::coproduction::{
    open_codesign, Change, CoProductionRecord, FeedbackEntry, InitialDraft, ItemEdit, QuorumPolicy,
    Role, Stakeholder,
};
use crate::crypto::{Digest, KeyPair};
use crate::ledger::{Ledger, TxReceipt, WallClock};
use crate::node::{Node, NodeResult};
use crate::response::{prepare_submission, ClientNonce, ResponseSet};

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub items: usize,
    pub dimensions: usize,
    pub respondents: usize,
    /// Every `reverse_every`-th item is reverse scored (0 disables).
    pub reverse_every: usize,
    pub max_responses: u64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            items: 10,
            dimensions: 3,
            respondents: 100,
            reverse_every: 4,
            max_responses: 1_000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Respondent {
    pub key: KeyPair,
    pub token: EligibilityToken,
    pub response: ResponseSet,
    pub digest: Digest,
}

pub struct Scenario {
    pub node: Node,
    pub admin: KeyPair,
    pub panel: Vec<(Stakeholder, KeyPair)>,
    pub record: CoProductionRecord,
    pub params: SurveyParameters,
    pub tokens: Vec<EligibilityToken>,
    pub respondents: Vec<Respondent>,
    rng: StdRng,
}

pub fn likert5() -> LikertScale {
    LikertScale {
        min: 1,
        max: 5,
        labels: [
            "Strongly disagree",
            "Disagree",
            "Neutral",
            "Agree",
            "Strongly agree",
        ]
        .map(String::from)
        .to_vec(),
    }
}

pub fn demo_items(cfg: &ScenarioConfig) -> Vec<QuestionItem> {
    (0..cfg.items)
        .map(|i| QuestionItem {
            item_id: format!("q{:02}", i + 1),
            text: format!("Statement {} about how work feels this month.", i + 1),
            dimension: format!("dimension-{}", i % cfg.dimensions.max(1) + 1),
            scale_ref: "agree5".into(),
            reverse_scored: cfg.reverse_every > 0 && (i + 1) % cfg.reverse_every == 0,
            stigma_reviewed: false,
        })
        .collect()
}

fn key_from(rng: &mut StdRng) -> KeyPair {
    KeyPair::from_seed(&rng.gen())
}

impl Scenario {
    /// Co-designs (one stigma flag raised and resolved, full quorum),
    /// deploys and opens the survey. The ledger's wall clock is pinned so two
    /// runs with the same seed are byte-identical.
    pub fn setup(cas_dir: &Path, cfg: &ScenarioConfig) -> NodeResult<Self> {
        let mut rng = StdRng::seed_from_u64(cfg.seed);
        let cas = CasStore::open(cas_dir)?;
        let node = Node::new(Ledger::with_wall_clock(WallClock::Fixed(1_700_000_000)), cas);

        let roles = [
            ("admin-1", Role::Administrator),
            ("researcher-1", Role::Researcher),
            ("participant-1", Role::EmployeeParticipant),
        ];
        let panel: Vec<(Stakeholder, KeyPair)> = roles
            .iter()
            .map(|(id, role)| {
                let key = key_from(&mut rng);
                (
                    Stakeholder {
                        stakeholder_id: id.to_string(),
                        role: *role,
                        public_key: key.public_key(),
                    },
                    key,
                )
            })
            .collect();
        let admin = panel[0].1.clone();

        let mut scales = BTreeMap::new();
        scales.insert("agree5".to_string(), likert5());
        let initial = InitialDraft {
            title: "Workplace well-being pulse".into(),
            items: demo_items(cfg),
            scales,
            rules: SurveyRules {
                max_responses: cfg.max_responses,
                open_at: 0,
                close_at: 1_000_000,
                one_response_per_key: true,
                eligibility_token_count: cfg.respondents as u64,
            },
        };
        let mut record = open_codesign(
            initial,
            panel.iter().map(|(s, _)| s.clone()).collect(),
            QuorumPolicy::default(),
        )
        .expect("demo panel is valid");

        let flag = record
            .flag_stigma("participant-1", "q01", "Wording implies the respondent is failing.")
            .expect("q01 exists");
        let version = record
            .propose_revision(
                "participant-1",
                Change::EditItem {
                    item_id: "q01".into(),
                    edit: ItemEdit {
                        text: Some("Statement 1, reworded neutrally by the panel.".into()),
                        ..ItemEdit::default()
                    },
                },
                "Neutral framing encourages honest answers.",
            )
            .expect("panel member");
        record.resolve_stigma(flag, version).expect("later version");
        record
            .record_feedback(vec![FeedbackEntry {
                stakeholder_id: "researcher-1".into(),
                comment: "Revised wording reads well.".into(),
            }])
            .expect("panel member");
        for (s, key) in &panel {
            let (v, sig) = record.sign_latest(key);
            record.signoff(&s.stakeholder_id, v, sig).expect("fresh signoff");
        }
        let (params, _) = record.finalize(node.cas()).expect("quorum met");

        let tokens: Vec<EligibilityToken> =
            (0..cfg.respondents).map(|_| EligibilityToken(rng.gen())).collect();
        let id = node.deploy(&params, &admin, &tokens)?;
        node.open_survey(&id, &admin)?;

        Ok(Self {
            node,
            admin,
            panel,
            record,
            params,
            tokens,
            respondents: Vec::new(),
            rng,
        })
    }

    pub fn survey_id(&self) -> Digest {
        self.params.survey_id
    }

    /// Draws random answers for one respondent and submits them with the
    /// next unused token.
    pub fn submit_next(&mut self) -> NodeResult<TxReceipt> {
        let key = key_from(&mut self.rng);
        let token = self.tokens[self.respondents.len()];
        let answers: BTreeMap<String, i64> = self
            .params
            .items
            .iter()
            .map(|i| {
                let s = self.params.scale_of(i);
                (i.item_id.clone(), self.rng.gen_range(s.min..=s.max))
            })
            .collect();
        let nonce = ClientNonce(self.rng.gen());
        let prepared = prepare_submission(&self.params, answers, &key, token, nonce)
            .expect("generated answers are valid");
        let receipt =
            self.node
                .submit_response(&self.params.survey_id, &prepared.blob, prepared.commitment.clone())?;
        self.respondents.push(Respondent {
            key,
            token,
            digest: prepared.commitment.response_digest,
            response: prepared.response,
        });
        Ok(receipt)
    }

    pub fn submit_all(&mut self) -> NodeResult<()> {
        while self.respondents.len() < self.tokens.len() {
            self.submit_next()?;
        }
        Ok(())
    }

    pub fn close(&self) -> NodeResult<TxReceipt> {
        self.node.close_survey(&self.survey_id(), &self.admin)
    }

    pub fn analyze(&self) -> NodeResult<ReportBundle> {
        self.node.analyze(&self.survey_id(), &self.admin)
    }

    /// setup, all submissions, close, analyze.
    pub fn run_honest(cas_dir: &Path, cfg: &ScenarioConfig) -> NodeResult<(Self, ReportBundle)> {
        let mut s = Self::setup(cas_dir, cfg)?;
        s.submit_all()?;
        s.close()?;
        let bundle = s.analyze()?;
        Ok((s, bundle))
    }
}
