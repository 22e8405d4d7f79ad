//! Command tree. Every command is a thin wrapper over `codewe_core`
//! operations and the store helpers in [`crate::app`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use codewe_core::analysis::{prepare_report, proofs_for, sign_report, ReportBundle};
use codewe_core::audit::verify_inclusion;
use codewe_core::cas::CasRead;
use codewe_core::coproduction::{
    open_codesign, Change, CoProductionRecord, FeedbackEntry, InitialDraft, QuorumPolicy,
    Stakeholder,
};
use codewe_core::ledger::inspect_snapshot;
use codewe_core::response::{prepare_submission, ClientNonce};
use codewe_core::{
    canonical_decode, canonical_encode, keygen, Digest, EligibilityToken, ErasureRequest, KeyPair,
    Node, SurveyParameters,
};
use serde::Serialize;
use serde_json::json;

use crate::app::{self, SubmissionRequest};
use crate::config::ServiceConfig;
use crate::error::{AppError, AppResult, EXIT_DISCREPANT, EXIT_OK, EXIT_VERIFY_FAILED};
use crate::keys::{read_key, read_restricted_key, write_key, write_private};
use crate::service::{self, AppState, RateLimiter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "codewe", version, about = "Co-produced, verifiable well-being surveys")]
pub struct Cli {
    /// Directory holding the default stores and key files.
    #[arg(long, global = true, env = "CODEWE_HOME", default_value = ".codewe")]
    pub home: PathBuf,
    /// Key-value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ledger snapshot file.
    #[arg(long, global = true)]
    pub ledger: Option<PathBuf>,
    /// CAS directory.
    #[arg(long, global = true)]
    pub cas: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub output: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an Ed25519 key file (mode 0600) and print its public key.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        /// 32-byte seed as hex, for reproducible keys.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Co-design sessions.
    #[command(subcommand)]
    Codesign(CodesignCmd),
    /// Publish finalized parameters and deploy the survey contract.
    Deploy {
        #[arg(long)]
        params: PathBuf,
        /// Token file from `tokens mint`; defaults to the configured one.
        #[arg(long)]
        tokens: Option<PathBuf>,
    },
    /// Open a deployed survey for responses.
    Open { survey: Digest },
    /// Close an open survey.
    Close { survey: Digest },
    /// Eligibility tokens.
    #[command(subcommand)]
    Tokens(TokensCmd),
    /// Sign and submit a response locally, as the web client would.
    Respond {
        survey: Digest,
        /// JSON object mapping item ids to integer answers.
        #[arg(long)]
        answers: PathBuf,
        /// Respondent key file from `keygen`.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        token: EligibilityToken,
    },
    /// Analyse a closed survey, commit the root and export the report.
    Analyze { survey: Digest },
    /// Signed reports and inclusion proofs.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Completeness and integrity audit. Exit 0 clean, 2 discrepant, 3 unavailable.
    Audit {
        survey: Digest,
        /// Report file to audit instead of the stored one.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Ledger snapshot checks.
    #[command(subcommand)]
    Ledger(LedgerCmd),
    /// Content-addressed store.
    #[command(subcommand)]
    Cas(CasCmd),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CodesignCmd {
    /// Start a session from an initial draft and a stakeholder panel.
    Open {
        #[arg(long)]
        draft: PathBuf,
        /// JSON array of stakeholders.
        #[arg(long)]
        panel: PathBuf,
        /// Quorum policy; all roles plus two thirds when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Propose a change to the latest draft.
    Propose {
        record: Digest,
        #[arg(long = "as")]
        stakeholder: String,
        /// JSON change: add_item, edit_item or remove_item.
        #[arg(long)]
        change: PathBuf,
        #[arg(long)]
        rationale: String,
    },
    /// Record one feedback round.
    Feedback {
        record: Digest,
        /// `stakeholder-id=comment`, repeatable.
        #[arg(long = "entry", required = true)]
        entries: Vec<String>,
    },
    /// Flag an item as potentially stigmatizing.
    Flag {
        record: Digest,
        #[arg(long = "as")]
        stakeholder: String,
        #[arg(long)]
        item: String,
        #[arg(long)]
        rationale: String,
    },
    /// Resolve a flag by citing the draft version that addresses it.
    Resolve {
        record: Digest,
        #[arg(long)]
        flag: u64,
        #[arg(long)]
        version: u64,
    },
    /// Sign the latest draft with a stakeholder key.
    Signoff {
        record: Digest,
        #[arg(long = "as")]
        stakeholder: String,
        #[arg(long)]
        key: PathBuf,
    },
    /// Seal the record and write the survey parameters.
    Finalize {
        record: Digest,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the public summary, or the whole record with `--full`.
    Show {
        record: Digest,
        #[arg(long)]
        full: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum TokensCmd {
    /// Generate tokens into a private file, one hex token per line.
    Mint {
        #[arg(long)]
        count: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a distribution file pairing the survey id with each token.
    Export {
        survey: Digest,
        #[arg(long)]
        tokens: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReportCmd {
    /// Write report.json, report.sig, proofs/ and charts/ to a directory.
    Export {
        survey: Digest,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check one response's inclusion proof against the on-chain root.
    VerifyInclusion { survey: Digest, digest: Digest },
}

#[derive(Debug, Subcommand)]
pub enum LedgerCmd {
    /// Check a snapshot's checksum and hash chain. Exit 1 names the first bad height.
    Verify { file: Option<PathBuf> },
}

#[derive(Debug, Subcommand)]
pub enum CasCmd {
    Put { file: PathBuf },
    Get {
        address: Digest,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Respondent side: sign an erasure request for one's own response.
    EraseRequest {
        address: Digest,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Administrator side: execute a signed erasure request.
    Erase {
        survey: Digest,
        #[arg(long)]
        request: PathBuf,
    },
}

/// What a command produced: a value for `--output json`, lines for text,
/// and the exit code.
pub struct Outcome {
    pub exit: u8,
    pub json: serde_json::Value,
    pub text: String,
}

impl Outcome {
    fn ok<T: Serialize>(value: &T, text: impl Into<String>) -> AppResult<Self> {
        Ok(Self {
            exit: EXIT_OK,
            json: serde_json::to_value(value).map_err(|e| AppError::Input(e.to_string()))?,
            text: text.into(),
        })
    }

    fn with_exit(mut self, exit: u8) -> Self {
        self.exit = exit;
        self
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.text.trim_end().to_string(),
            OutputFormat::Json => codewe_core::encoding::encode_value(&self.json)
                .ok()
                .and_then(|b| String::from_utf8(b).ok())
                .unwrap_or_else(|| self.json.to_string()),
        }
    }
}

pub fn error_json(e: &AppError) -> String {
    let v = json!({ "error": e.code(), "detail": e.to_string() });
    codewe_core::encoding::encode_value(&v)
        .ok()
        .and_then(|b| String::from_utf8(b).ok())
        .unwrap_or_else(|| v.to_string())
}

impl Cli {
    pub fn service_config(&self) -> AppResult<ServiceConfig> {
        let mut cfg = ServiceConfig::load(&self.home, self.config.as_deref(), std::env::vars())?;
        if let Some(l) = &self.ledger {
            cfg.ledger = l.clone();
        }
        if let Some(c) = &self.cas {
            cfg.cas = c.clone();
        }
        Ok(cfg)
    }
}

fn read_file(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::Io(path.into(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| AppError::Io(parent.into(), e))?;
    }
    fs::write(path, bytes).map_err(|e| AppError::Io(path.into(), e))
}

/// Hand-written input files are ordinary JSON; they need not be canonical.
fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
}

fn read_tokens(path: &Path) -> AppResult<Vec<EligibilityToken>> {
    let text = String::from_utf8(read_file(path)?)
        .map_err(|_| AppError::Input(format!("{} is not UTF-8", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse()
                .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
        })
        .collect()
}

struct CodesignFiles {
    dir: PathBuf,
}

impl CodesignFiles {
    fn path(&self, id: &Digest) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn load(&self, id: &Digest) -> AppResult<CoProductionRecord> {
        let path = self.path(id);
        if !path.exists() {
            return Err(AppError::Input(format!("no co-design record {id} in {}", self.dir.display())));
        }
        canonical_decode(&read_file(&path)?)
            .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
    }

    fn save(&self, record: &CoProductionRecord) -> AppResult<()> {
        let path = self.path(&record.record_id);
        let tmp = path.with_extension("json.tmp");
        write_file(&tmp, &canonical_encode(record).expect("records encode"))?;
        fs::rename(&tmp, &path).map_err(|e| AppError::Io(path, e))
    }

    /// Loads, applies `f`, and writes back only if `f` succeeds and nobody
    /// else changed the record in between.
    fn mutate<T>(
        &self,
        id: &Digest,
        f: impl FnOnce(&mut CoProductionRecord) -> Result<T, codewe_core::coproduction::CoProductionError>,
    ) -> AppResult<(T, CoProductionRecord)> {
        let mut record = self.load(id)?;
        let revision = record.revision;
        let out = f(&mut record)?;
        let current = self.load(id)?;
        if current.revision != revision {
            return Err(AppError::Codesign(
                codewe_core::coproduction::CoProductionError::ConflictRetry {
                    expected: revision,
                    actual: current.revision,
                },
            ));
        }
        self.save(&record)?;
        Ok((out, record))
    }
}

pub fn run(cli: &Cli) -> AppResult<Outcome> {
    let cfg = cli.service_config()?;
    match &cli.command {
        Command::Keygen { out, seed } => {
            let seed = seed
                .as_deref()
                .map(hex::decode)
                .transpose()
                .map_err(|e| AppError::Input(format!("seed: {e}")))?;
            let key = keygen(seed.as_deref()).map_err(|e| AppError::Input(e.to_string()))?;
            write_key(out, &key)?;
            let pk = key.public_key();
            Outcome::ok(
                &json!({ "public_key": pk, "key_file": out }),
                format!("public key {pk}\nprivate key written to {}", out.display()),
            )
        }
        Command::Codesign(cmd) => codesign(&cfg, cmd),
        Command::Deploy { params, tokens } => {
            let params: SurveyParameters = read_json(params)?;
            let tokens = read_tokens(tokens.as_ref().unwrap_or(&cfg.tokens))?;
            let admin = read_restricted_key(&cfg.admin_key)?;
            let node = app::open_node(&cfg)?;
            let id = node.deploy(&params, &admin, &tokens)?;
            Outcome::ok(&json!({ "survey_id": id }), format!("deployed survey {id}"))
        }
        Command::Open { survey } => phase(&cfg, survey, true),
        Command::Close { survey } => phase(&cfg, survey, false),
        Command::Tokens(TokensCmd::Mint { count, out }) => {
            let out = out.as_ref().unwrap_or(&cfg.tokens);
            let tokens = codewe_core::node::mint_tokens(*count);
            let body: String = tokens.iter().map(|t| format!("{t}\n")).collect();
            write_private(out, body.as_bytes())?;
            Outcome::ok(
                &json!({ "count": count, "file": out }),
                format!("{count} tokens written to {}", out.display()),
            )
        }
        Command::Tokens(TokensCmd::Export { survey, tokens, out }) => {
            let tokens = read_tokens(tokens.as_ref().unwrap_or(&cfg.tokens))?;
            let mut body = format!("# survey {survey}\n# one line per respondent: survey-id token\n");
            for t in &tokens {
                body.push_str(&format!("{survey} {t}\n"));
            }
            write_private(out, body.as_bytes())?;
            Outcome::ok(
                &json!({ "count": tokens.len(), "file": out }),
                format!("{} invitations written to {}", tokens.len(), out.display()),
            )
        }
        Command::Respond { survey, answers, key, token } => {
            let answers: BTreeMap<String, i64> = read_json(answers)?;
            let key = read_key(key)?;
            let node = app::open_node(&cfg)?;
            let params = node.params(survey)?;
            let prepared = prepare_submission(&params, answers, &key, *token, ClientNonce::random())
                .map_err(|e| AppError::Node(e.into()))?;
            let req = SubmissionRequest {
                response: String::from_utf8(prepared.blob).expect("canonical text is UTF-8"),
                signature: prepared.commitment.respondent_signature,
                public_key: prepared.commitment.respondent_public_key,
                token: *token,
            };
            let receipt = app::submit(&node, survey, &req)?;
            Outcome::ok(
                &receipt,
                format!(
                    "accepted at height {}\nresponse digest {}\nkeep this digest to check inclusion later",
                    receipt.height, receipt.response_digest
                ),
            )
        }
        Command::Analyze { survey } => {
            let admin = read_restricted_key(&cfg.admin_key)?;
            let node = app::open_node(&cfg)?;
            let bundle = app::analyze(&node, &cfg.reports, survey, &admin)?;
            let body = &bundle.report.body;
            let dir = app::report_dir(&cfg.reports, survey);
            Outcome::ok(
                &json!({
                    "analysis_root": body.analysis_root,
                    "report_digest": bundle.report.report_digest,
                    "included": body.included_digests.len(),
                    "excluded": body.excluded.len(),
                    "report_dir": dir,
                }),
                format!(
                    "analysed {} responses ({} excluded)\nroot {}\nreport written to {}",
                    body.included_digests.len(),
                    body.excluded.len(),
                    body.analysis_root,
                    dir.display()
                ),
            )
        }
        Command::Report(ReportCmd::Export { survey, out }) => {
            let node = app::open_node(&cfg)?;
            let report = match app::load_report(&node, &cfg.reports, survey) {
                Ok(r) => r,
                Err(AppError::ReportUnavailable(_)) => {
                    // Signatures are deterministic, so re-signing the
                    // recomputed body reproduces the committed report.
                    let admin = read_restricted_key(&cfg.admin_key)?;
                    let body = node
                        .read(|l| prepare_report(l, node.cas(), survey))
                        .map_err(codewe_core::NodeError::from)?;
                    sign_report(body, &admin)
                }
                Err(e) => return Err(e),
            };
            let bundle = ReportBundle { proofs: proofs_for(&report.body), report };
            bundle
                .export(out)
                .map_err(|e| AppError::ReportUnavailable(e.to_string()))?;
            Outcome::ok(
                &json!({ "dir": out, "proofs": bundle.proofs.len() }),
                format!("report and {} proofs written to {}", bundle.proofs.len(), out.display()),
            )
        }
        Command::Report(ReportCmd::VerifyInclusion { survey, digest }) => {
            let node = app::open_node(&cfg)?;
            let proof = app::proof(&node, &cfg.reports, survey, digest)?;
            let ok = node
                .read(|l| verify_inclusion(l, survey, digest, &proof.proof))
                .map_err(codewe_core::NodeError::from)?;
            let text = if ok {
                format!("{digest} is included under the on-chain root")
            } else {
                format!("{digest}: proof does not match the on-chain root")
            };
            Ok(Outcome::ok(&json!({ "included": ok, "response_digest": digest }), text)?
                .with_exit(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED }))
        }
        Command::Audit { survey, report } => {
            let node = app::open_node(&cfg)?;
            let view = match report {
                Some(path) => {
                    let r = app::load_report_file(path)?;
                    let (finding, summary) = node.audit(survey, Some(&r))?;
                    app::AuditView { finding, summary }
                }
                None => app::audit(&node, &cfg.reports, survey)?,
            };
            let exit = if view.finding.verdict.is_clean() { EXIT_OK } else { EXIT_DISCREPANT };
            let text = view.summary.clone();
            Ok(Outcome::ok(&view, text)?.with_exit(exit))
        }
        Command::Ledger(LedgerCmd::Verify { file }) => {
            let path = file.as_ref().unwrap_or(&cfg.ledger);
            let bytes = read_file(path)?;
            let (footer_ok, verdict) = inspect_snapshot(&bytes);
            let ok = footer_ok && verdict.ok;
            let text = match (footer_ok, verdict.first_bad_height) {
                (true, None) => format!("ledger intact: {}", path.display()),
                (_, Some(h)) => format!("ledger tampered: first bad height {h}"),
                (false, None) => "ledger tampered: snapshot checksum mismatch".to_string(),
            };
            Ok(Outcome::ok(
                &json!({ "ok": ok, "checksum_ok": footer_ok, "chain": verdict }),
                text,
            )?
            .with_exit(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED }))
        }
        Command::Cas(cmd) => cas(&cfg, cmd),
        Command::Serve { listen } => {
            let node = app::open_node(&cfg)?;
            let listen = listen.clone().unwrap_or_else(|| cfg.listen.clone());
            let state = Arc::new(AppState {
                node,
                reports: cfg.reports.clone(),
                limiter: RateLimiter::per_minute(cfg.rate_limit),
            });
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::Io(PathBuf::from("runtime"), e))?;
            rt.block_on(service::serve(state, &listen))
                .map_err(|e| AppError::Io(PathBuf::from(&listen), e))?;
            Outcome::ok(&json!({ "stopped": true }), "service stopped")
        }
    }
}

fn phase(cfg: &ServiceConfig, survey: &Digest, open: bool) -> AppResult<Outcome> {
    let admin = read_restricted_key(&cfg.admin_key)?;
    let node = app::open_node(cfg)?;
    let receipt = if open {
        node.open_survey(survey, &admin)?
    } else {
        node.close_survey(survey, &admin)?
    };
    let word = if open { "opened" } else { "closed" };
    Outcome::ok(&receipt, format!("{word} survey {survey} at height {}", receipt.height.unwrap_or(0)))
}

fn codesign(cfg: &ServiceConfig, cmd: &CodesignCmd) -> AppResult<Outcome> {
    let files = CodesignFiles { dir: cfg.codesign.clone() };
    fs::create_dir_all(&files.dir).map_err(|e| AppError::Io(files.dir.clone(), e))?;
    match cmd {
        CodesignCmd::Open { draft, panel, policy } => {
            let draft: InitialDraft = read_json(draft)?;
            let panel: Vec<Stakeholder> = read_json(panel)?;
            let policy = match policy {
                Some(p) => read_json::<QuorumPolicy>(p)?,
                None => QuorumPolicy::default(),
            };
            let record = open_codesign(draft, panel, policy)?;
            if files.path(&record.record_id).exists() {
                return Err(AppError::Input(format!("record {} already exists", record.record_id)));
            }
            files.save(&record)?;
            let id = record.record_id;
            Outcome::ok(&json!({ "record_id": id }), format!("co-design record {id} opened"))
        }
        CodesignCmd::Propose { record, stakeholder, change, rationale } => {
            let change: Change = read_json(change)?;
            let (version, _) =
                files.mutate(record, |r| r.propose_revision(stakeholder, change, rationale))?;
            Outcome::ok(&json!({ "version": version }), format!("draft version {version} created; sign-offs cleared"))
        }
        CodesignCmd::Feedback { record, entries } => {
            let entries = entries
                .iter()
                .map(|e| {
                    e.split_once('=')
                        .map(|(id, comment)| FeedbackEntry {
                            stakeholder_id: id.trim().to_string(),
                            comment: comment.trim().to_string(),
                        })
                        .ok_or_else(|| AppError::Input(format!("`{e}` is not stakeholder-id=comment")))
                })
                .collect::<AppResult<Vec<_>>>()?;
            let (round, _) = files.mutate(record, |r| r.record_feedback(entries))?;
            Outcome::ok(&json!({ "round": round }), format!("feedback round {round} recorded"))
        }
        CodesignCmd::Flag { record, stakeholder, item, rationale } => {
            let (flag, _) = files.mutate(record, |r| r.flag_stigma(stakeholder, item, rationale))?;
            Outcome::ok(&json!({ "flag_id": flag }), format!("flag {flag} raised on {item}"))
        }
        CodesignCmd::Resolve { record, flag, version } => {
            files.mutate(record, |r| r.resolve_stigma(*flag, *version))?;
            Outcome::ok(&json!({ "flag_id": flag, "version": version }), format!("flag {flag} resolved by version {version}"))
        }
        CodesignCmd::Signoff { record, stakeholder, key } => {
            let key = read_key(key)?;
            let ((), r) = files.mutate(record, |r| {
                let (version, sig) = r.sign_latest(&key);
                r.signoff(stakeholder, version, sig)
            })?;
            let s = r.summary();
            Outcome::ok(
                &s,
                format!(
                    "{stakeholder} signed version {}; {} of {} required sign-offs",
                    s.latest_version, s.signoffs_on_latest, s.signoffs_required
                ),
            )
        }
        CodesignCmd::Finalize { record, out } => {
            let node = app::open_node(cfg)?;
            let ((params, digest), _) = files.mutate(record, |r| r.finalize(node.cas()))?;
            write_file(out, &canonical_encode(&params).expect("params encode"))?;
            Outcome::ok(
                &json!({ "survey_id": params.survey_id, "coproduction_digest": digest, "params_file": out }),
                format!(
                    "record sealed as {digest}\nsurvey id {}\nparameters written to {}",
                    params.survey_id,
                    out.display()
                ),
            )
        }
        CodesignCmd::Show { record, full } => {
            let r = files.load(record)?;
            if *full {
                let text = serde_json::to_string_pretty(&r).expect("records encode");
                Outcome::ok(&r, text)
            } else {
                let s = r.summary();
                let text = format!(
                    "record {}\nstatus {:?}, latest version {} of {}\nproposals {}, feedback rounds {}\nstigma flags {} ({} unresolved)\nsign-offs {} of {} required",
                    s.record_id,
                    s.status,
                    s.latest_version,
                    s.version_count,
                    s.proposal_count,
                    s.feedback_round_count,
                    s.flags_total,
                    s.flags_unresolved,
                    s.signoffs_on_latest,
                    s.signoffs_required
                );
                Outcome::ok(&s, text)
            }
        }
    }
}

fn cas(cfg: &ServiceConfig, cmd: &CasCmd) -> AppResult<Outcome> {
    match cmd {
        CasCmd::Put { file } => {
            let node = app::open_node(cfg)?;
            let address = node.cas().put(&read_file(file)?)?;
            Outcome::ok(&json!({ "address": address }), address.to_hex())
        }
        CasCmd::Get { address, out } => {
            let node = app::open_node(cfg)?;
            match node.cas().get(address)? {
                CasRead::Blob(bytes) => match out {
                    Some(path) => {
                        write_file(path, &bytes)?;
                        Outcome::ok(
                            &json!({ "address": address, "bytes": bytes.len(), "file": path }),
                            format!("{} bytes written to {}", bytes.len(), path.display()),
                        )
                    }
                    None => Outcome::ok(
                        &json!({ "address": address, "bytes": bytes.len() }),
                        String::from_utf8_lossy(&bytes).into_owned(),
                    ),
                },
                CasRead::Erased(t) => Err(AppError::Node(codewe_core::NodeError::Cas(
                    codewe_core::cas::CasError::AlreadyErased(t.address),
                ))),
                CasRead::NotFound => Err(AppError::Node(codewe_core::NodeError::Cas(
                    codewe_core::cas::CasError::NotFound(*address),
                ))),
            }
        }
        CasCmd::EraseRequest { address, key, out } => {
            let key: KeyPair = read_key(key)?;
            let req = ErasureRequest::new(*address, &key);
            write_file(out, &canonical_encode(&req).expect("requests encode"))?;
            Outcome::ok(&req, format!("erasure request written to {}", out.display()))
        }
        CasCmd::Erase { survey, request } => {
            let req: ErasureRequest = read_json(request)?;
            let admin = read_restricted_key(&cfg.admin_key)?;
            let node: Node = app::open_node(cfg)?;
            let tombstone = node.erase_response(survey, req, &admin)?;
            Outcome::ok(
                &json!({ "address": tombstone.address, "tombstone_digest": tombstone.digest(), "erased_at": tombstone.erased_at }),
                format!("{} erased; tombstone {}", tombstone.address, tombstone.digest()),
            )
        }
    }
}
