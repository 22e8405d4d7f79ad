//! Co-produced, verifiable well-being surveys.
//!
//! A survey is co-designed by a stakeholder panel ([`coproduction`]),
//! deployed as a contract on a hash-chained ledger ([`ledger`],
//! [`contract`]), and filled in by pseudonymous respondents whose signed
//! answers live in a content-addressed store ([`cas`]) while only digests go
//! on-chain. The administrator analyses the committed responses
//! ([`analysis`]) and commits a Merkle root over everything included; anyone
//! can then check for omission or tampering ([`audit`]).

pub mod analysis;
pub mod audit;
pub mod cas;
pub mod contract;
pub mod coproduction;
pub mod crypto;
pub mod encoding;
pub mod ledger;
pub mod merkle;
pub mod node;
pub mod response;
pub mod scenario;

pub use analysis::{AnalysisReport, ReportBody, ReportBundle};
pub use audit::{AuditFinding, Verdict};
pub use cas::{CasAddress, CasStore, ErasureRequest, Tombstone};
pub use contract::{
    ContractState, EligibilityToken, Phase, Rejection, ResponseCommitment, SurveyParameters,
    Transaction, TxKind,
};
pub use coproduction::{CoProductionRecord, Role, Stakeholder};
pub use crypto::{hash, keygen, sign, verify, Digest, KeyPair, PublicKey, Signature};
pub use encoding::{canonical_decode, canonical_encode};
pub use ledger::{Ledger, LedgerEntry, TxReceipt};
pub use merkle::{merkle_prove, merkle_root, merkle_verify, MerkleProof};
pub use node::{Node, NodeError};
pub use response::ResponseSet;
