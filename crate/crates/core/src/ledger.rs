//! Append-only, hash-chained ledger that hosts survey contracts.
//!
//! One transaction per entry. Each entry commits to its predecessor's
//! digest, so any mutation, deletion or reordering breaks the chain at the
//! first affected height.
//!
//! # Snapshot file format
//!
//! ```text
//! magic      8 bytes   "CDWLDG01"
//! count      u64 BE    number of records
//! record*    u32 BE length, then that many bytes of
//!                      canonical {"entry": LedgerEntry, "tx": Transaction}
//! footer     32 bytes  SHA-256 of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{execute, ContractState, Rejection, Transaction, TxKind};
use crate::crypto::{canonical_digest, hash, Digest};
use crate::encoding::{canonical_decode, canonical_encode};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CDWLDG01";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("snapshot corrupt: {0}")]
    SnapshotCorrupt(String),
    #[error("replay diverged at height {0}")]
    ReplayDiverged(u64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub height: u64,
    pub prev_digest: Digest,
    pub payload_digest: Digest,
    pub logical_time: u64,
    /// Seconds since the epoch. Informational only; never used for ordering.
    pub wall_clock: u64,
    pub entry_digest: Digest,
}

#[derive(Serialize)]
struct EntryHeader<'a> {
    height: u64,
    prev_digest: &'a Digest,
    payload_digest: &'a Digest,
    logical_time: u64,
    wall_clock: u64,
}

impl LedgerEntry {
    pub fn compute_digest(&self) -> Digest {
        canonical_digest(&EntryHeader {
            height: self.height,
            prev_digest: &self.prev_digest,
            payload_digest: &self.payload_digest,
            logical_time: self.logical_time,
            wall_clock: self.wall_clock,
        })
        .expect("entry header encodes")
    }
}

pub fn payload_digest(tx: &Transaction) -> Digest {
    canonical_digest(tx).expect("transactions encode")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason")]
pub enum TxStatus {
    Accepted,
    Rejected(Rejection),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxReceipt {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub entry_digest: Option<Digest>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub height: Option<u64>,
    #[serde(flatten)]
    pub status: TxStatus,
}

impl TxReceipt {
    pub fn is_accepted(&self) -> bool {
        matches!(self.status, TxStatus::Accepted)
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match &self.status {
            TxStatus::Rejected(r) => Some(r),
            TxStatus::Accepted => None,
        }
    }

    pub fn into_result(self) -> Result<TxReceipt, Rejection> {
        match self.status {
            TxStatus::Rejected(r) => Err(r),
            TxStatus::Accepted => Ok(self),
        }
    }
}

/// Outcome of a chain check. Failure is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainVerdict {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_bad_height: Option<u64>,
}

impl ChainVerdict {
    const OK: ChainVerdict = ChainVerdict {
        ok: true,
        first_bad_height: None,
    };

    fn bad(height: u64) -> Self {
        ChainVerdict {
            ok: false,
            first_bad_height: Some(height),
        }
    }
}

/// Checks links, recomputed digests, heights and time monotonicity. When
/// `txs` is given, each entry's `payload_digest` is also recomputed from the
/// transaction at the same position.
pub fn verify_entries(entries: &[LedgerEntry], txs: Option<&[Transaction]>) -> ChainVerdict {
    if let Some(txs) = txs {
        if txs.len() != entries.len() {
            return ChainVerdict::bad(entries.len().min(txs.len()) as u64);
        }
    }
    let mut prev = Digest::ZERO;
    let mut prev_time: Option<u64> = None;
    for (i, entry) in entries.iter().enumerate() {
        let i = i as u64;
        let time_ok = prev_time.is_none_or(|t| entry.logical_time > t);
        if entry.height != i
            || entry.prev_digest != prev
            || !time_ok
            || entry.compute_digest() != entry.entry_digest
        {
            return ChainVerdict::bad(i);
        }
        if let Some(txs) = txs {
            if payload_digest(&txs[i as usize]) != entry.payload_digest {
                return ChainVerdict::bad(i);
            }
        }
        prev = entry.entry_digest;
        prev_time = Some(entry.logical_time);
    }
    ChainVerdict::OK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallClock {
    System,
    Fixed(u64),
}

impl WallClock {
    fn now(self) -> u64 {
        match self {
            WallClock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            WallClock::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    txs: Vec<Transaction>,
    contracts: BTreeMap<Digest, ContractState>,
    clock: u64,
    wall_clock: WallClock,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl Ledger {
    pub fn new() -> Self {
        Self::with_wall_clock(WallClock::System)
    }

    pub fn with_wall_clock(wall_clock: WallClock) -> Self {
        Self {
            entries: Vec::new(),
            txs: Vec::new(),
            contracts: BTreeMap::new(),
            clock: 0,
            wall_clock,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn digest_sequence(&self) -> Vec<Digest> {
        self.entries.iter().map(|e| e.entry_digest).collect()
    }

    /// Logical time of the most recent entry (or of the last clock advance).
    pub fn logical_time(&self) -> u64 {
        self.clock
    }

    /// Moves the logical clock forward without appending, simulating the
    /// passage of time between transactions.
    pub fn advance_clock(&mut self, ticks: u64) {
        self.clock += ticks;
    }

    pub fn contract(&self, id: &Digest) -> Option<&ContractState> {
        self.contracts.get(id)
    }

    pub fn contracts(&self) -> &BTreeMap<Digest, ContractState> {
        &self.contracts
    }

    /// Validates `tx` and, if legal, appends exactly one entry. A rejected
    /// transaction leaves the ledger untouched.
    pub fn submit_tx(&mut self, tx: Transaction) -> TxReceipt {
        let time = self.clock + 1;
        let wall = self.wall_clock.now();
        self.append_at(tx, time, wall)
    }

    fn append_at(&mut self, tx: Transaction, logical_time: u64, wall_clock: u64) -> TxReceipt {
        let rejected = |r| TxReceipt {
            entry_digest: None,
            height: None,
            status: TxStatus::Rejected(r),
        };
        if !tx.signature_valid() {
            return rejected(Rejection::InvalidSignature);
        }
        if let Err(r) = execute(&mut self.contracts, &tx, logical_time) {
            return rejected(r);
        }
        let height = self.entries.len() as u64;
        let mut entry = LedgerEntry {
            height,
            prev_digest: self.entries.last().map_or(Digest::ZERO, |e| e.entry_digest),
            payload_digest: payload_digest(&tx),
            logical_time,
            wall_clock,
            entry_digest: Digest::ZERO,
        };
        entry.entry_digest = entry.compute_digest();
        let digest = entry.entry_digest;
        self.entries.push(entry);
        self.txs.push(tx);
        self.clock = logical_time;
        TxReceipt {
            entry_digest: Some(digest),
            height: Some(height),
            status: TxStatus::Accepted,
        }
    }

    /// Would `tx` be accepted if submitted next? Mutates nothing.
    pub fn dry_run(&self, tx: &Transaction) -> Result<(), Rejection> {
        if !tx.signature_valid() {
            return Err(Rejection::InvalidSignature);
        }
        let mut scratch = BTreeMap::new();
        if let Some(state) = self.contracts.get(&tx.contract_id) {
            scratch.insert(tx.contract_id, state.clone());
        }
        execute(&mut scratch, tx, self.clock + 1)
    }

    pub fn verify_chain(&self) -> ChainVerdict {
        verify_entries(&self.entries, Some(&self.txs))
    }

    /// Entries for `contract_id` in height order, optionally filtered by kind.
    pub fn read_entries(
        &self,
        contract_id: &Digest,
        kind: Option<TxKind>,
    ) -> Vec<(LedgerEntry, Transaction)> {
        self.entries
            .iter()
            .zip(&self.txs)
            .filter(|(_, tx)| &tx.contract_id == contract_id)
            .filter(|(_, tx)| kind.is_none_or(|k| tx.kind() == k))
            .map(|(e, tx)| (e.clone(), tx.clone()))
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = (&LedgerEntry, &Transaction)> {
        self.entries.iter().zip(&self.txs)
    }

    /// Re-executes every transaction from genesis at its recorded times and
    /// checks that each reproduced entry is identical to the recorded one.
    pub fn replay(records: &[(LedgerEntry, Transaction)]) -> Result<Ledger, LedgerError> {
        let mut ledger = Ledger::with_wall_clock(WallClock::System);
        for (entry, tx) in records {
            let receipt = ledger.append_at(tx.clone(), entry.logical_time, entry.wall_clock);
            if receipt.entry_digest != Some(entry.entry_digest)
                || ledger.entries.last() != Some(entry)
            {
                return Err(LedgerError::ReplayDiverged(entry.height));
            }
        }
        Ok(ledger)
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.entries.len() * 512);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(self.entries.len() as u64).to_be_bytes());
        for (entry, tx) in self.records() {
            let rec = canonical_encode(&SnapshotRecordRef { entry, tx }).expect("records encode");
            out.extend_from_slice(&(rec.len() as u32).to_be_bytes());
            out.extend_from_slice(&rec);
        }
        let footer = hash(&out);
        out.extend_from_slice(footer.as_bytes());
        out
    }

    /// Writes the snapshot atomically (temp file then rename).
    pub fn snapshot_to_file(&self, path: &Path) -> Result<(), LedgerError> {
        let bytes = self.snapshot_bytes();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(dir) = dir {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn restore_from_bytes(bytes: &[u8]) -> Result<Ledger, LedgerError> {
        let parsed = parse_snapshot(bytes);
        if !parsed.footer_ok {
            return Err(LedgerError::SnapshotCorrupt("digest footer mismatch".into()));
        }
        if let Some(err) = parsed.error {
            return Err(LedgerError::SnapshotCorrupt(err));
        }
        let ledger = Ledger::replay(&parsed.records)?;
        if !ledger.verify_chain().ok {
            return Err(LedgerError::SnapshotCorrupt("chain does not verify".into()));
        }
        Ok(ledger)
    }

    pub fn restore_from_file(path: &Path) -> Result<Ledger, LedgerError> {
        Self::restore_from_bytes(&fs::read(path)?)
    }
}

#[derive(Serialize)]
struct SnapshotRecordRef<'a> {
    entry: &'a LedgerEntry,
    tx: &'a Transaction,
}

#[derive(Deserialize)]
struct SnapshotRecord {
    entry: LedgerEntry,
    tx: Transaction,
}

/// Best-effort parse of a snapshot, for diagnostics on damaged files.
#[derive(Debug, Clone)]
pub struct ParsedSnapshot {
    pub footer_ok: bool,
    pub records: Vec<(LedgerEntry, Transaction)>,
    /// First framing or decoding problem, if any. Records before it are kept.
    pub error: Option<String>,
    /// Index of the first record that failed to decode.
    pub error_at: Option<u64>,
}

pub fn parse_snapshot(bytes: &[u8]) -> ParsedSnapshot {
    let mut parsed = ParsedSnapshot {
        footer_ok: false,
        records: Vec::new(),
        error: None,
        error_at: None,
    };
    if bytes.len() < SNAPSHOT_MAGIC.len() + 8 + 32 {
        parsed.error = Some("file too short".into());
        parsed.error_at = Some(0);
        return parsed;
    }
    let (body, footer) = bytes.split_at(bytes.len() - 32);
    parsed.footer_ok = hash(body).as_bytes() == footer;
    if &body[..8] != SNAPSHOT_MAGIC {
        parsed.error = Some("bad magic".into());
        parsed.error_at = Some(0);
        return parsed;
    }
    let count = u64::from_be_bytes(body[8..16].try_into().expect("8 bytes"));
    let mut pos = 16usize;
    for i in 0..count {
        let fail = |p: &mut ParsedSnapshot, msg: String| {
            p.error = Some(msg);
            p.error_at = Some(i);
        };
        if pos + 4 > body.len() {
            fail(&mut parsed, format!("record {i}: truncated length"));
            return parsed;
        }
        let len = u32::from_be_bytes(body[pos..pos + 4].try_into().expect("4 bytes")) as usize;
        pos += 4;
        if pos + len > body.len() {
            fail(&mut parsed, format!("record {i}: truncated body"));
            return parsed;
        }
        match canonical_decode::<SnapshotRecord>(&body[pos..pos + len]) {
            Ok(r) => parsed.records.push((r.entry, r.tx)),
            Err(e) => {
                fail(&mut parsed, format!("record {i}: {e}"));
                return parsed;
            }
        }
        pos += len;
    }
    if pos != body.len() {
        parsed.error = Some("trailing bytes before footer".into());
        parsed.error_at = Some(count);
    }
    parsed
}

/// Chain verdict for a snapshot file that may be damaged. The first bad
/// height is the earliest of: an undecodable record, a broken link, or a
/// record count shortfall.
pub fn inspect_snapshot(bytes: &[u8]) -> (bool, ChainVerdict) {
    let parsed = parse_snapshot(bytes);
    let entries: Vec<LedgerEntry> = parsed.records.iter().map(|(e, _)| e.clone()).collect();
    let txs: Vec<Transaction> = parsed.records.iter().map(|(_, t)| t.clone()).collect();
    let mut verdict = verify_entries(&entries, Some(&txs));
    if let Some(at) = parsed.error_at {
        if verdict.ok || verdict.first_bad_height.is_some_and(|h| h > at) {
            verdict = ChainVerdict::bad(at);
        }
    }
    // Links can hold while a transaction would never have been accepted.
    if verdict.ok {
        if let Err(LedgerError::ReplayDiverged(h)) = Ledger::replay(&parsed.records) {
            verdict = ChainVerdict::bad(h);
        }
    }
    (parsed.footer_ok, verdict)
}
