// SPDX-License-Identifier: Apache-2.0

//! Append-only hash-chained registry ledger.
//!
//! One block is sealed per accepted event. Block encoding, little-endian:
//!
//! ```text
//! index u64 | prev_block_hash [32] | timestamp u64 | event_count u32 |
//!   events... | block_hash [32]
//! ```
//!
//! `block_hash` is SHA-256 over every preceding byte of the block. The
//! ledger file is the concatenation of block encodings, genesis first.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::identity::{parse_secondary_id, Digest32, IssuerNamespace, PrimaryIdentifier, SecondaryIdentifier};
use crate::keys::{PublicKey, Signature};

pub const TAG_REGISTER: u8 = 1;
pub const TAG_STATUS_UPDATE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestingStatus {
    /// Undecided; every entry starts here.
    U,
    /// Passed testing; required for deployment verification.
    P,
    /// Failed.
    F,
    /// Retired. Terminal.
    X,
}

impl TestingStatus {
    pub const ALL: [TestingStatus; 4] = [
        TestingStatus::U,
        TestingStatus::P,
        TestingStatus::F,
        TestingStatus::X,
    ];

    pub fn code(self) -> u8 {
        match self {
            TestingStatus::U => b'U',
            TestingStatus::P => b'P',
            TestingStatus::F => b'F',
            TestingStatus::X => b'X',
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.code() == code)
    }

    pub fn can_transition_to(self, next: TestingStatus) -> bool {
        use TestingStatus::*;
        matches!((self, next), (U, P) | (U, F) | (P, F) | (P, X) | (F, X))
    }
}

impl fmt::Display for TestingStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code() as char)
    }
}

impl std::str::FromStr for TestingStatus {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.as_bytes() {
            [c] => Self::from_code(*c),
            _ => None,
        }
        .ok_or_else(|| LedgerError::Malformed(format!("unknown status {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub ai_id: PrimaryIdentifier,
    pub secondary_id: SecondaryIdentifier,
    pub namespace: IssuerNamespace,
    pub zkp_anchor: Digest32,
    pub metadata_digest: Digest32,
    pub developer_public_key: PublicKey,
    pub developer_signature: Signature,
    pub registered_at: u64,
}

/// The signed portion of an entry, before the signature is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsignedEntry {
    pub ai_id: PrimaryIdentifier,
    pub secondary_id: SecondaryIdentifier,
    pub namespace: IssuerNamespace,
    pub zkp_anchor: Digest32,
    pub metadata_digest: Digest32,
    pub developer_public_key: PublicKey,
    pub registered_at: u64,
}

impl UnsignedEntry {
    /// All fields in declaration order; the developer signs these bytes.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let sid = self.secondary_id.render();
        let mut out = Vec::with_capacity(32 + 2 + sid.len() + 8 + 32 * 3 + 8);
        out.extend_from_slice(self.ai_id.as_bytes());
        out.extend_from_slice(&(sid.len() as u16).to_le_bytes());
        out.extend_from_slice(sid.as_bytes());
        out.extend_from_slice(self.namespace.as_bytes());
        out.extend_from_slice(self.zkp_anchor.as_bytes());
        out.extend_from_slice(self.metadata_digest.as_bytes());
        out.extend_from_slice(&self.developer_public_key.0);
        out.extend_from_slice(&self.registered_at.to_le_bytes());
        out
    }

    pub fn signed(self, signature: Signature) -> RegistryEntry {
        RegistryEntry {
            ai_id: self.ai_id,
            secondary_id: self.secondary_id,
            namespace: self.namespace,
            zkp_anchor: self.zkp_anchor,
            metadata_digest: self.metadata_digest,
            developer_public_key: self.developer_public_key,
            developer_signature: signature,
            registered_at: self.registered_at,
        }
    }
}

impl RegistryEntry {
    pub fn unsigned(&self) -> UnsignedEntry {
        UnsignedEntry {
            ai_id: self.ai_id,
            secondary_id: self.secondary_id.clone(),
            namespace: self.namespace,
            zkp_anchor: self.zkp_anchor,
            metadata_digest: self.metadata_digest,
            developer_public_key: self.developer_public_key,
            registered_at: self.registered_at,
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        self.unsigned().canonical_bytes()
    }

    pub fn verify_signature(&self) -> Result<(), LedgerError> {
        self.developer_public_key
            .verify(&self.canonical_bytes(), &self.developer_signature)
            .map_err(|_| LedgerError::InvalidSignature)
    }
}

/// Message an authority signs to move `ai_id` to `status` at `timestamp`.
pub fn status_update_message(ai_id: &PrimaryIdentifier, status: TestingStatus, timestamp: u64) -> Vec<u8> {
    let mut m = Vec::with_capacity(41);
    m.extend_from_slice(ai_id.as_bytes());
    m.push(status.code());
    m.extend_from_slice(&timestamp.to_le_bytes());
    m
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerEvent {
    Register {
        timestamp: u64,
        entry: RegistryEntry,
    },
    StatusUpdate {
        timestamp: u64,
        ai_id: PrimaryIdentifier,
        new_status: TestingStatus,
        authority_public_key: PublicKey,
        authority_signature: Signature,
    },
}

impl LedgerEvent {
    pub fn timestamp(&self) -> u64 {
        match self {
            LedgerEvent::Register { timestamp, .. } | LedgerEvent::StatusUpdate { timestamp, .. } => *timestamp,
        }
    }

    pub fn ai_id(&self) -> &PrimaryIdentifier {
        match self {
            LedgerEvent::Register { entry, .. } => &entry.ai_id,
            LedgerEvent::StatusUpdate { ai_id, .. } => ai_id,
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            LedgerEvent::Register { timestamp, entry } => {
                out.push(TAG_REGISTER);
                out.extend_from_slice(&timestamp.to_le_bytes());
                out.extend_from_slice(&entry.canonical_bytes());
                out.extend_from_slice(&entry.developer_signature.0);
            }
            LedgerEvent::StatusUpdate {
                timestamp,
                ai_id,
                new_status,
                authority_public_key,
                authority_signature,
            } => {
                out.push(TAG_STATUS_UPDATE);
                out.extend_from_slice(&timestamp.to_le_bytes());
                out.extend_from_slice(ai_id.as_bytes());
                out.push(new_status.code());
                out.extend_from_slice(&authority_public_key.0);
                out.extend_from_slice(&authority_signature.0);
            }
        }
    }

    /// Checks the event's own signature.
    pub fn verify_signature(&self) -> Result<(), LedgerError> {
        match self {
            LedgerEvent::Register { entry, .. } => entry.verify_signature(),
            LedgerEvent::StatusUpdate {
                timestamp,
                ai_id,
                new_status,
                authority_public_key,
                authority_signature,
            } => authority_public_key
                .verify(
                    &status_update_message(ai_id, *new_status, *timestamp),
                    authority_signature,
                )
                .map_err(|_| LedgerError::InvalidSignature),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerBlock {
    pub index: u64,
    pub prev_block_hash: Digest32,
    pub timestamp: u64,
    pub events: Vec<LedgerEvent>,
    pub block_hash: Digest32,
}

impl LedgerBlock {
    /// Seals a block, computing its hash.
    pub fn seal(index: u64, prev_block_hash: Digest32, timestamp: u64, events: Vec<LedgerEvent>) -> Self {
        let mut block = Self {
            index,
            prev_block_hash,
            timestamp,
            events,
            block_hash: Digest32::ZERO,
        };
        block.block_hash = block.compute_hash();
        block
    }

    pub fn genesis() -> Self {
        Self::seal(0, Digest32::ZERO, 0, Vec::new())
    }

    /// Canonical encoding up to, not including, `block_hash`.
    pub fn encode_body(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(52 + 256 * self.events.len());
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(self.prev_block_hash.as_bytes());
        out.extend_from_slice(&self.timestamp.to_le_bytes());
        out.extend_from_slice(&(self.events.len() as u32).to_le_bytes());
        for e in &self.events {
            e.encode_into(&mut out);
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.encode_body();
        out.extend_from_slice(self.block_hash.as_bytes());
        out
    }

    pub fn compute_hash(&self) -> Digest32 {
        Digest32(Sha256::digest(self.encode_body()).into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated block at offset {0}")]
    Truncated(usize),
    #[error("unknown event tag {tag} at offset {offset}")]
    UnknownTag { offset: usize, tag: u8 },
    #[error("unknown status code {code} at offset {offset}")]
    UnknownStatus { offset: usize, code: u8 },
    #[error("invalid field at offset {offset}: {reason}")]
    Field { offset: usize, reason: String },
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}

fn decode_event(c: &mut Cursor<'_>) -> Result<LedgerEvent, DecodeError> {
    let tag_off = c.pos;
    let tag = c.u8()?;
    let timestamp = c.u64()?;
    match tag {
        TAG_REGISTER => {
            let ai_id = PrimaryIdentifier(c.array()?);
            let sid_off = c.pos;
            let sid_len = usize::from(c.u16()?);
            let sid_bytes = c.take(sid_len)?;
            let secondary_id = std::str::from_utf8(sid_bytes)
                .ok()
                .and_then(|s| parse_secondary_id(s, true).ok())
                .ok_or_else(|| DecodeError::Field {
                    offset: sid_off,
                    reason: "secondary identifier".into(),
                })?;
            let ns_off = c.pos;
            let ns_bytes: [u8; 8] = c.array()?;
            let namespace = std::str::from_utf8(&ns_bytes)
                .ok()
                .and_then(|s| IssuerNamespace::new(s).ok())
                .ok_or_else(|| DecodeError::Field {
                    offset: ns_off,
                    reason: "namespace".into(),
                })?;
            let entry = RegistryEntry {
                ai_id,
                secondary_id,
                namespace,
                zkp_anchor: Digest32(c.array()?),
                metadata_digest: Digest32(c.array()?),
                developer_public_key: PublicKey(c.array()?),
                registered_at: c.u64()?,
                developer_signature: Signature(c.array()?),
            };
            Ok(LedgerEvent::Register { timestamp, entry })
        }
        TAG_STATUS_UPDATE => {
            let ai_id = PrimaryIdentifier(c.array()?);
            let code_off = c.pos;
            let code = c.u8()?;
            let new_status = TestingStatus::from_code(code).ok_or(DecodeError::UnknownStatus {
                offset: code_off,
                code,
            })?;
            Ok(LedgerEvent::StatusUpdate {
                timestamp,
                ai_id,
                new_status,
                authority_public_key: PublicKey(c.array()?),
                authority_signature: Signature(c.array()?),
            })
        }
        tag => Err(DecodeError::UnknownTag { offset: tag_off, tag }),
    }
}

/// Decodes one block starting at `offset`; returns it and the offset after it.
pub fn decode_block(bytes: &[u8], offset: usize) -> Result<(LedgerBlock, usize), DecodeError> {
    let mut c = Cursor { buf: bytes, pos: offset };
    let index = c.u64()?;
    let prev_block_hash = Digest32(c.array()?);
    let timestamp = c.u64()?;
    let count = c.u32()?;
    let mut events = Vec::new();
    for _ in 0..count {
        events.push(decode_event(&mut c)?);
    }
    let block_hash = Digest32(c.array()?);
    Ok((
        LedgerBlock {
            index,
            prev_block_hash,
            timestamp,
            events,
            block_hash,
        },
        c.pos,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFault {
    Malformed(String),
    HashMismatch,
    LinkMismatch,
    IndexMismatch,
    MissingGenesis,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainFault::Malformed(m) => write!(f, "malformed block: {m}"),
            ChainFault::HashMismatch => f.write_str("block hash does not recompute"),
            ChainFault::LinkMismatch => f.write_str("previous-hash link broken"),
            ChainFault::IndexMismatch => f.write_str("block index out of sequence"),
            ChainFault::MissingGenesis => f.write_str("ledger has no genesis block"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ChainVerdict {
    Ok { blocks: u64 },
    Invalid { index: u64, fault: ChainFault },
}

impl ChainVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, ChainVerdict::Ok { .. })
    }
}

/// Checks a sequence of already-decoded blocks.
pub fn verify_blocks(blocks: &[LedgerBlock]) -> ChainVerdict {
    if blocks.is_empty() {
        return ChainVerdict::Invalid {
            index: 0,
            fault: ChainFault::MissingGenesis,
        };
    }
    let mut prev = Digest32::ZERO;
    for (i, b) in blocks.iter().enumerate() {
        let index = i as u64;
        let fault = if b.index != index {
            Some(ChainFault::IndexMismatch)
        } else if b.prev_block_hash != prev {
            Some(ChainFault::LinkMismatch)
        } else if b.compute_hash() != b.block_hash {
            Some(ChainFault::HashMismatch)
        } else {
            None
        };
        if let Some(fault) = fault {
            return ChainVerdict::Invalid { index, fault };
        }
        prev = b.block_hash;
    }
    ChainVerdict::Ok {
        blocks: blocks.len() as u64,
    }
}

/// Decodes and verifies a raw ledger byte stream.
pub fn verify_chain_bytes(bytes: &[u8]) -> ChainVerdict {
    let (blocks, failure) = decode_blocks(bytes);
    match (verify_blocks(&blocks), failure) {
        (ChainVerdict::Invalid { index, fault }, _) if !blocks.is_empty() => {
            ChainVerdict::Invalid { index, fault }
        }
        (_, Some(fault)) => ChainVerdict::Invalid {
            index: blocks.len() as u64,
            fault,
        },
        (verdict, None) => verdict,
    }
}

/// Decodes blocks until the input ends or a block fails to decode.
fn decode_blocks(bytes: &[u8]) -> (Vec<LedgerBlock>, Option<ChainFault>) {
    let mut blocks = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        match decode_block(bytes, pos) {
            Ok((b, next)) => {
                blocks.push(b);
                pos = next;
            }
            Err(e) => return (blocks, Some(ChainFault::Malformed(e.to_string()))),
        }
    }
    (blocks, None)
}

/// Splits a ledger byte stream into blocks. On failure returns the index of
/// the block that could not be decoded.
pub fn decode_chain(bytes: &[u8]) -> Result<Vec<LedgerBlock>, (u64, ChainFault)> {
    match decode_blocks(bytes) {
        (blocks, None) => Ok(blocks),
        (blocks, Some(fault)) => Err((blocks.len() as u64, fault)),
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ai_id {0} is already registered")]
    Duplicate(PrimaryIdentifier),
    #[error("invalid signature")]
    InvalidSignature,
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("ai_id {0} is not registered")]
    UnknownAiId(PrimaryIdentifier),
    #[error("illegal status transition {from} -> {to}")]
    IllegalTransition { from: TestingStatus, to: TestingStatus },
    #[error("signer {0} is not a configured authority")]
    Unauthorized(PublicKey),
    #[error("block index {0} is beyond the ledger head")]
    BeyondHead(u64),
    #[error("ledger file is corrupt at block {index}: {fault}")]
    Corrupt { index: u64, fault: ChainFault },
    #[error("replay of block {index} failed: {source}")]
    Replay {
        index: u64,
        #[source]
        source: Box<LedgerError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub status: TestingStatus,
    pub timestamp: u64,
    pub block_index: u64,
}

#[derive(Debug, Clone)]
struct EntryState {
    entry: RegistryEntry,
    history: Vec<StatusChange>,
}

impl EntryState {
    fn status(&self) -> TestingStatus {
        self.history.last().expect("history starts at U").status
    }
}

/// The registry ledger: sealed blocks plus the state replayed from them.
///
/// Appends take `&mut self`; wrap in a lock for a single writer with
/// concurrent readers.
#[derive(Debug)]
pub struct Ledger {
    blocks: Vec<LedgerBlock>,
    encoded: Vec<Vec<u8>>,
    state: HashMap<PrimaryIdentifier, EntryState>,
    authorities: HashSet<PublicKey>,
    sink: Option<File>,
}

impl Ledger {
    /// An in-memory ledger holding only the genesis block.
    pub fn new(authorities: impl IntoIterator<Item = PublicKey>) -> Self {
        let genesis = LedgerBlock::genesis();
        Self {
            encoded: vec![genesis.encode()],
            blocks: vec![genesis],
            state: HashMap::new(),
            authorities: authorities.into_iter().collect(),
            sink: None,
        }
    }

    /// Opens a ledger file, creating it with a genesis block when absent or
    /// empty. Existing contents are verified and replayed.
    pub fn open(path: &Path, authorities: impl IntoIterator<Item = PublicKey>) -> Result<Self, LedgerError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let mut ledger = if bytes.is_empty() {
            let ledger = Self::new(authorities);
            file.write_all(&ledger.encoded[0])?;
            file.sync_data()?;
            ledger
        } else {
            Self::from_bytes(&bytes, authorities)?
        };
        ledger.sink = Some(file);
        Ok(ledger)
    }

    /// Rebuilds a ledger from raw bytes, verifying the chain and replaying
    /// every event's signature and transition.
    pub fn from_bytes(bytes: &[u8], authorities: impl IntoIterator<Item = PublicKey>) -> Result<Self, LedgerError> {
        let blocks = decode_chain(bytes).map_err(|(index, fault)| LedgerError::Corrupt { index, fault })?;
        if let ChainVerdict::Invalid { index, fault } = verify_blocks(&blocks) {
            return Err(LedgerError::Corrupt { index, fault });
        }
        if !blocks[0].events.is_empty() {
            return Err(LedgerError::Corrupt {
                index: 0,
                fault: ChainFault::Malformed("genesis carries events".into()),
            });
        }
        let mut ledger = Self {
            encoded: Vec::with_capacity(blocks.len()),
            blocks: Vec::with_capacity(blocks.len()),
            state: HashMap::new(),
            authorities: authorities.into_iter().collect(),
            sink: None,
        };
        for block in blocks {
            for event in &block.events {
                event.verify_signature().and_then(|_| ledger.check(event)).map_err(|e| {
                    LedgerError::Replay {
                        index: block.index,
                        source: Box::new(e),
                    }
                })?;
            }
            for event in &block.events {
                ledger.apply(event, block.index);
            }
            ledger.encoded.push(block.encode());
            ledger.blocks.push(block);
        }
        Ok(ledger)
    }

    pub fn authorities(&self) -> &HashSet<PublicKey> {
        &self.authorities
    }

    pub fn is_authority(&self, key: &PublicKey) -> bool {
        self.authorities.contains(key)
    }

    // Transition rules shared by appends and replay. Authority membership is
    // enforced only on append: sealed history stays valid if the key set
    // later changes.
    fn check(&self, event: &LedgerEvent) -> Result<(), LedgerError> {
        match event {
            LedgerEvent::Register { entry, .. } => {
                if self.state.contains_key(&entry.ai_id) {
                    return Err(LedgerError::Duplicate(entry.ai_id));
                }
                Ok(())
            }
            LedgerEvent::StatusUpdate { ai_id, new_status, .. } => {
                let st = self.state.get(ai_id).ok_or(LedgerError::UnknownAiId(*ai_id))?;
                let from = st.status();
                if !from.can_transition_to(*new_status) {
                    return Err(LedgerError::IllegalTransition { from, to: *new_status });
                }
                Ok(())
            }
        }
    }

    fn apply(&mut self, event: &LedgerEvent, block_index: u64) {
        match event {
            LedgerEvent::Register { timestamp, entry } => {
                self.state.insert(
                    entry.ai_id,
                    EntryState {
                        entry: entry.clone(),
                        history: vec![StatusChange {
                            status: TestingStatus::U,
                            timestamp: *timestamp,
                            block_index,
                        }],
                    },
                );
            }
            LedgerEvent::StatusUpdate {
                timestamp,
                ai_id,
                new_status,
                ..
            } => {
                if let Some(st) = self.state.get_mut(ai_id) {
                    st.history.push(StatusChange {
                        status: *new_status,
                        timestamp: *timestamp,
                        block_index,
                    });
                }
            }
        }
    }

    fn seal(&mut self, event: LedgerEvent) -> Result<&LedgerBlock, LedgerError> {
        let head = self.blocks.last().expect("genesis present");
        let block = LedgerBlock::seal(head.index + 1, head.block_hash, event.timestamp(), vec![event]);
        let bytes = block.encode();
        if let Some(f) = self.sink.as_mut() {
            f.write_all(&bytes)?;
            f.sync_data()?;
        }
        let index = block.index;
        for e in &block.events {
            self.apply(e, index);
        }
        self.encoded.push(bytes);
        self.blocks.push(block);
        Ok(self.blocks.last().unwrap())
    }

    pub fn append_register(&mut self, entry: RegistryEntry, timestamp: u64) -> Result<&LedgerBlock, LedgerError> {
        entry.verify_signature()?;
        let event = LedgerEvent::Register { timestamp, entry };
        self.check(&event)?;
        self.seal(event)
    }

    pub fn append_status(
        &mut self,
        ai_id: &PrimaryIdentifier,
        new_status: TestingStatus,
        timestamp: u64,
        authority_public_key: PublicKey,
        authority_signature: Signature,
    ) -> Result<&LedgerBlock, LedgerError> {
        let event = LedgerEvent::StatusUpdate {
            timestamp,
            ai_id: *ai_id,
            new_status,
            authority_public_key,
            authority_signature,
        };
        // unknown id and illegal transitions are reported before signer problems
        self.check(&event)?;
        if !self.is_authority(&authority_public_key) {
            return Err(LedgerError::Unauthorized(authority_public_key));
        }
        event.verify_signature()?;
        self.seal(event)
    }

    pub fn lookup(&self, ai_id: &PrimaryIdentifier) -> Result<(&RegistryEntry, TestingStatus), LedgerError> {
        self.state
            .get(ai_id)
            .map(|st| (&st.entry, st.status()))
            .ok_or(LedgerError::UnknownAiId(*ai_id))
    }

    pub fn history(&self, ai_id: &PrimaryIdentifier) -> Result<&[StatusChange], LedgerError> {
        self.state
            .get(ai_id)
            .map(|st| st.history.as_slice())
            .ok_or(LedgerError::UnknownAiId(*ai_id))
    }

    pub fn blocks(&self) -> &[LedgerBlock] {
        &self.blocks
    }

    pub fn head(&self) -> &LedgerBlock {
        self.blocks.last().expect("genesis present")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entry_count(&self) -> usize {
        self.state.len()
    }

    pub fn verify_chain(&self) -> ChainVerdict {
        verify_blocks(&self.blocks)
    }

    /// Canonical bytes of blocks `from..`. `from == len()` yields nothing.
    pub fn audit_blocks(&self, from: u64) -> Result<&[Vec<u8>], LedgerError> {
        let from = usize::try_from(from).map_err(|_| LedgerError::BeyondHead(from))?;
        if from > self.encoded.len() {
            return Err(LedgerError::BeyondHead(from as u64));
        }
        Ok(&self.encoded[from..])
    }

    /// The full ledger byte stream, as persisted.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.encoded.concat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{build_secondary_id, commit_bytes, derive_ai_id, SecondaryFields};
    use crate::keys::Keypair;
    use proptest::prelude::*;

    fn signed_entry(dev: &Keypair, seed: &[u8]) -> RegistryEntry {
        let ns = IssuerNamespace::new("TESTOWN1").unwrap();
        let h = commit_bytes(seed);
        UnsignedEntry {
            ai_id: derive_ai_id(&h, &ns),
            secondary_id: build_secondary_id(
                SecondaryFields::new("US", "TESTOWN1", "ABC", "01", "20250101"),
                &h,
            )
            .unwrap(),
            namespace: ns,
            zkp_anchor: Digest32::of(b"anchor"),
            metadata_digest: Digest32::of(b"metadata"),
            developer_public_key: dev.public(),
            registered_at: 1_700_000_000,
        }
        .signed_by(dev)
    }

    impl UnsignedEntry {
        fn signed_by(self, kp: &Keypair) -> RegistryEntry {
            let sig = kp.sign(&self.canonical_bytes());
            self.signed(sig)
        }
    }

    fn status(
        ledger: &mut Ledger,
        auth: &Keypair,
        ai_id: &PrimaryIdentifier,
        s: TestingStatus,
        ts: u64,
    ) -> Result<u64, LedgerError> {
        let sig = auth.sign(&status_update_message(ai_id, s, ts));
        ledger.append_status(ai_id, s, ts, auth.public(), sig).map(|b| b.index)
    }

    #[test]
    fn first_registration_is_block_one_with_status_u() {
        let dev = Keypair::from_secret([1; 32]);
        let mut l = Ledger::new([]);
        let e = signed_entry(&dev, b"m1");
        let block = l.append_register(e.clone(), 10).unwrap();
        assert_eq!(block.index, 1);
        assert_eq!(block.prev_block_hash, LedgerBlock::genesis().block_hash);
        let (got, st) = l.lookup(&e.ai_id).unwrap();
        assert_eq!((got, st), (&e, TestingStatus::U));
        assert!(matches!(l.append_register(e, 11), Err(LedgerError::Duplicate(_))));
        assert_eq!(l.len(), 2);
    }

    #[test]
    fn corrupted_signature_rejected() {
        let dev = Keypair::from_secret([1; 32]);
        let mut l = Ledger::new([]);
        let mut e = signed_entry(&dev, b"m1");
        e.developer_signature.0[5] ^= 0x40;
        assert!(matches!(l.append_register(e, 1), Err(LedgerError::InvalidSignature)));
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn status_lifecycle_and_history() {
        let dev = Keypair::from_secret([1; 32]);
        let auth = Keypair::from_secret([2; 32]);
        let rogue = Keypair::from_secret([3; 32]);
        let mut l = Ledger::new([auth.public()]);
        let e = signed_entry(&dev, b"m1");
        let id = e.ai_id;
        l.append_register(e, 100).unwrap();

        assert!(matches!(
            status(&mut l, &rogue, &id, TestingStatus::P, 101),
            Err(LedgerError::Unauthorized(_))
        ));
        assert_eq!(status(&mut l, &auth, &id, TestingStatus::P, 102).unwrap(), 2);
        assert_eq!(l.lookup(&id).unwrap().1, TestingStatus::P);
        assert!(matches!(
            status(&mut l, &auth, &id, TestingStatus::U, 103),
            Err(LedgerError::IllegalTransition { .. })
        ));
        status(&mut l, &auth, &id, TestingStatus::X, 104).unwrap();
        assert!(matches!(
            status(&mut l, &auth, &id, TestingStatus::P, 105),
            Err(LedgerError::IllegalTransition {
                from: TestingStatus::X,
                to: TestingStatus::P
            })
        ));
        let h = l.history(&id).unwrap();
        let trail: Vec<_> = h.iter().map(|c| (c.status, c.timestamp, c.block_index)).collect();
        assert_eq!(
            trail,
            [
                (TestingStatus::U, 100, 1),
                (TestingStatus::P, 102, 2),
                (TestingStatus::X, 104, 3)
            ]
        );
        let unknown = PrimaryIdentifier([9; 32]);
        assert!(matches!(l.lookup(&unknown), Err(LedgerError::UnknownAiId(_))));
        assert!(matches!(l.history(&unknown), Err(LedgerError::UnknownAiId(_))));
        assert!(matches!(
            status(&mut l, &auth, &unknown, TestingStatus::P, 1),
            Err(LedgerError::UnknownAiId(_))
        ));
    }

    #[test]
    fn forged_status_signature_rejected() {
        let dev = Keypair::from_secret([1; 32]);
        let auth = Keypair::from_secret([2; 32]);
        let mut l = Ledger::new([auth.public()]);
        let e = signed_entry(&dev, b"m1");
        let id = e.ai_id;
        l.append_register(e, 1).unwrap();
        // signed for a different timestamp
        let sig = auth.sign(&status_update_message(&id, TestingStatus::P, 7));
        assert!(matches!(
            l.append_status(&id, TestingStatus::P, 8, auth.public(), sig),
            Err(LedgerError::InvalidSignature)
        ));
    }

    #[test]
    fn transition_matrix() {
        use TestingStatus::*;
        let allowed = [(U, P), (U, F), (P, F), (P, X), (F, X)];
        for from in TestingStatus::ALL {
            for to in TestingStatus::ALL {
                assert_eq!(from.can_transition_to(to), allowed.contains(&(from, to)), "{from}->{to}");
            }
        }
    }

    #[test]
    fn verify_and_replay_round_trip() {
        let dev = Keypair::from_secret([1; 32]);
        let auth = Keypair::from_secret([2; 32]);
        let mut l = Ledger::new([auth.public()]);
        let e = signed_entry(&dev, b"m1");
        let id = e.ai_id;
        l.append_register(e, 1).unwrap();
        status(&mut l, &auth, &id, TestingStatus::F, 2).unwrap();
        assert_eq!(l.verify_chain(), ChainVerdict::Ok { blocks: 3 });
        let bytes = l.to_bytes();
        assert_eq!(verify_chain_bytes(&bytes), ChainVerdict::Ok { blocks: 3 });
        let replayed = Ledger::from_bytes(&bytes, [auth.public()]).unwrap();
        assert_eq!(replayed.lookup(&id).unwrap(), l.lookup(&id).unwrap());
        assert_eq!(replayed.history(&id).unwrap(), l.history(&id).unwrap());
    }

    #[test]
    fn swapped_blocks_reported_as_link_or_index_violation() {
        let dev = Keypair::from_secret([1; 32]);
        let mut l = Ledger::new([]);
        for i in 0..3u8 {
            l.append_register(signed_entry(&dev, &[i]), u64::from(i)).unwrap();
        }
        let blocks = l.audit_blocks(0).unwrap();
        let swapped = [&blocks[0], &blocks[2], &blocks[1], &blocks[3]]
            .into_iter()
            .flatten()
            .copied()
            .collect::<Vec<u8>>();
        match verify_chain_bytes(&swapped) {
            ChainVerdict::Invalid { index: 1, fault } => {
                assert!(matches!(fault, ChainFault::IndexMismatch | ChainFault::LinkMismatch))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn genesis_only_and_empty() {
        let l = Ledger::new([]);
        assert_eq!(verify_chain_bytes(&l.to_bytes()), ChainVerdict::Ok { blocks: 1 });
        assert_eq!(
            verify_chain_bytes(&[]),
            ChainVerdict::Invalid {
                index: 0,
                fault: ChainFault::MissingGenesis
            }
        );
        assert!(l.audit_blocks(1).unwrap().is_empty());
        assert!(matches!(l.audit_blocks(2), Err(LedgerError::BeyondHead(2))));
    }

    #[test]
    fn file_persistence_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.bin");
        let dev = Keypair::from_secret([1; 32]);
        let auth = Keypair::from_secret([2; 32]);
        let e = signed_entry(&dev, b"m1");
        let id = e.ai_id;
        {
            let mut l = Ledger::open(&path, [auth.public()]).unwrap();
            l.append_register(e, 5).unwrap();
            status(&mut l, &auth, &id, TestingStatus::P, 6).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), l.to_bytes());
        }
        let l = Ledger::open(&path, [auth.public()]).unwrap();
        assert_eq!(l.lookup(&id).unwrap().1, TestingStatus::P);
        assert_eq!(l.len(), 3);

        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 40] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            Ledger::open(&path, [auth.public()]),
            Err(LedgerError::Corrupt { index: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn history_indices_strictly_increase(steps in proptest::collection::vec((0usize..3, 0usize..4), 1..40)) {
            let dev = Keypair::from_secret([1; 32]);
            let auth = Keypair::from_secret([2; 32]);
            let mut l = Ledger::new([auth.public()]);
            let ids: Vec<_> = (0..3u8)
                .map(|i| {
                    let e = signed_entry(&dev, &[i]);
                    let id = e.ai_id;
                    l.append_register(e, 0).unwrap();
                    id
                })
                .collect();
            let mut accepted = [0usize; 3];
            for (ts, (who, st)) in steps.into_iter().enumerate() {
                if status(&mut l, &auth, &ids[who], TestingStatus::ALL[st], ts as u64).is_ok() {
                    accepted[who] += 1;
                }
            }
            for (i, id) in ids.iter().enumerate() {
                let h = l.history(id).unwrap();
                prop_assert_eq!(h.len(), 1 + accepted[i]);
                prop_assert_eq!(h[0].status, TestingStatus::U);
                prop_assert!(h.windows(2).all(|w| w[0].block_index < w[1].block_index));
                prop_assert!(h.windows(2).all(|w| w[0].status.can_transition_to(w[1].status)));
            }
            prop_assert!(l.verify_chain().is_ok());
        }
    }
}
