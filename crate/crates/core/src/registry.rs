// SPDX-License-Identifier: Apache-2.0

//! The checkpoint authority: registration, status updates, identity
//! challenges, proof verification, drift attestations and ledger audit.
//!
//! Transport-free; the HTTP server and tests drive it directly. The service
//! never receives `H_w` or weight bytes: bundles carry only the AI-ID, the
//! hash tail and opaque metadata.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{complete_secondary_id, Digest32, IssuerNamespace, PrimaryIdentifier, SecondaryFields};
use crate::keys::{PublicKey, Signature};
use crate::ledger::{Ledger, LedgerError, RegistryEntry, StatusChange, TestingStatus, UnsignedEntry};
use crate::lzjd::{DriftMode, DriftOutcome, DriftPolicy};
use crate::zk::{self, PossessionProof, PossessionStatement};

pub const DEFAULT_CHALLENGE_TTL: u64 = 300;
/// Largest round count whose anchor the registry recognises.
pub const MAX_ROUNDS: u16 = 1024;
pub const DEFAULT_RISK_CLASS: &str = "default";
pub const DRIFT_ATTESTATION_TAG: &[u8] = b"LZJD-ATTEST-V1";

/// Seconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start: u64) -> Self {
        Self(AtomicU64::new(start))
    }

    pub fn set(&self, t: u64) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistryConfig {
    pub authorities: Vec<PublicKey>,
    pub challenge_ttl_secs: u64,
    /// Registrations whose anchor commits to fewer rounds are refused.
    pub min_rounds: u16,
    /// Drift threshold per risk class.
    pub drift_policies: BTreeMap<String, f64>,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self {
            authorities: Vec::new(),
            challenge_ttl_secs: DEFAULT_CHALLENGE_TTL,
            min_rounds: zk::DEFAULT_ROUNDS,
            drift_policies: BTreeMap::from([(DEFAULT_RISK_CLASS.to_owned(), 0.5)]),
        }
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("ai_id {0} is not registered")]
    Unregistered(PrimaryIdentifier),
    #[error("ai_id {0} is already registered")]
    Duplicate(PrimaryIdentifier),
    #[error("invalid signature")]
    InvalidSignature,
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("signer {0} is not a configured authority")]
    Unauthorized(PublicKey),
    #[error("illegal status transition {from} -> {to}")]
    IllegalTransition { from: TestingStatus, to: TestingStatus },
    #[error("unknown or already consumed challenge")]
    UnknownChallenge,
    #[error("block index {0} is beyond the ledger head")]
    BeyondHead(u64),
    #[error(transparent)]
    Ledger(LedgerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RegistryError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::Unregistered(_) => "UNREGISTERED",
            RegistryError::Duplicate(_) => "DUPLICATE",
            RegistryError::InvalidSignature => "INVALID_SIGNATURE",
            RegistryError::Malformed(_) => "MALFORMED",
            RegistryError::Unauthorized(_) => "UNAUTHORIZED",
            RegistryError::IllegalTransition { .. } => "ILLEGAL_TRANSITION",
            RegistryError::UnknownChallenge => "UNKNOWN_CHALLENGE",
            RegistryError::BeyondHead(_) => "BEYOND_HEAD",
            RegistryError::Ledger(_) | RegistryError::Io(_) => "INTERNAL",
        }
    }
}

impl From<LedgerError> for RegistryError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Duplicate(id) => RegistryError::Duplicate(id),
            LedgerError::InvalidSignature => RegistryError::InvalidSignature,
            LedgerError::Malformed(m) => RegistryError::Malformed(m),
            LedgerError::UnknownAiId(id) => RegistryError::Unregistered(id),
            LedgerError::IllegalTransition { from, to } => RegistryError::IllegalTransition { from, to },
            LedgerError::Unauthorized(pk) => RegistryError::Unauthorized(pk),
            LedgerError::BeyondHead(i) => RegistryError::BeyondHead(i),
            other => RegistryError::Ledger(other),
        }
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(v: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let mut out = [0u8; N];
        hex::decode_to_slice(String::deserialize(d)?, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

/// A developer's signed registration request.
///
/// The owner field of the secondary identifier is the namespace. The
/// signature covers the canonical bytes of the entry the bundle describes,
/// see [`RegistrationBundle::unsigned_entry`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationBundle {
    pub namespace: IssuerNamespace,
    pub country: String,
    pub family: String,
    pub version: String,
    pub date: String,
    pub hash_tail: String,
    pub ai_id: PrimaryIdentifier,
    pub zkp_anchor: Digest32,
    #[serde(with = "hex_bytes")]
    pub metadata: Vec<u8>,
    pub developer_public_key: PublicKey,
    pub registered_at: u64,
    pub developer_signature: Signature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_class: Option<String>,
}

impl RegistrationBundle {
    pub fn secondary_fields(&self) -> SecondaryFields {
        SecondaryFields::new(
            &self.country,
            self.namespace.as_str(),
            &self.family,
            &self.version,
            &self.date,
        )
    }

    /// The entry this bundle registers, minus the signature. The service
    /// completes the secondary identifier's checksum itself.
    pub fn unsigned_entry(&self) -> Result<UnsignedEntry, RegistryError> {
        let secondary_id = complete_secondary_id(self.secondary_fields(), &self.hash_tail)
            .map_err(|e| RegistryError::Malformed(e.to_string()))?;
        Ok(UnsignedEntry {
            ai_id: self.ai_id,
            secondary_id,
            namespace: self.namespace,
            zkp_anchor: self.zkp_anchor,
            metadata_digest: Digest32::of(&self.metadata),
            developer_public_key: self.developer_public_key,
            registered_at: self.registered_at,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub entry: RegistryEntry,
    pub secondary_id: String,
    pub status: TestingStatus,
    pub block_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    #[serde(with = "hex_array")]
    pub challenge_id: [u8; 16],
    pub ai_id: PrimaryIdentifier,
    #[serde(with = "hex_array")]
    pub nonce: [u8; 32],
    pub issued_at: u64,
    pub expires_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerificationOutcome {
    Verified,
    Rejected,
    Unregistered,
    Expired,
    StatusBlocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    #[serde(with = "hex_array")]
    pub challenge_id: [u8; 16],
    pub outcome: VerificationOutcome,
    pub status: Option<TestingStatus>,
    pub detail: String,
}

/// A reporter's signed claim that it screened a deployed model for drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub ai_id: PrimaryIdentifier,
    pub score: f64,
    pub mode: DriftMode,
    pub candidate_sketch_digest: Digest32,
    pub timestamp: u64,
    pub reporter_public_key: PublicKey,
    pub reporter_signature: Signature,
}

/// `"LZJD-ATTEST-V1" | ai_id | score f64 LE | mode u8 | sketch digest | timestamp u64 LE`
pub fn drift_report_message(
    ai_id: &PrimaryIdentifier,
    score: f64,
    mode: DriftMode,
    candidate_sketch_digest: &Digest32,
    timestamp: u64,
) -> Vec<u8> {
    let mut m = Vec::with_capacity(DRIFT_ATTESTATION_TAG.len() + 32 + 8 + 1 + 32 + 8);
    m.extend_from_slice(DRIFT_ATTESTATION_TAG);
    m.extend_from_slice(ai_id.as_bytes());
    m.extend_from_slice(&score.to_le_bytes());
    m.push(mode.code());
    m.extend_from_slice(candidate_sketch_digest.as_bytes());
    m.extend_from_slice(&timestamp.to_le_bytes());
    m
}

impl DriftReport {
    pub fn message(&self) -> Vec<u8> {
        drift_report_message(
            &self.ai_id,
            self.score,
            self.mode,
            &self.candidate_sketch_digest,
            self.timestamp,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftAttestationRecord {
    #[serde(flatten)]
    pub report: DriftReport,
    pub risk_class: String,
    pub threshold: f64,
    pub outcome: DriftOutcome,
    pub recorded_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryView {
    pub entry: RegistryEntry,
    pub secondary_id: String,
    pub status: TestingStatus,
    pub risk_class: String,
    pub drift_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryHistory {
    pub ai_id: PrimaryIdentifier,
    pub status_changes: Vec<StatusChange>,
    pub drift_attestations: Vec<DriftAttestationRecord>,
}

/// Sidecar journal line. Risk classes and drift records live outside the
/// signed ledger because neither is part of the developer's signed entry.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum JournalLine {
    RiskClass { ai_id: PrimaryIdentifier, risk_class: String },
    Drift { record: DriftAttestationRecord },
}

#[derive(Debug, Default)]
struct Annotations {
    risk_class: HashMap<PrimaryIdentifier, String>,
    drift: HashMap<PrimaryIdentifier, Vec<DriftAttestationRecord>>,
}

impl Annotations {
    fn apply(&mut self, line: JournalLine) {
        match line {
            JournalLine::RiskClass { ai_id, risk_class } => {
                self.risk_class.insert(ai_id, risk_class);
            }
            JournalLine::Drift { record } => {
                self.drift.entry(record.report.ai_id).or_default().push(record);
            }
        }
    }

    fn flagged(&self, ai_id: &PrimaryIdentifier) -> bool {
        self.drift
            .get(ai_id)
            .is_some_and(|v| v.iter().any(|r| r.outcome == DriftOutcome::Drifted))
    }
}

/// Returns `r` when `anchor == zkp_anchor(r)` for some `r` in `1..=MAX_ROUNDS`.
pub fn anchor_rounds(anchor: &Digest32) -> Option<u16> {
    (1..=MAX_ROUNDS).find(|&r| zk::zkp_anchor(r) == *anchor)
}

pub struct Registry {
    config: RegistryConfig,
    policies: BTreeMap<String, DriftPolicy>,
    ledger: RwLock<Ledger>,
    challenges: Mutex<HashMap<[u8; 16], Challenge>>,
    used_nonces: Mutex<HashSet<[u8; 32]>>,
    annotations: RwLock<Annotations>,
    journal: Mutex<Option<File>>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Registry {
    /// An in-memory registry.
    pub fn new(config: RegistryConfig, clock: Arc<dyn Clock>) -> Result<Self, RegistryError> {
        let ledger = Ledger::new(config.authorities.iter().copied());
        Self::assemble(config, clock, ledger, Annotations::default(), None)
    }

    /// A registry persisted to `ledger_path`, with annotations in
    /// `<ledger_path>.journal`.
    pub fn open(config: RegistryConfig, clock: Arc<dyn Clock>, ledger_path: &Path) -> Result<Self, RegistryError> {
        let ledger = Ledger::open(ledger_path, config.authorities.iter().copied())?;
        let journal_path = journal_path(ledger_path);
        let mut annotations = Annotations::default();
        if journal_path.exists() {
            for (n, line) in BufReader::new(File::open(&journal_path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str(&line)
                    .map_err(|e| RegistryError::Malformed(format!("journal line {}: {e}", n + 1)))?;
                annotations.apply(parsed);
            }
        }
        let journal = OpenOptions::new().create(true).append(true).open(&journal_path)?;
        Self::assemble(config, clock, ledger, annotations, Some(journal))
    }

    fn assemble(
        config: RegistryConfig,
        clock: Arc<dyn Clock>,
        ledger: Ledger,
        annotations: Annotations,
        journal: Option<File>,
    ) -> Result<Self, RegistryError> {
        if config.min_rounds == 0 || config.min_rounds > MAX_ROUNDS {
            return Err(RegistryError::Malformed(format!("min_rounds {} out of range", config.min_rounds)));
        }
        let policies = config
            .drift_policies
            .iter()
            .map(|(class, &tau)| {
                DriftPolicy::new(tau, class.clone())
                    .map(|p| (class.clone(), p))
                    .map_err(|e| RegistryError::Malformed(e.to_string()))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        if !policies.contains_key(DEFAULT_RISK_CLASS) {
            return Err(RegistryError::Malformed(format!("no drift policy for class {DEFAULT_RISK_CLASS:?}")));
        }
        Ok(Self {
            config,
            policies,
            ledger: RwLock::new(ledger),
            challenges: Mutex::new(HashMap::new()),
            used_nonces: Mutex::new(HashSet::new()),
            annotations: RwLock::new(annotations),
            journal: Mutex::new(journal),
            clock,
        })
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    fn journal(&self, line: &JournalLine) -> Result<(), RegistryError> {
        if let Some(f) = self.journal.lock().unwrap().as_mut() {
            let mut text = serde_json::to_string(line).map_err(|e| RegistryError::Malformed(e.to_string()))?;
            text.push('\n');
            f.write_all(text.as_bytes())?;
            f.sync_data()?;
        }
        Ok(())
    }

    pub fn register(&self, bundle: &RegistrationBundle) -> Result<Credential, RegistryError> {
        let unsigned = bundle.unsigned_entry()?;
        let risk_class = bundle.risk_class.clone().unwrap_or_else(|| DEFAULT_RISK_CLASS.to_owned());
        if !self.policies.contains_key(&risk_class) {
            return Err(RegistryError::Malformed(format!("unknown risk class {risk_class:?}")));
        }
        match anchor_rounds(&bundle.zkp_anchor) {
            Some(r) if r >= self.config.min_rounds => {}
            Some(r) => {
                return Err(RegistryError::Malformed(format!(
                    "zkp_anchor commits to {r} rounds, below the minimum {}",
                    self.config.min_rounds
                )))
            }
            None => return Err(RegistryError::Malformed("unrecognised zkp_anchor".into())),
        }
        let entry = unsigned.signed(bundle.developer_signature);
        let now = self.clock.now();
        let mut ledger = self.ledger.write().unwrap();
        let block_index = ledger.append_register(entry.clone(), now)?.index;
        if risk_class != DEFAULT_RISK_CLASS {
            let line = JournalLine::RiskClass {
                ai_id: entry.ai_id,
                risk_class,
            };
            self.journal(&line)?;
            self.annotations.write().unwrap().apply(line);
        }
        Ok(Credential {
            secondary_id: entry.secondary_id.render(),
            entry,
            status: TestingStatus::U,
            block_index,
        })
    }

    pub fn update_status(
        &self,
        ai_id: &PrimaryIdentifier,
        new_status: TestingStatus,
        timestamp: u64,
        authority_public_key: PublicKey,
        authority_signature: Signature,
    ) -> Result<TestingStatus, RegistryError> {
        let mut ledger = self.ledger.write().unwrap();
        ledger.append_status(ai_id, new_status, timestamp, authority_public_key, authority_signature)?;
        Ok(new_status)
    }

    pub fn lookup(&self, ai_id: &PrimaryIdentifier) -> Result<EntryView, RegistryError> {
        let ledger = self.ledger.read().unwrap();
        let (entry, status) = ledger.lookup(ai_id)?;
        let notes = self.annotations.read().unwrap();
        Ok(EntryView {
            secondary_id: entry.secondary_id.render(),
            entry: entry.clone(),
            status,
            risk_class: self.risk_class_of(&notes, ai_id),
            drift_flagged: notes.flagged(ai_id),
        })
    }

    fn risk_class_of(&self, notes: &Annotations, ai_id: &PrimaryIdentifier) -> String {
        notes
            .risk_class
            .get(ai_id)
            .cloned()
            .unwrap_or_else(|| DEFAULT_RISK_CLASS.to_owned())
    }

    pub fn history(&self, ai_id: &PrimaryIdentifier) -> Result<EntryHistory, RegistryError> {
        let ledger = self.ledger.read().unwrap();
        let status_changes = ledger.history(ai_id)?.to_vec();
        let drift_attestations = self.annotations.read().unwrap().drift.get(ai_id).cloned().unwrap_or_default();
        Ok(EntryHistory {
            ai_id: *ai_id,
            status_changes,
            drift_attestations,
        })
    }

    pub fn issue_challenge(&self, ai_id: &PrimaryIdentifier) -> Result<Challenge, RegistryError> {
        self.ledger.read().unwrap().lookup(ai_id)?;
        let now = self.clock.now();
        let mut rng = rand::thread_rng();
        let mut nonce = [0u8; 32];
        {
            let mut used = self.used_nonces.lock().unwrap();
            loop {
                rng.fill_bytes(&mut nonce);
                if used.insert(nonce) {
                    break;
                }
            }
        }
        let mut challenges = self.challenges.lock().unwrap();
        challenges.retain(|_, c| c.expires_at > now);
        let mut challenge_id = [0u8; 16];
        loop {
            rng.fill_bytes(&mut challenge_id);
            if !challenges.contains_key(&challenge_id) {
                break;
            }
        }
        let challenge = Challenge {
            challenge_id,
            ai_id: *ai_id,
            nonce,
            issued_at: now,
            expires_at: now + self.config.challenge_ttl_secs.max(1),
        };
        challenges.insert(challenge_id, challenge.clone());
        Ok(challenge)
    }

    /// Consumes the challenge and judges the proof against the registered
    /// entry. Any parse or verification failure is a `REJECTED` verdict.
    pub fn submit_proof(&self, challenge_id: &[u8; 16], proof: &[u8]) -> Result<VerificationVerdict, RegistryError> {
        let challenge = self
            .challenges
            .lock()
            .unwrap()
            .remove(challenge_id)
            .ok_or(RegistryError::UnknownChallenge)?;
        let verdict = |outcome, status, detail: String| VerificationVerdict {
            challenge_id: *challenge_id,
            outcome,
            status,
            detail,
        };
        if self.clock.now() >= challenge.expires_at {
            return Ok(verdict(VerificationOutcome::Expired, None, "challenge expired".into()));
        }
        let (entry, status) = match self.ledger.read().unwrap().lookup(&challenge.ai_id) {
            Ok((e, s)) => (e.clone(), s),
            Err(_) => {
                return Ok(verdict(VerificationOutcome::Unregistered, None, challenge.ai_id.to_hex()));
            }
        };
        let proof = match PossessionProof::from_bytes(proof) {
            Ok(p) => p,
            Err(e) => return Ok(verdict(VerificationOutcome::Rejected, Some(status), e.to_string())),
        };
        let Some(rounds) = anchor_rounds(&entry.zkp_anchor) else {
            return Ok(verdict(VerificationOutcome::Rejected, Some(status), "entry has no usable zkp_anchor".into()));
        };
        let statement = PossessionStatement::new(entry.ai_id, entry.namespace, challenge.nonce).with_rounds(rounds);
        if let Err(rejection) = zk::verify(&statement, &proof) {
            return Ok(verdict(VerificationOutcome::Rejected, Some(status), rejection.to_string()));
        }
        Ok(if status == TestingStatus::P {
            verdict(VerificationOutcome::Verified, Some(status), "proof verified".into())
        } else {
            verdict(
                VerificationOutcome::StatusBlocked,
                Some(status),
                format!("proof verified but status is {status}"),
            )
        })
    }

    pub fn record_drift_attestation(&self, report: &DriftReport) -> Result<DriftAttestationRecord, RegistryError> {
        if !(0.0..=1.0).contains(&report.score) {
            return Err(RegistryError::Malformed(format!("score {} outside [0, 1]", report.score)));
        }
        self.ledger.read().unwrap().lookup(&report.ai_id)?;
        report
            .reporter_public_key
            .verify(&report.message(), &report.reporter_signature)
            .map_err(|_| RegistryError::InvalidSignature)?;
        let mut notes = self.annotations.write().unwrap();
        let risk_class = self.risk_class_of(&notes, &report.ai_id);
        let policy = &self.policies[&risk_class];
        let record = DriftAttestationRecord {
            report: report.clone(),
            threshold: policy.threshold(),
            outcome: policy.outcome(report.score),
            risk_class,
            recorded_at: self.clock.now(),
        };
        let line = JournalLine::Drift { record: record.clone() };
        self.journal(&line)?;
        notes.apply(line);
        Ok(record)
    }

    /// Canonical encodings of blocks `from..`.
    pub fn audit_blocks(&self, from: u64) -> Result<Vec<Vec<u8>>, RegistryError> {
        Ok(self.ledger.read().unwrap().audit_blocks(from)?.to_vec())
    }

    pub fn ledger_len(&self) -> usize {
        self.ledger.read().unwrap().len()
    }
}

pub fn journal_path(ledger_path: &Path) -> PathBuf {
    let mut p = ledger_path.as_os_str().to_owned();
    p.push(".journal");
    PathBuf::from(p)
}

/// Builds and signs a registration bundle on the developer side, where
/// `H_w` is known.
pub fn sign_bundle(mut bundle: RegistrationBundle, developer: &crate::keys::Keypair) -> Result<RegistrationBundle, RegistryError> {
    bundle.developer_public_key = developer.public();
    let bytes = bundle.unsigned_entry()?.canonical_bytes();
    bundle.developer_signature = developer.sign(&bytes);
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{commit_bytes, derive_ai_id, hash_tail, Commitment};
    use crate::keys::Keypair;
    use crate::ledger::status_update_message;
    use crate::zk::{prove, PossessionWitness};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        registry: Registry,
        clock: Arc<ManualClock>,
        dev: Keypair,
        authority: Keypair,
    }

    fn fixture(rounds: u16) -> Fixture {
        let authority = Keypair::from_secret([1; 32]);
        let clock = Arc::new(ManualClock::new(1_700_000_000));
        let config = RegistryConfig {
            authorities: vec![authority.public()],
            min_rounds: rounds,
            drift_policies: BTreeMap::from([("default".into(), 0.5), ("high".into(), 0.1)]),
            ..RegistryConfig::default()
        };
        Fixture {
            registry: Registry::new(config, clock.clone()).unwrap(),
            clock,
            dev: Keypair::from_secret([2; 32]),
            authority,
        }
    }

    fn bundle(f: &Fixture, h: &Commitment, rounds: u16) -> RegistrationBundle {
        let ns = IssuerNamespace::new("ACME0001").unwrap();
        sign_bundle(
            RegistrationBundle {
                namespace: ns,
                country: "US".into(),
                family: "LLM".into(),
                version: "01".into(),
                date: "20250101".into(),
                hash_tail: hash_tail(h),
                ai_id: derive_ai_id(h, &ns),
                zkp_anchor: zk::zkp_anchor(rounds),
                metadata: b"{\"card\":1}".to_vec(),
                developer_public_key: f.dev.public(),
                registered_at: 1_700_000_000,
                developer_signature: Signature([0; 64]),
                risk_class: None,
            },
            &f.dev,
        )
        .unwrap()
    }

    fn set_status(f: &Fixture, ai_id: &PrimaryIdentifier, s: TestingStatus) -> Result<TestingStatus, RegistryError> {
        let ts = f.clock.now();
        let sig = f.authority.sign(&status_update_message(ai_id, s, ts));
        f.registry.update_status(ai_id, s, ts, f.authority.public(), sig)
    }

    fn proof_for(h: &Commitment, c: &Challenge, rounds: u16) -> Vec<u8> {
        let ns = IssuerNamespace::new("ACME0001").unwrap();
        let st = PossessionStatement::new(c.ai_id, ns, c.nonce).with_rounds(rounds);
        let mut rng = ChaCha20Rng::seed_from_u64(c.issued_at);
        prove(&st, &PossessionWitness { h: *h }, &mut rng).unwrap().to_bytes()
    }

    #[test]
    fn register_then_duplicate() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let b = bundle(&f, &h, 4);
        let cred = f.registry.register(&b).unwrap();
        assert_eq!(cred.status, TestingStatus::U);
        assert_eq!(cred.secondary_id.len(), 34);
        assert!(cred.secondary_id.starts_with("US-ACME0001-LLM01-20250101-"));
        assert!(matches!(f.registry.register(&b), Err(RegistryError::Duplicate(_))));
    }

    #[test]
    fn tampered_bundle_rejected() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let mut b = bundle(&f, &h, 4);
        b.developer_signature.0[0] ^= 1;
        assert!(matches!(f.registry.register(&b), Err(RegistryError::InvalidSignature)));
        let mut b = bundle(&f, &h, 4);
        b.metadata.push(b' ');
        assert!(matches!(f.registry.register(&b), Err(RegistryError::InvalidSignature)));
        let mut b = bundle(&f, &h, 4);
        b.country = "us".into();
        assert!(matches!(f.registry.register(&b), Err(RegistryError::Malformed(_))));
    }

    #[test]
    fn weak_or_unknown_anchor_rejected() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let b = sign_bundle(
            RegistrationBundle {
                zkp_anchor: zk::zkp_anchor(3),
                ..bundle(&f, &h, 4)
            },
            &f.dev,
        )
        .unwrap();
        assert!(matches!(f.registry.register(&b), Err(RegistryError::Malformed(_))));
        let b = sign_bundle(
            RegistrationBundle {
                zkp_anchor: Digest32::of(b"x"),
                ..bundle(&f, &h, 4)
            },
            &f.dev,
        )
        .unwrap();
        assert!(matches!(f.registry.register(&b), Err(RegistryError::Malformed(_))));
    }

    #[test]
    fn status_updates_delegate_to_ledger() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let id = f.registry.register(&bundle(&f, &h, 4)).unwrap().entry.ai_id;
        assert_eq!(set_status(&f, &id, TestingStatus::P).unwrap(), TestingStatus::P);
        let stranger = Keypair::from_secret([9; 32]);
        let sig = stranger.sign(&status_update_message(&id, TestingStatus::F, 5));
        assert!(matches!(
            f.registry.update_status(&id, TestingStatus::F, 5, stranger.public(), sig),
            Err(RegistryError::Unauthorized(_))
        ));
        set_status(&f, &id, TestingStatus::F).unwrap();
        assert!(matches!(
            set_status(&f, &id, TestingStatus::P),
            Err(RegistryError::IllegalTransition { .. })
        ));
        assert_eq!(f.registry.history(&id).unwrap().status_changes.len(), 3);
    }

    #[test]
    fn challenge_flow_and_gating() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let id = f.registry.register(&bundle(&f, &h, 4)).unwrap().entry.ai_id;

        let c = f.registry.issue_challenge(&id).unwrap();
        let c2 = f.registry.issue_challenge(&id).unwrap();
        assert_ne!(c.nonce, c2.nonce);
        assert_eq!(c.expires_at - c.issued_at, DEFAULT_CHALLENGE_TTL);

        let v = f.registry.submit_proof(&c.challenge_id, &proof_for(&h, &c, 4)).unwrap();
        assert_eq!(v.outcome, VerificationOutcome::StatusBlocked);
        assert!(matches!(
            f.registry.submit_proof(&c.challenge_id, &[]),
            Err(RegistryError::UnknownChallenge)
        ));

        set_status(&f, &id, TestingStatus::P).unwrap();
        let v = f.registry.submit_proof(&c2.challenge_id, &proof_for(&h, &c2, 4)).unwrap();
        assert_eq!(v.outcome, VerificationOutcome::Verified);
        assert_eq!(v.status, Some(TestingStatus::P));
    }

    #[test]
    fn proof_bound_to_its_challenge() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let id = f.registry.register(&bundle(&f, &h, 4)).unwrap().entry.ai_id;
        set_status(&f, &id, TestingStatus::P).unwrap();
        let c1 = f.registry.issue_challenge(&id).unwrap();
        let c2 = f.registry.issue_challenge(&id).unwrap();
        let p1 = proof_for(&h, &c1, 4);
        let v = f.registry.submit_proof(&c2.challenge_id, &p1).unwrap();
        assert_eq!(v.outcome, VerificationOutcome::Rejected);

        let c3 = f.registry.issue_challenge(&id).unwrap();
        let mut p3 = proof_for(&h, &c3, 4);
        let n = p3.len();
        p3[n / 2] ^= 0x40;
        let v = f.registry.submit_proof(&c3.challenge_id, &p3).unwrap();
        assert_eq!(v.outcome, VerificationOutcome::Rejected);
        assert!(!v.detail.is_empty());
    }

    #[test]
    fn expired_challenge() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let id = f.registry.register(&bundle(&f, &h, 4)).unwrap().entry.ai_id;
        set_status(&f, &id, TestingStatus::P).unwrap();
        let c = f.registry.issue_challenge(&id).unwrap();
        let p = proof_for(&h, &c, 4);
        f.clock.advance(DEFAULT_CHALLENGE_TTL);
        let v = f.registry.submit_proof(&c.challenge_id, &p).unwrap();
        assert_eq!(v.outcome, VerificationOutcome::Expired);
    }

    #[test]
    fn unregistered_challenge() {
        let f = fixture(4);
        let other = derive_ai_id(&commit_bytes(b"nope"), &IssuerNamespace::new("ACME0001").unwrap());
        let e = f.registry.issue_challenge(&other).unwrap_err();
        assert_eq!(e.code(), "UNREGISTERED");
    }

    fn report(f: &Fixture, id: PrimaryIdentifier, score: f64, reporter: &Keypair) -> DriftReport {
        let digest = Digest32::of(b"sketch");
        let ts = f.clock.now();
        DriftReport {
            ai_id: id,
            score,
            mode: DriftMode::Sketch,
            candidate_sketch_digest: digest,
            timestamp: ts,
            reporter_public_key: reporter.public(),
            reporter_signature: reporter.sign(&drift_report_message(&id, score, DriftMode::Sketch, &digest, ts)),
        }
    }

    #[test]
    fn drift_attestations_flag_without_status_change() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let id = f.registry.register(&bundle(&f, &h, 4)).unwrap().entry.ai_id;
        let reporter = Keypair::from_secret([7; 32]);

        let r = f.registry.record_drift_attestation(&report(&f, id, 0.0, &reporter)).unwrap();
        assert_eq!(r.outcome, DriftOutcome::Within);
        assert!(!f.registry.lookup(&id).unwrap().drift_flagged);

        let r = f.registry.record_drift_attestation(&report(&f, id, 0.5, &reporter)).unwrap();
        assert_eq!(r.outcome, DriftOutcome::Within, "tau itself is within");

        let r = f.registry.record_drift_attestation(&report(&f, id, 0.75, &reporter)).unwrap();
        assert_eq!(r.outcome, DriftOutcome::Drifted);
        let view = f.registry.lookup(&id).unwrap();
        assert!(view.drift_flagged);
        assert_eq!(view.status, TestingStatus::U);
        assert_eq!(f.registry.history(&id).unwrap().drift_attestations.len(), 3);

        let mut forged = report(&f, id, 0.9, &reporter);
        forged.score = 0.1;
        assert!(matches!(
            f.registry.record_drift_attestation(&forged),
            Err(RegistryError::InvalidSignature)
        ));
        assert!(matches!(
            f.registry.record_drift_attestation(&report(&f, id, 1.5, &reporter)),
            Err(RegistryError::Malformed(_))
        ));
    }

    #[test]
    fn risk_class_selects_policy() {
        let f = fixture(4);
        let h = commit_bytes(b"model");
        let b = sign_bundle(
            RegistrationBundle {
                risk_class: Some("high".into()),
                ..bundle(&f, &h, 4)
            },
            &f.dev,
        )
        .unwrap();
        let id = f.registry.register(&b).unwrap().entry.ai_id;
        let reporter = Keypair::from_secret([7; 32]);
        let r = f.registry.record_drift_attestation(&report(&f, id, 0.2, &reporter)).unwrap();
        assert_eq!((r.risk_class.as_str(), r.outcome), ("high", DriftOutcome::Drifted));

        let b = sign_bundle(
            RegistrationBundle {
                risk_class: Some("nope".into()),
                ..bundle(&f, &commit_bytes(b"m2"), 4)
            },
            &f.dev,
        )
        .unwrap();
        assert!(matches!(f.registry.register(&b), Err(RegistryError::Malformed(_))));
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.bin");
        let f = fixture(4);
        let config = f.registry.config().clone();
        let h = commit_bytes(b"model");
        let id;
        {
            let reg = Registry::open(config.clone(), f.clock.clone(), &path).unwrap();
            let b = sign_bundle(
                RegistrationBundle {
                    risk_class: Some("high".into()),
                    ..bundle(&f, &h, 4)
                },
                &f.dev,
            )
            .unwrap();
            id = reg.register(&b).unwrap().entry.ai_id;
            let reporter = Keypair::from_secret([7; 32]);
            reg.record_drift_attestation(&report(&f, id, 0.3, &reporter)).unwrap();
        }
        let reg = Registry::open(config, f.clock.clone(), &path).unwrap();
        let view = reg.lookup(&id).unwrap();
        assert_eq!(view.risk_class, "high");
        assert!(view.drift_flagged);
        let blocks = reg.audit_blocks(0).unwrap();
        assert_eq!(blocks.concat(), std::fs::read(&path).unwrap());
        assert!(reg.audit_blocks(2).unwrap().is_empty());
        assert!(matches!(reg.audit_blocks(3), Err(RegistryError::BeyondHead(3))));
    }

    #[test]
    fn anchor_round_lookup() {
        assert_eq!(anchor_rounds(&zk::zkp_anchor(69)), Some(69));
        assert_eq!(anchor_rounds(&zk::zkp_anchor(1024)), Some(1024));
        assert_eq!(anchor_rounds(&zk::zkp_anchor(1025)), None);
    }
}
