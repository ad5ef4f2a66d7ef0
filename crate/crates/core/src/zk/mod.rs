// SPDX-License-Identifier: Apache-2.0

//! Zero-knowledge proof of possession of a registered commitment.
//!
//! The prover shows knowledge of `h` with `SHA-256(namespace || h) == ai_id`
//! using MPC-in-the-head over a (2,3)-decomposition of the SHA-256 circuit
//! (ZKBoo-style), made non-interactive with Fiat–Shamir. Each round the
//! prover simulates three parties, commits to their views, and opens two
//! of them, so a cheating prover survives a round with probability at most
//! 2/3. At 69 rounds that is below 2^-40.
//!
//! The challenge transcript binds the statement, a verifier-chosen nonce,
//! every view commitment and every output share, which makes a proof
//! single-use for the checkpoint that issued the nonce.

mod circuit;
mod mpc;

use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use circuit::{circuit_eval, sha256_single_block, NONLINEAR_GATES};
pub use mpc::{expand_tape, SEED_LEN, TAPE_LEN};

use crate::identity::{Commitment, Digest32, IssuerNamespace, PrimaryIdentifier};
use crate::keys::{Keypair, PublicKey, Signature};
use circuit::{bytes_be, compress, public_block_words, words_be, IV};
use mpc::{Prover3, Verifier2};

pub const DEFAULT_ROUNDS: u16 = 69;
pub const PROOF_MAGIC: [u8; 4] = *b"ZKP1";
/// Proof-system identifier hashed into the ledger's ZKP anchor.
pub const SYSTEM_TAG: &[u8] = b"ZKB-SHA256-V1";
const FS_TAG: &[u8] = b"ZKB-SHA256-V1/fiat-shamir";

/// `SHA-256("ZKB-SHA256-V1" || rounds as u16 LE)`.
pub fn zkp_anchor(rounds: u16) -> Digest32 {
    let mut h = Sha256::new();
    h.update(SYSTEM_TAG);
    h.update(rounds.to_le_bytes());
    Digest32(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PossessionStatement {
    pub ai_id: PrimaryIdentifier,
    pub namespace: IssuerNamespace,
    pub rounds: u16,
    #[serde(with = "hex_nonce")]
    pub challenge_nonce: [u8; 32],
}

mod hex_nonce {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

impl PossessionStatement {
    pub fn new(ai_id: PrimaryIdentifier, namespace: IssuerNamespace, challenge_nonce: [u8; 32]) -> Self {
        Self {
            ai_id,
            namespace,
            rounds: DEFAULT_ROUNDS,
            challenge_nonce,
        }
    }

    pub fn with_rounds(mut self, rounds: u16) -> Self {
        self.rounds = rounds;
        self
    }

    fn transcript_prefix(&self) -> Sha256 {
        let mut h = Sha256::new();
        h.update(FS_TAG);
        h.update(self.ai_id.as_bytes());
        h.update(self.namespace.as_bytes());
        h.update(self.rounds.to_le_bytes());
        h.update(self.challenge_nonce);
        h
    }
}

/// The private witness: `H_w`.
#[derive(Clone, PartialEq, Eq)]
pub struct PossessionWitness {
    pub h: Commitment,
}

impl fmt::Debug for PossessionWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PossessionWitness(..)")
    }
}

/// One opened party view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenedView {
    pub seed: [u8; SEED_LEN],
    pub input_share: [u8; 32],
    pub blinding: [u8; 32],
    /// Output word of every nonlinear gate (AND result or carry word).
    pub outputs: Vec<u32>,
}

impl OpenedView {
    fn commitment(&self) -> [u8; 32] {
        view_commitment(&self.seed, &self.input_share, &self.outputs, &self.blinding)
    }
}

fn view_commitment(seed: &[u8; SEED_LEN], share: &[u8; 32], outputs: &[u32], blinding: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed);
    h.update(share);
    for w in outputs {
        h.update(w.to_le_bytes());
    }
    h.update(blinding);
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundProof {
    /// Opened parties are `challenge` and `challenge + 1 mod 3`.
    pub challenge: u8,
    pub commitments: [[u8; 32]; 3],
    pub output_shares: [[u8; 32]; 3],
    pub opened: [OpenedView; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PossessionProof {
    pub rounds: Vec<RoundProof>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZkError {
    #[error("witness does not open the statement's ai_id")]
    WitnessMismatch,
    #[error("round count must be at least 1")]
    ZeroRounds,
    #[error("malformed proof: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    RoundCount,
    ChallengeMismatch,
    CommitmentMismatch,
    GateInconsistency,
    OutputMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("proof rejected at round {round}: {class:?}{}", gate.map(|g| format!(" (gate {g})")).unwrap_or_default())]
pub struct Rejection {
    pub round: usize,
    pub class: FailureClass,
    pub gate: Option<usize>,
}

impl Rejection {
    fn at(round: usize, class: FailureClass) -> Self {
        Self {
            round,
            class,
            gate: None,
        }
    }
}

fn xor32(a: &[u8; 32], b: &[u8; 32]) -> [u8; 32] {
    std::array::from_fn(|i| a[i] ^ b[i])
}

/// Derives `rounds` challenge trits from the transcript.
fn challenges(st: &PossessionStatement, rounds: &[([[u8; 32]; 3], [[u8; 32]; 3])]) -> Vec<u8> {
    let mut h = st.transcript_prefix();
    for (commitments, outputs) in rounds {
        for c in commitments {
            h.update(c);
        }
        for y in outputs {
            h.update(y);
        }
    }
    let seed: [u8; 32] = h.finalize().into();
    let mut trits = Vec::with_capacity(rounds.len());
    let mut ctr = 0u32;
    while trits.len() < rounds.len() {
        let mut h = Sha256::new();
        h.update(seed);
        h.update(ctr.to_le_bytes());
        for b in h.finalize() {
            // 255 would bias the reduction mod 3
            if b != 255 && trits.len() < rounds.len() {
                trits.push(b % 3);
            }
        }
        ctr += 1;
    }
    trits
}

fn share_words(p: usize, public: &[u32; 16], share: &[u8; 32]) -> ([u32; 8], [u32; 16]) {
    let state = if p == 0 { IV } else { [0; 8] };
    let mut block = if p == 0 { *public } else { [0; 16] };
    block[2..10].copy_from_slice(&words_be(share));
    (state, block)
}

struct ProverRound {
    seeds: [[u8; SEED_LEN]; 3],
    blindings: [[u8; 32]; 3],
    shares: [[u8; 32]; 3],
    views: [Vec<u32>; 3],
    commitments: [[u8; 32]; 3],
    outputs: [[u8; 32]; 3],
}

fn prove_round<R: RngCore + CryptoRng>(public: &[u32; 16], h: &Commitment, rng: &mut R) -> ProverRound {
    let mut seeds = [[0u8; SEED_LEN]; 3];
    let mut blindings = [[0u8; 32]; 3];
    for p in 0..3 {
        rng.fill_bytes(&mut seeds[p]);
        rng.fill_bytes(&mut blindings[p]);
    }
    let tapes = seeds.map(|s| expand_tape(&s));
    let s0: [u8; 32] = tapes[0][..32].try_into().unwrap();
    let s1: [u8; 32] = tapes[1][..32].try_into().unwrap();
    let s2 = xor32(&xor32(h.as_bytes(), &s0), &s1);
    let shares = [s0, s1, s2];

    let parts = [0, 1, 2].map(|p| share_words(p, public, &shares[p]));
    let state: [[u32; 3]; 8] = std::array::from_fn(|j| [0, 1, 2].map(|p| parts[p].0[j]));
    let block: [[u32; 3]; 16] = std::array::from_fn(|j| [0, 1, 2].map(|p| parts[p].1[j]));

    let mut engine = Prover3::new([&tapes[0], &tapes[1], &tapes[2]]);
    let out = compress(&mut engine, state, block);
    let outputs = [0, 1, 2].map(|p| bytes_be(&out.map(|w| w[p])));
    let views = engine.views;
    let commitments = [0, 1, 2].map(|p| view_commitment(&seeds[p], &shares[p], &views[p], &blindings[p]));
    ProverRound {
        seeds,
        blindings,
        shares,
        views,
        commitments,
        outputs,
    }
}

/// Proves knowledge of `w.h` for `st`. Refuses if the witness does not
/// reproduce `st.ai_id`.
pub fn prove<R: RngCore + CryptoRng>(
    st: &PossessionStatement,
    w: &PossessionWitness,
    rng: &mut R,
) -> Result<PossessionProof, ZkError> {
    if st.rounds == 0 {
        return Err(ZkError::ZeroRounds);
    }
    if circuit_eval(&st.namespace, &w.h) != st.ai_id.0 {
        return Err(ZkError::WitnessMismatch);
    }
    let public = public_block_words(&st.namespace);
    let rounds: Vec<ProverRound> = (0..st.rounds).map(|_| prove_round(&public, &w.h, rng)).collect();
    let transcript: Vec<_> = rounds.iter().map(|r| (r.commitments, r.outputs)).collect();
    let trits = challenges(st, &transcript);

    let rounds = rounds
        .into_iter()
        .zip(trits)
        .map(|(mut r, e)| {
            let open = |p: usize, r: &mut ProverRound| OpenedView {
                seed: r.seeds[p],
                input_share: r.shares[p],
                blinding: r.blindings[p],
                outputs: std::mem::take(&mut r.views[p]),
            };
            let first = open(usize::from(e), &mut r);
            let second = open((usize::from(e) + 1) % 3, &mut r);
            RoundProof {
                challenge: e,
                commitments: r.commitments,
                output_shares: r.outputs,
                opened: [first, second],
            }
        })
        .collect();
    Ok(PossessionProof { rounds })
}

/// Verifies `proof` against `st`.
pub fn verify(st: &PossessionStatement, proof: &PossessionProof) -> Result<(), Rejection> {
    if proof.rounds.len() != usize::from(st.rounds) || st.rounds == 0 {
        return Err(Rejection::at(0, FailureClass::RoundCount));
    }
    let transcript: Vec<_> = proof.rounds.iter().map(|r| (r.commitments, r.output_shares)).collect();
    let trits = challenges(st, &transcript);
    if let Some(i) = proof.rounds.iter().zip(&trits).position(|(r, e)| r.challenge != *e) {
        return Err(Rejection::at(i, FailureClass::ChallengeMismatch));
    }

    let public = public_block_words(&st.namespace);
    for (i, round) in proof.rounds.iter().enumerate() {
        verify_round(i, round, &public, &st.ai_id)?;
    }
    Ok(())
}

fn verify_round(
    index: usize,
    round: &RoundProof,
    public: &[u32; 16],
    ai_id: &PrimaryIdentifier,
) -> Result<(), Rejection> {
    let y = &round.output_shares;
    if xor32(&xor32(&y[0], &y[1]), &y[2]) != ai_id.0 {
        return Err(Rejection::at(index, FailureClass::OutputMismatch));
    }
    let e = usize::from(round.challenge);
    let parties = [e, (e + 1) % 3];
    let [a, b] = &round.opened;
    if a.outputs.len() != NONLINEAR_GATES || b.outputs.len() != NONLINEAR_GATES {
        return Err(Rejection::at(index, FailureClass::GateInconsistency));
    }

    let parts = [share_words(parties[0], public, &a.input_share), share_words(parties[1], public, &b.input_share)];
    let state: [[u32; 2]; 8] = std::array::from_fn(|j| [parts[0].0[j], parts[1].0[j]]);
    let block: [[u32; 2]; 16] = std::array::from_fn(|j| [parts[0].1[j], parts[1].1[j]]);
    let tapes = [expand_tape(&a.seed), expand_tape(&b.seed)];
    let mut engine = Verifier2 {
        first_party: e,
        tapes: [&tapes[0], &tapes[1]],
        claimed: [&a.outputs, &b.outputs],
        gate: 0,
        fault: None,
    };
    let out = compress(&mut engine, state, block);
    if let Some(gate) = engine.fault {
        return Err(Rejection {
            round: index,
            class: FailureClass::GateInconsistency,
            gate: Some(gate),
        });
    }
    for (slot, &p) in parties.iter().enumerate() {
        if bytes_be(&out.map(|w| w[slot])) != y[p] {
            return Err(Rejection::at(index, FailureClass::OutputMismatch));
        }
    }
    if a.commitment() != round.commitments[parties[0]] || b.commitment() != round.commitments[parties[1]] {
        return Err(Rejection::at(index, FailureClass::CommitmentMismatch));
    }
    Ok(())
}

impl PossessionProof {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// `"ZKP1" | r u16 | rounds...`; each round is
    /// `challenge u8 | 3 commitments | 3 output shares | 2 opened views`, and
    /// each view is `seed | share | blinding | len u32 | gate outputs (u32 LE)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.rounds.len() * (193 + 2 * (84 + 4 * NONLINEAR_GATES)));
        out.extend_from_slice(&PROOF_MAGIC);
        out.extend_from_slice(&(self.rounds.len() as u16).to_le_bytes());
        for r in &self.rounds {
            out.push(r.challenge);
            for c in &r.commitments {
                out.extend_from_slice(c);
            }
            for y in &r.output_shares {
                out.extend_from_slice(y);
            }
            for v in &r.opened {
                out.extend_from_slice(&v.seed);
                out.extend_from_slice(&v.input_share);
                out.extend_from_slice(&v.blinding);
                out.extend_from_slice(&((4 * v.outputs.len()) as u32).to_le_bytes());
                for w in &v.outputs {
                    out.extend_from_slice(&w.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ZkError> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], ZkError> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| ZkError::Malformed(format!("truncated at offset {pos}")))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != PROOF_MAGIC {
            return Err(ZkError::Malformed("bad magic".into()));
        }
        let r = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if r == 0 {
            return Err(ZkError::ZeroRounds);
        }
        let mut rounds = Vec::with_capacity(usize::from(r));
        for _ in 0..r {
            let challenge = take(1)?[0];
            if challenge > 2 {
                return Err(ZkError::Malformed(format!("challenge {challenge} is not a trit")));
            }
            let mut arr32 = || -> Result<[u8; 32], ZkError> { Ok(take(32)?.try_into().unwrap()) };
            let commitments = [arr32()?, arr32()?, arr32()?];
            let output_shares = [arr32()?, arr32()?, arr32()?];
            let mut view = || -> Result<OpenedView, ZkError> {
                let seed = take(SEED_LEN)?.try_into().unwrap();
                let input_share = take(32)?.try_into().unwrap();
                let blinding = take(32)?.try_into().unwrap();
                let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
                if len != 4 * NONLINEAR_GATES {
                    return Err(ZkError::Malformed(format!("view length {len}")));
                }
                let outputs = take(len)?
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Ok(OpenedView {
                    seed,
                    input_share,
                    blinding,
                    outputs,
                })
            };
            let opened = [view()?, view()?];
            rounds.push(RoundProof {
                challenge,
                commitments,
                output_shares,
                opened,
            });
        }
        if pos != bytes.len() {
            return Err(ZkError::Malformed(format!("{} trailing bytes", bytes.len() - pos)));
        }
        Ok(Self { rounds })
    }
}

/// Smallest round count with `(2/3)^r <= 2^-bits`.
pub fn rounds_for_security(bits: u32) -> u32 {
    (f64::from(bits) * std::f64::consts::LN_2 / (1.5f64).ln()).ceil() as u32
}

pub const ATTESTATION_TAG: &[u8] = b"POSSESSION-OK";

/// A trusted attestor's signed statement that it recomputed the AI-ID from
/// the witness. Reveals `h` to the attestor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub ai_id: PrimaryIdentifier,
    pub attestor_public_key: PublicKey,
    pub timestamp: u64,
    pub attestor_signature: Signature,
}

fn attestation_message(ai_id: &PrimaryIdentifier, timestamp: u64) -> Vec<u8> {
    let mut m = Vec::with_capacity(32 + 8 + ATTESTATION_TAG.len());
    m.extend_from_slice(ai_id.as_bytes());
    m.extend_from_slice(&timestamp.to_le_bytes());
    m.extend_from_slice(ATTESTATION_TAG);
    m
}

impl Attestation {
    pub fn verify(&self) -> bool {
        self.attestor_public_key
            .verify(&attestation_message(&self.ai_id, self.timestamp), &self.attestor_signature)
            .is_ok()
    }
}

pub fn attest(
    st: &PossessionStatement,
    w: &PossessionWitness,
    attestor: &Keypair,
    timestamp: u64,
) -> Result<Attestation, ZkError> {
    if circuit_eval(&st.namespace, &w.h) != st.ai_id.0 {
        return Err(ZkError::WitnessMismatch);
    }
    Ok(Attestation {
        ai_id: st.ai_id,
        attestor_public_key: attestor.public(),
        timestamp,
        attestor_signature: attestor.sign(&attestation_message(&st.ai_id, timestamp)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::derive_ai_id;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fixture(seed: u64, rounds: u16) -> (PossessionStatement, PossessionWitness, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut h = [0u8; 32];
        rng.fill_bytes(&mut h);
        let ns = IssuerNamespace::new("ACME0001").unwrap();
        let h = Commitment(h);
        let mut nonce = [0u8; 32];
        rng.fill_bytes(&mut nonce);
        let st = PossessionStatement::new(derive_ai_id(&h, &ns), ns, nonce).with_rounds(rounds);
        (st, PossessionWitness { h }, rng)
    }

    #[test]
    fn circuit_agrees_with_derive_ai_id() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut h = [0u8; 32];
            rng.fill_bytes(&mut h);
            let ns: String = (0..8)
                .map(|_| b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"[(rng.next_u32() % 36) as usize] as char)
                .collect();
            let ns = IssuerNamespace::new(&ns).unwrap();
            assert_eq!(circuit_eval(&ns, &Commitment(h)), derive_ai_id(&Commitment(h), &ns).0);
        }
    }

    #[test]
    fn honest_proof_verifies_and_round_trips() {
        let (st, w, mut rng) = fixture(1, 8);
        let proof = prove(&st, &w, &mut rng).unwrap();
        assert_eq!(verify(&st, &proof), Ok(()));
        let bytes = proof.to_bytes();
        assert_eq!(&bytes[..4], b"ZKP1");
        assert_eq!(PossessionProof::from_bytes(&bytes).unwrap(), proof);
    }

    #[test]
    fn wrong_witness_refused() {
        let (st, mut w, mut rng) = fixture(2, 4);
        w.h.0[0] ^= 1;
        assert_eq!(prove(&st, &w, &mut rng), Err(ZkError::WitnessMismatch));
        let kp = Keypair::from_secret([4; 32]);
        assert_eq!(attest(&st, &w, &kp, 0), Err(ZkError::WitnessMismatch));
    }

    #[test]
    fn fresh_randomness_gives_distinct_valid_proofs() {
        let (st, w, mut rng) = fixture(3, 4);
        let a = prove(&st, &w, &mut rng).unwrap();
        let b = prove(&st, &w, &mut rng).unwrap();
        assert_ne!(a.to_bytes(), b.to_bytes());
        assert!(verify(&st, &a).is_ok() && verify(&st, &b).is_ok());
    }

    #[test]
    fn replay_under_other_nonce_rejected() {
        let (st, w, mut rng) = fixture(4, 6);
        let proof = prove(&st, &w, &mut rng).unwrap();
        let mut other = st.clone();
        other.challenge_nonce[0] ^= 1;
        // 6 trits agreeing by chance: (1/3)^6
        assert_eq!(verify(&other, &proof).unwrap_err().class, FailureClass::ChallengeMismatch);
    }

    #[test]
    fn rejection_classes() {
        let (st, w, mut rng) = fixture(5, 3);
        let proof = prove(&st, &w, &mut rng).unwrap();

        let mut p = proof.clone();
        p.rounds[1].opened[0].outputs[100] ^= 1;
        let r = verify(&st, &p).unwrap_err();
        assert_eq!((r.round, r.class, r.gate), (1, FailureClass::GateInconsistency, Some(100)));

        let mut p = proof.clone();
        p.rounds[2].opened[1].blinding[0] ^= 1;
        assert_eq!(verify(&st, &p).unwrap_err(), Rejection::at(2, FailureClass::CommitmentMismatch));

        let mut p = proof.clone();
        p.rounds[0].challenge = (p.rounds[0].challenge + 1) % 3;
        assert_eq!(verify(&st, &p).unwrap_err(), Rejection::at(0, FailureClass::ChallengeMismatch));

        let mut p = proof.clone();
        p.rounds.pop();
        assert_eq!(verify(&st, &p).unwrap_err().class, FailureClass::RoundCount);

        let mut wrong_id = st.clone();
        wrong_id.ai_id.0[3] ^= 0x10;
        let e = verify(&wrong_id, &proof).unwrap_err();
        assert!(matches!(e.class, FailureClass::ChallengeMismatch | FailureClass::OutputMismatch));
    }

    #[test]
    fn malformed_bytes() {
        let (st, w, mut rng) = fixture(6, 1);
        let bytes = prove(&st, &w, &mut rng).unwrap().to_bytes();
        assert!(PossessionProof::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(PossessionProof::from_bytes(&extra).is_err());
        let mut zero = bytes.clone();
        zero[4] = 0;
        assert_eq!(PossessionProof::from_bytes(&zero), Err(ZkError::ZeroRounds));
        let mut trit = bytes;
        trit[6] = 3;
        assert!(PossessionProof::from_bytes(&trit).is_err());
    }

    #[test]
    fn soundness_bound_round_count() {
        assert_eq!(rounds_for_security(40), 69);
        assert!((2.0f64 / 3.0).powi(69) <= 2f64.powi(-40));
        assert!((2.0f64 / 3.0).powi(68) > 2f64.powi(-40));
    }

    #[test]
    fn anchor_is_tag_plus_rounds() {
        let mut m = b"ZKB-SHA256-V1".to_vec();
        m.extend_from_slice(&[69, 0]);
        assert_eq!(zkp_anchor(69), Digest32::of(&m));
        assert_ne!(zkp_anchor(69), zkp_anchor(70));
    }

    #[test]
    fn attestation_signature_verifies() {
        let (st, w, _) = fixture(7, 1);
        let kp = Keypair::from_secret([4; 32]);
        let a = attest(&st, &w, &kp, 1234).unwrap();
        assert!(a.verify());
        let mut forged = a.clone();
        forged.timestamp += 1;
        assert!(!forged.verify());
    }

    #[test]
    fn tape_expansion_is_deterministic_and_sized() {
        let t = expand_tape(&[1; SEED_LEN]);
        assert_eq!(t.len(), TAPE_LEN);
        assert_eq!(t, expand_tape(&[1; SEED_LEN]));
        let mut first = Sha256::new();
        first.update([1u8; SEED_LEN]);
        first.update(0u32.to_le_bytes());
        assert_eq!(&t[..32], first.finalize().as_slice());
    }
}
