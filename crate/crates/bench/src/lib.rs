// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the benchmarks.

use aiid_core::canonical::{serialize, DType};
use aiid_core::identity::{commit_bytes, derive_ai_id, hash_tail};
use aiid_core::registry::sign_bundle;
use aiid_core::zk::{zkp_anchor, DEFAULT_ROUNDS};
use aiid_core::{
    compute_commitment, CanonicalWeightStream, IssuerNamespace, Keypair, Ledger, PossessionStatement,
    PossessionWitness, RegistrationBundle, RegistryEntry, Signature, TensorRecord, WeightManifest,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Single-tensor stream of roughly `len` bytes of random data.
pub fn random_stream(len: usize, seed: u64) -> CanonicalWeightStream {
    let mut data = vec![0u8; len];
    rng(seed).fill_bytes(&mut data);
    let m = WeightManifest::from_unsorted(vec![TensorRecord::new("w", DType::U8, vec![len as u64], data)]);
    serialize(&m).expect("fixture manifest is valid")
}

/// Copy of `bytes` with every `stride`-th byte flipped.
pub fn perturbed(bytes: &[u8], stride: usize) -> Vec<u8> {
    let mut out = bytes.to_vec();
    for b in out.iter_mut().step_by(stride) {
        *b ^= 0x5a;
    }
    out
}

pub fn possession_fixture(rounds: u16) -> (PossessionStatement, PossessionWitness) {
    let h = compute_commitment(&random_stream(4096, 7));
    let ns = IssuerNamespace::new("BENCH001").unwrap();
    let st = PossessionStatement::new(derive_ai_id(&h, &ns), ns, [3; 32]).with_rounds(rounds);
    (st, PossessionWitness { h })
}

pub fn authority() -> Keypair {
    Keypair::from_secret([1; 32])
}

pub fn empty_ledger() -> Ledger {
    Ledger::new([authority().public()])
}

/// Signed registration entry for model number `i`.
pub fn registry_entry(i: u64, developer: &Keypair) -> RegistryEntry {
    let h = commit_bytes(&i.to_le_bytes());
    let ns = IssuerNamespace::new("BENCH001").unwrap();
    let bundle = RegistrationBundle {
        namespace: ns,
        country: "US".into(),
        family: "LLM".into(),
        version: "01".into(),
        date: "20250101".into(),
        hash_tail: hash_tail(&h),
        ai_id: derive_ai_id(&h, &ns),
        zkp_anchor: zkp_anchor(DEFAULT_ROUNDS),
        metadata: b"{}".to_vec(),
        developer_public_key: developer.public(),
        registered_at: 1_700_000_000 + i,
        developer_signature: Signature([0; 64]),
        risk_class: None,
    };
    let bundle = sign_bundle(bundle, developer).unwrap();
    bundle.unsigned_entry().unwrap().signed(bundle.developer_signature)
}
