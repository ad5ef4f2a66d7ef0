// SPDX-License-Identifier: Apache-2.0

//! Identity toolchain for model checkpoints: canonical weight streams,
//! commitments and identifiers, LZJD drift screening, a hash-chained
//! registry ledger, and a zero-knowledge proof of possession.

pub mod canonical;
pub mod identity;
pub mod keys;
pub mod ledger;
pub mod lzjd;
pub mod registry;
pub mod zk;

pub use canonical::{CanonicalWeightStream, DType, TensorRecord, WeightManifest};
pub use identity::{
    build_secondary_id, compute_commitment, derive_ai_id, parse_secondary_id, Commitment, Digest32, IssuerNamespace,
    PrimaryIdentifier, SecondaryFields, SecondaryIdentifier,
};
pub use keys::{Keypair, PublicKey, Signature};
pub use ledger::{Ledger, LedgerBlock, LedgerEvent, RegistryEntry, TestingStatus};
pub use lzjd::{DigestSketch, DriftOutcome, DriftPolicy, DriftVerdict};
pub use zk::{PossessionProof, PossessionStatement, PossessionWitness};
pub use registry::{
    Challenge, Clock, Credential, DriftAttestationRecord, DriftReport, ManualClock, RegistrationBundle, Registry,
    RegistryConfig, RegistryError, SystemClock, VerificationOutcome, VerificationVerdict,
};
