// SPDX-License-Identifier: Apache-2.0

//! Request and response bodies that are not core types.

use aiid_core::{PrimaryIdentifier, PublicKey, Signature, TestingStatus};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRequest {
    pub status: TestingStatus,
    pub timestamp: u64,
    pub authority_public_key: PublicKey,
    pub authority_signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusResponse {
    pub ai_id: PrimaryIdentifier,
    pub status: TestingStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeRequest {
    pub ai_id: PrimaryIdentifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofSubmission {
    /// 32 hex characters.
    pub challenge_id: String,
    /// Base64 (standard alphabet, padded) of the binary proof.
    pub proof: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksResponse {
    pub from: u64,
    /// Base64 of each block's canonical encoding, in chain order.
    pub blocks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}
