// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::sync::Arc;

use aiid_core::identity::{commit_bytes, derive_ai_id, hash_tail, Commitment};
use aiid_core::ledger::{status_update_message, verify_chain_bytes};
use aiid_core::lzjd::DriftMode;
use aiid_core::registry::{drift_report_message, sign_bundle, EntryView};
use aiid_core::zk::{prove, zkp_anchor, PossessionStatement, PossessionWitness};
use aiid_core::{
    Challenge, Clock, Credential, Digest32, DriftAttestationRecord, DriftReport, IssuerNamespace, Keypair, ManualClock,
    PrimaryIdentifier, RegistrationBundle, Registry, RegistryConfig, Signature, TestingStatus, VerificationOutcome,
    VerificationVerdict,
};
use aiid_server::{router, BlocksResponse, ChallengeRequest, ErrorBody, ProofSubmission, StatusRequest};
use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower::ServiceExt;

const ROUNDS: u16 = 6;

struct Harness {
    app: Router,
    clock: Arc<ManualClock>,
    dev: Keypair,
    authority: Keypair,
    ns: IssuerNamespace,
}

fn harness() -> Harness {
    let authority = Keypair::from_secret([11; 32]);
    let clock = Arc::new(ManualClock::new(1_750_000_000));
    let config = RegistryConfig {
        authorities: vec![authority.public()],
        min_rounds: ROUNDS,
        drift_policies: BTreeMap::from([("default".into(), 0.5)]),
        ..RegistryConfig::default()
    };
    let registry = Arc::new(Registry::new(config, clock.clone()).unwrap());
    Harness {
        app: router(registry),
        clock,
        dev: Keypair::from_secret([12; 32]),
        authority,
        ns: IssuerNamespace::new("ACME0001").unwrap(),
    }
}

impl Harness {
    async fn call(&self, method: Method, uri: &str, body: Option<Vec<u8>>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map(Body::from).unwrap_or_else(Body::empty))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
    }

    async fn post<T: DeserializeOwned>(&self, uri: &str, body: &impl Serialize) -> (StatusCode, Result<T, ErrorBody>) {
        let (status, bytes) = self.call(Method::POST, uri, Some(serde_json::to_vec(body).unwrap())).await;
        (status, decode(status, &bytes))
    }

    async fn get<T: DeserializeOwned>(&self, uri: &str) -> (StatusCode, Result<T, ErrorBody>) {
        let (status, bytes) = self.call(Method::GET, uri, None).await;
        (status, decode(status, &bytes))
    }

    fn bundle(&self, h: &Commitment) -> RegistrationBundle {
        sign_bundle(
            RegistrationBundle {
                namespace: self.ns,
                country: "DE".into(),
                family: "VIS".into(),
                version: "02".into(),
                date: "20250615".into(),
                hash_tail: hash_tail(h),
                ai_id: derive_ai_id(h, &self.ns),
                zkp_anchor: zkp_anchor(ROUNDS),
                metadata: br#"{"model_card":"v2"}"#.to_vec(),
                developer_public_key: self.dev.public(),
                registered_at: self.clock.now(),
                developer_signature: Signature([0; 64]),
                risk_class: None,
            },
            &self.dev,
        )
        .unwrap()
    }

    fn status_request(&self, id: &PrimaryIdentifier, status: TestingStatus, signer: &Keypair) -> StatusRequest {
        let ts = self.clock.now();
        StatusRequest {
            status,
            timestamp: ts,
            authority_public_key: signer.public(),
            authority_signature: signer.sign(&status_update_message(id, status, ts)),
        }
    }

    fn proof(&self, h: &Commitment, c: &Challenge) -> String {
        let st = PossessionStatement::new(c.ai_id, self.ns, c.nonce).with_rounds(ROUNDS);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        B64.encode(prove(&st, &PossessionWitness { h: *h }, &mut rng).unwrap().to_bytes())
    }
}

fn decode<T: DeserializeOwned>(status: StatusCode, bytes: &[u8]) -> Result<T, ErrorBody> {
    if status.is_success() {
        Ok(serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes))))
    } else {
        Err(serde_json::from_slice(bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes))))
    }
}

#[tokio::test]
async fn registration_lookup_and_duplicate() {
    let hx = harness();
    let h = commit_bytes(b"weights-a");
    let bundle = hx.bundle(&h);

    let (status, cred) = hx.post::<Credential>("/v1/entries", &bundle).await;
    assert_eq!(status, StatusCode::CREATED);
    let cred = cred.unwrap();
    assert_eq!(cred.status, TestingStatus::U);
    assert!(cred.secondary_id.starts_with("DE-ACME0001-VIS02-20250615-"));

    let (status, err) = hx.post::<Credential>("/v1/entries", &bundle).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err.unwrap_err().error, "DUPLICATE");

    let (status, view) = hx.get::<EntryView>(&format!("/v1/entries/{}", bundle.ai_id)).await;
    assert_eq!(status, StatusCode::OK);
    let view = view.unwrap();
    assert_eq!(view.secondary_id, cred.secondary_id);
    assert_eq!(view.entry.metadata_digest, Digest32::of(&bundle.metadata));
}

#[tokio::test]
async fn tampered_and_malformed_requests() {
    let hx = harness();
    let mut bundle = hx.bundle(&commit_bytes(b"weights-b"));
    bundle.developer_signature.0[63] ^= 0x80;
    let (status, err) = hx.post::<Credential>("/v1/entries", &bundle).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err.unwrap_err().error, "INVALID_SIGNATURE");

    let (status, _) = hx.call(Method::POST, "/v1/entries", Some(b"{not json".to_vec())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, err) = hx.get::<EntryView>("/v1/entries/XYZ").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err.unwrap_err().error, "MALFORMED");

    let unknown = derive_ai_id(&commit_bytes(b"nobody"), &hx.ns);
    let (status, err) = hx.get::<EntryView>(&format!("/v1/entries/{unknown}")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err.unwrap_err().error, "UNREGISTERED");
}

#[tokio::test]
async fn status_authority_rules() {
    let hx = harness();
    let bundle = hx.bundle(&commit_bytes(b"weights-c"));
    hx.post::<Credential>("/v1/entries", &bundle).await.1.unwrap();
    let uri = format!("/v1/entries/{}/status", bundle.ai_id);

    let stranger = Keypair::from_secret([99; 32]);
    let (status, err) = hx
        .post::<serde_json::Value>(&uri, &hx.status_request(&bundle.ai_id, TestingStatus::P, &stranger))
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    assert_eq!(err.unwrap_err().error, "UNAUTHORIZED");

    let (status, _) = hx
        .post::<serde_json::Value>(&uri, &hx.status_request(&bundle.ai_id, TestingStatus::F, &hx.authority))
        .await;
    assert_eq!(status, StatusCode::OK);
    let (status, err) = hx
        .post::<serde_json::Value>(&uri, &hx.status_request(&bundle.ai_id, TestingStatus::P, &hx.authority))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err.unwrap_err().error, "ILLEGAL_TRANSITION");

    let (_, hist) = hx
        .get::<serde_json::Value>(&format!("/v1/entries/{}/history", bundle.ai_id))
        .await;
    assert_eq!(hist.unwrap()["status_changes"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn checkpoint_verification_flow() {
    let hx = harness();
    let h = commit_bytes(b"weights-d");
    let bundle = hx.bundle(&h);
    hx.post::<Credential>("/v1/entries", &bundle).await.1.unwrap();
    let challenge_req = ChallengeRequest { ai_id: bundle.ai_id };

    let (status, c) = hx.post::<Challenge>("/v1/challenges", &challenge_req).await;
    assert_eq!(status, StatusCode::CREATED);
    let c = c.unwrap();
    let submission = ProofSubmission {
        challenge_id: hex::encode(c.challenge_id),
        proof: hx.proof(&h, &c),
    };
    let (_, v) = hx.post::<VerificationVerdict>("/v1/proofs", &submission).await;
    assert_eq!(v.unwrap().outcome, VerificationOutcome::StatusBlocked);

    let (status, err) = hx.post::<VerificationVerdict>("/v1/proofs", &submission).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err.unwrap_err().error, "UNKNOWN_CHALLENGE");

    let uri = format!("/v1/entries/{}/status", bundle.ai_id);
    hx.post::<serde_json::Value>(&uri, &hx.status_request(&bundle.ai_id, TestingStatus::P, &hx.authority))
        .await
        .1
        .unwrap();

    let c = hx.post::<Challenge>("/v1/challenges", &challenge_req).await.1.unwrap();
    let submission = ProofSubmission {
        challenge_id: hex::encode(c.challenge_id),
        proof: hx.proof(&h, &c),
    };
    let (_, v) = hx.post::<VerificationVerdict>("/v1/proofs", &submission).await;
    let v = v.unwrap();
    assert_eq!(v.outcome, VerificationOutcome::Verified);
    assert_eq!(v.status, Some(TestingStatus::P));

    let c = hx.post::<Challenge>("/v1/challenges", &challenge_req).await.1.unwrap();
    let mut raw = B64.decode(hx.proof(&h, &c)).unwrap();
    raw[200] ^= 1;
    let submission = ProofSubmission {
        challenge_id: hex::encode(c.challenge_id),
        proof: B64.encode(raw),
    };
    let (_, v) = hx.post::<VerificationVerdict>("/v1/proofs", &submission).await;
    assert_eq!(v.unwrap().outcome, VerificationOutcome::Rejected);

    let other = derive_ai_id(&commit_bytes(b"weights-d-perturbed"), &hx.ns);
    let (status, err) = hx.post::<Challenge>("/v1/challenges", &ChallengeRequest { ai_id: other }).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err.unwrap_err().error, "UNREGISTERED");
}

#[tokio::test]
async fn expired_challenge_is_not_verified() {
    let hx = harness();
    let h = commit_bytes(b"weights-e");
    let bundle = hx.bundle(&h);
    hx.post::<Credential>("/v1/entries", &bundle).await.1.unwrap();
    let c = hx
        .post::<Challenge>("/v1/challenges", &ChallengeRequest { ai_id: bundle.ai_id })
        .await
        .1
        .unwrap();
    hx.clock.advance(301);
    let submission = ProofSubmission {
        challenge_id: hex::encode(c.challenge_id),
        proof: hx.proof(&h, &c),
    };
    let (_, v) = hx.post::<VerificationVerdict>("/v1/proofs", &submission).await;
    assert_eq!(v.unwrap().outcome, VerificationOutcome::Expired);
}

#[tokio::test]
async fn drift_attestation_sets_flag() {
    let hx = harness();
    let bundle = hx.bundle(&commit_bytes(b"weights-f"));
    hx.post::<Credential>("/v1/entries", &bundle).await.1.unwrap();
    let reporter = Keypair::from_secret([5; 32]);
    let digest = Digest32::of(b"candidate sketch");
    let ts = hx.clock.now();
    let report = DriftReport {
        ai_id: bundle.ai_id,
        score: 0.9,
        mode: DriftMode::Exact,
        candidate_sketch_digest: digest,
        timestamp: ts,
        reporter_public_key: reporter.public(),
        reporter_signature: reporter.sign(&drift_report_message(&bundle.ai_id, 0.9, DriftMode::Exact, &digest, ts)),
    };
    let (status, rec) = hx.post::<DriftAttestationRecord>("/v1/drift-attestations", &report).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(rec.unwrap().threshold, 0.5);
    let view = hx
        .get::<EntryView>(&format!("/v1/entries/{}", bundle.ai_id))
        .await
        .1
        .unwrap();
    assert!(view.drift_flagged);
    assert_eq!(view.status, TestingStatus::U);

    let unsigned = DriftReport {
        reporter_signature: Signature([0; 64]),
        ..report
    };
    let (status, _) = hx.post::<DriftAttestationRecord>("/v1/drift-attestations", &unsigned).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn audit_blocks_reverify_externally() {
    let hx = harness();
    for seed in [b"w1".as_slice(), b"w2", b"w3"] {
        hx.post::<Credential>("/v1/entries", &hx.bundle(&commit_bytes(seed)))
            .await
            .1
            .unwrap();
    }
    let (status, resp) = hx.get::<BlocksResponse>("/v1/ledger/blocks?from=0").await;
    assert_eq!(status, StatusCode::OK);
    let bytes: Vec<u8> = resp
        .unwrap()
        .blocks
        .iter()
        .flat_map(|b| B64.decode(b).unwrap())
        .collect();
    assert!(verify_chain_bytes(&bytes).is_ok());

    let tail = hx.get::<BlocksResponse>("/v1/ledger/blocks?from=4").await.1.unwrap();
    assert!(tail.blocks.is_empty());
    let (status, _) = hx.get::<BlocksResponse>("/v1/ledger/blocks?from=5").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = hx.get::<BlocksResponse>("/v1/ledger/blocks?from=minus").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
