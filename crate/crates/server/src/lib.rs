// SPDX-License-Identifier: Apache-2.0

//! JSON-over-HTTP front-end for [`aiid_core::Registry`].
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | POST | `/v1/entries` | `RegistrationBundle` | 201 `Credential` |
//! | POST | `/v1/entries/{ai_id}/status` | `StatusRequest` | 200 `StatusResponse` |
//! | GET | `/v1/entries/{ai_id}` | | 200 `EntryView` |
//! | GET | `/v1/entries/{ai_id}/history` | | 200 `EntryHistory` |
//! | POST | `/v1/challenges` | `ChallengeRequest` | 201 `Challenge` |
//! | POST | `/v1/proofs` | `ProofSubmission` | 200 `VerificationVerdict` |
//! | POST | `/v1/drift-attestations` | `DriftReport` | 201 `DriftAttestationRecord` |
//! | GET | `/v1/ledger/blocks?from=N` | | 200 `BlocksResponse` |
//!
//! Failures carry `ErrorBody { error, detail }` with a stable `error` code.

pub mod api;
pub mod config;

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use aiid_core::registry::{Registry, RegistryError, SystemClock};
use aiid_core::{DriftReport, PrimaryIdentifier, RegistrationBundle};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;

pub use api::*;
pub use config::{ConfigError, ServerConfig};

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: code.to_owned(),
                detail: detail.into(),
            },
        }
    }

    fn malformed(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "MALFORMED", detail)
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        let status = match &e {
            RegistryError::Unregistered(_) | RegistryError::UnknownChallenge => StatusCode::NOT_FOUND,
            RegistryError::Duplicate(_) | RegistryError::IllegalTransition { .. } => StatusCode::CONFLICT,
            RegistryError::InvalidSignature | RegistryError::Malformed(_) | RegistryError::BeyondHead(_) => {
                StatusCode::BAD_REQUEST
            }
            RegistryError::Unauthorized(_) => StatusCode::FORBIDDEN,
            RegistryError::Ledger(_) | RegistryError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "registry failure");
        }
        Self::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Shared = Arc<Registry>;
type ApiResult<T> = Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::malformed(format!("request body: {e}")))
}

fn ai_id(text: &str) -> ApiResult<PrimaryIdentifier> {
    text.parse().map_err(|e| ApiError::malformed(format!("ai_id: {e}")))
}

// Registry calls take locks and may fsync or verify proofs; keep them off
// the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
}

async fn register(State(reg): State<Shared>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let bundle: RegistrationBundle = body(&bytes)?;
    let cred = blocking(move || Ok(reg.register(&bundle)?)).await?;
    Ok((StatusCode::CREATED, Json(cred)))
}

async fn update_status(
    State(reg): State<Shared>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Json<StatusResponse>> {
    let id = ai_id(&id)?;
    let req: StatusRequest = body(&bytes)?;
    let status = blocking(move || {
        Ok(reg.update_status(
            &id,
            req.status,
            req.timestamp,
            req.authority_public_key,
            req.authority_signature,
        )?)
    })
    .await?;
    Ok(Json(StatusResponse { ai_id: id, status }))
}

async fn lookup(State(reg): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = ai_id(&id)?;
    Ok(Json(reg.lookup(&id)?))
}

async fn history(State(reg): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = ai_id(&id)?;
    Ok(Json(reg.history(&id)?))
}

async fn challenge(State(reg): State<Shared>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let req: ChallengeRequest = body(&bytes)?;
    Ok((StatusCode::CREATED, Json(reg.issue_challenge(&req.ai_id)?)))
}

async fn proof(State(reg): State<Shared>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let req: ProofSubmission = body(&bytes)?;
    let mut id = [0u8; 16];
    hex::decode_to_slice(&req.challenge_id, &mut id).map_err(|e| ApiError::malformed(format!("challenge_id: {e}")))?;
    let proof = B64
        .decode(req.proof.as_bytes())
        .map_err(|e| ApiError::malformed(format!("proof: {e}")))?;
    let verdict = blocking(move || Ok(reg.submit_proof(&id, &proof)?)).await?;
    Ok(Json(verdict))
}

async fn drift(State(reg): State<Shared>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let report: DriftReport = body(&bytes)?;
    let record = blocking(move || Ok(reg.record_drift_attestation(&report)?)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn blocks(
    State(reg): State<Shared>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Json<BlocksResponse>> {
    let from = match query.get("from") {
        Some(v) => v.parse().map_err(|_| ApiError::malformed(format!("from: {v:?} is not an index")))?,
        None => 0,
    };
    let blocks = reg.audit_blocks(from)?.iter().map(|b| B64.encode(b)).collect();
    Ok(Json(BlocksResponse { from, blocks }))
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/v1/entries", post(register))
        .route("/v1/entries/{ai_id}", get(lookup))
        .route("/v1/entries/{ai_id}/status", post(update_status))
        .route("/v1/entries/{ai_id}/history", get(history))
        .route("/v1/challenges", post(challenge))
        .route("/v1/proofs", post(proof))
        .route("/v1/drift-attestations", post(drift))
        .route("/v1/ledger/blocks", get(blocks))
        .with_state(registry)
}

pub fn build_registry(config: &ServerConfig) -> Result<Registry, RegistryError> {
    let clock = Arc::new(SystemClock);
    match &config.ledger_path {
        Some(path) => Registry::open(config.registry.clone(), clock, path),
        None => Registry::new(config.registry.clone(), clock),
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    registry: Arc<Registry>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "registry listening");
    axum::serve(listener, router(registry)).with_graceful_shutdown(shutdown).await
}
