// SPDX-License-Identifier: Apache-2.0

//! `aiid`: fingerprint checkpoints, build identifiers, talk to a registry.

mod client;
mod fail;
mod keyfile;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use aiid_core::canonical::CanonicalWeightStream;
use aiid_core::identity::{complete_secondary_id, compute_commitment, hash_tail, IdentityError};
use aiid_core::ledger::{status_update_message, verify_chain_bytes, ChainVerdict};
use aiid_core::lzjd::{self, DriftAnchor, DriftMode, DriftOutcome, DEFAULT_K};
use aiid_core::registry::{anchor_rounds, drift_report_message, sign_bundle, EntryView, SystemClock};
use aiid_core::zk::{self, PossessionStatement, PossessionWitness};
use aiid_core::{
    derive_ai_id, parse_secondary_id, Challenge, Clock, Commitment, Credential, Digest32, DigestSketch, DriftPolicy,
    DriftReport, IssuerNamespace, PrimaryIdentifier, RegistrationBundle, SecondaryFields, Signature, TestingStatus,
    VerificationOutcome, VerificationVerdict,
};
use aiid_server::{BlocksResponse, ChallengeRequest, ProofSubmission, ServerConfig, StatusRequest, StatusResponse};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use fail::{exit, CliError, CliResult};
use keyfile::{KeyFile, Role};

#[derive(Parser)]
#[command(name = "aiid", version, about = "Model identity toolchain")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// TOML config with optional [client] and [server] tables.
    #[arg(long, global = true, env = "AIID_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an Ed25519 key file.
    Keygen {
        #[arg(long, value_enum)]
        role: Role,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print H_w, AI-ID and hash tail of an AIW1 weight file.
    Fingerprint {
        weights: PathBuf,
        #[arg(long)]
        namespace: String,
        /// Also write the 32-byte commitment here.
        #[arg(long)]
        commitment_out: Option<PathBuf>,
    },
    /// Build or check secondary identifiers.
    Id {
        #[command(subcommand)]
        cmd: IdCmd,
    },
    /// Register a model with the registry.
    Register(RegisterArgs),
    /// Show an entry's status, or set it with an authority key.
    Status {
        ai_id: String,
        /// New status: U, P, F or X.
        #[arg(long)]
        set: Option<String>,
        #[command(flatten)]
        conn: Conn,
    },
    /// Answer a registry challenge with a proof of possession.
    Prove {
        #[command(flatten)]
        witness: Witness,
        #[arg(long)]
        namespace: String,
        /// Expected AI-ID; checked against the witness before anything is sent.
        #[arg(long)]
        ai_id: Option<String>,
        #[command(flatten)]
        conn: Conn,
    },
    /// Screen a candidate stream for drift from an anchor.
    Drift(DriftArgs),
    /// Write the bottom-k LZJD sketch of a file.
    Sketch {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify a ledger file or a registry's chain.
    Audit {
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[command(flatten)]
        conn: Conn,
    },
    /// Run the registry service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IdCmd {
    /// Assemble a secondary identifier.
    Build {
        #[command(flatten)]
        fields: FieldArgs,
        #[arg(long)]
        owner: String,
        #[command(flatten)]
        tail: TailSource,
    },
    /// Check grammar and checksum of a secondary identifier.
    Check { id: String },
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long)]
    country: String,
    #[arg(long)]
    family: String,
    #[arg(long)]
    version: String,
    /// YYYYMMDD
    #[arg(long)]
    date: String,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Witness {
    /// AIW1 weight file.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// 32-byte raw commitment file.
    #[arg(long)]
    commitment: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TailSource {
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    commitment: Option<PathBuf>,
    /// Four-character hash tail, when H_w is not at hand.
    #[arg(long)]
    tail: Option<String>,
}

#[derive(Args)]
struct Conn {
    /// Registry base URL.
    #[arg(long, env = "AIID_SERVER")]
    server: Option<String>,
    /// Key file for commands that sign.
    #[arg(long, env = "AIID_KEY")]
    key: Option<PathBuf>,
}

#[derive(Args)]
struct RegisterArgs {
    #[command(flatten)]
    witness: Witness,
    #[arg(long)]
    namespace: String,
    #[command(flatten)]
    fields: FieldArgs,
    /// Metadata document; its SHA-256 is recorded on the ledger.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Proof rounds the entry's ZKP anchor commits to.
    #[arg(long, default_value_t = zk::DEFAULT_ROUNDS)]
    rounds: u16,
    #[arg(long)]
    risk_class: Option<String>,
    #[command(flatten)]
    conn: Conn,
}

#[derive(Args)]
struct DriftArgs {
    #[arg(long, required_unless_present = "anchor_sketch", conflicts_with = "anchor_sketch")]
    anchor: Option<PathBuf>,
    #[arg(long)]
    anchor_sketch: Option<PathBuf>,
    #[arg(long)]
    candidate: PathBuf,
    /// Drift threshold; scores strictly above it are DRIFTED.
    #[arg(long)]
    threshold: f64,
    /// Submit a signed drift attestation for this AI-ID.
    #[arg(long)]
    report: Option<String>,
    #[command(flatten)]
    conn: Conn,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    client: ClientConfig,
    server: Option<ServerConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct ClientConfig {
    server: Option<String>,
    key: Option<PathBuf>,
}

struct Ctx {
    json: bool,
    file: FileConfig,
}

impl Ctx {
    fn emit(&self, value: serde_json::Value, text: impl std::fmt::Display) {
        if self.json {
            println!("{value}");
        } else {
            println!("{text}");
        }
    }

    fn registry(&self, conn: &Conn) -> CliResult<client::Registry> {
        let url = conn
            .server
            .clone()
            .or_else(|| self.file.client.server.clone())
            .ok_or_else(|| CliError::usage("no registry URL: pass --server or set AIID_SERVER"))?;
        client::Registry::new(&url)
    }

    fn key(&self, conn: &Conn, roles: &[Role]) -> CliResult<KeyFile> {
        let path = conn
            .key
            .clone()
            .or_else(|| self.file.client.key.clone())
            .ok_or_else(|| CliError::usage("no key file: pass --key or set AIID_KEY"))?;
        KeyFile::read(&path)?.require(roles)
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::input(format!("reading {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))
}

fn load_stream(path: &Path) -> CliResult<CanonicalWeightStream> {
    CanonicalWeightStream::from_bytes(read(path)?)
        .map_err(|e| CliError::input(format!("{}: not a canonical AIW1 stream: {e}", path.display())))
}

fn load_commitment(path: &Path) -> CliResult<Commitment> {
    let bytes = read(path)?;
    let arr: [u8; 32] = bytes.as_slice().try_into().map_err(|_| {
        CliError::input(format!(
            "{}: commitment file must be exactly 32 bytes, found {}",
            path.display(),
            bytes.len()
        ))
    })?;
    Ok(Commitment(arr))
}

fn witness(weights: &Option<PathBuf>, commitment: &Option<PathBuf>) -> CliResult<Commitment> {
    match (weights, commitment) {
        (Some(w), _) => Ok(compute_commitment(&load_stream(w)?)),
        (_, Some(c)) => load_commitment(c),
        _ => Err(CliError::usage("one of --weights or --commitment is required")),
    }
}

fn namespace(s: &str) -> CliResult<IssuerNamespace> {
    IssuerNamespace::new(s).map_err(|e| CliError::input(format!("namespace: {e}")))
}

fn ai_id(s: &str) -> CliResult<PrimaryIdentifier> {
    s.parse().map_err(|e| CliError::input(format!("ai_id: {e}")))
}

fn keygen(ctx: &Ctx, role: Role, out: &Path, force: bool) -> CliResult<()> {
    let kf = KeyFile {
        role,
        keypair: aiid_core::Keypair::generate(&mut rand::rngs::OsRng),
    };
    kf.write(out, force)?;
    let pk = kf.keypair.public();
    ctx.emit(json!({"role": role, "public_key": pk, "path": out}), pk);
    Ok(())
}

fn fingerprint(ctx: &Ctx, weights: &Path, ns: &str, commitment_out: Option<&Path>) -> CliResult<()> {
    let ns = namespace(ns)?;
    let stream = load_stream(weights)?;
    let h = compute_commitment(&stream);
    let id = derive_ai_id(&h, &ns);
    let tail = hash_tail(&h);
    if let Some(p) = commitment_out {
        write(p, h.as_bytes())?;
    }
    ctx.emit(
        json!({"commitment": h, "ai_id": id, "hash_tail": tail, "stream_bytes": stream.len()}),
        format!("commitment {h}\nai_id      {id}\nhash_tail  {tail}"),
    );
    Ok(())
}

fn id_build(ctx: &Ctx, fields: &FieldArgs, owner: &str, tail: &TailSource) -> CliResult<()> {
    let tail = match (&tail.weights, &tail.commitment, &tail.tail) {
        (None, None, Some(t)) => t.clone(),
        (w, c, _) => hash_tail(&witness(w, c)?),
    };
    let fields = SecondaryFields::new(&fields.country, owner, &fields.family, &fields.version, &fields.date);
    let id = complete_secondary_id(fields, &tail).map_err(|e| CliError::input(e.to_string()))?;
    ctx.emit(json!({"secondary_id": id.render()}), id.render());
    Ok(())
}

fn id_check(ctx: &Ctx, text: &str) -> CliResult<()> {
    match parse_secondary_id(text, true) {
        Ok(id) => {
            ctx.emit(
                json!({"valid": true, "secondary_id": id.render(), "fields": id.fields(),
                       "hash_tail": id.hash_tail(), "checksum": id.checksum()}),
                "ok",
            );
            Ok(())
        }
        Err(e @ IdentityError::ChecksumMismatch { .. }) => Err(CliError::verify(e.to_string())),
        Err(e) => Err(CliError::input(e.to_string())),
    }
}

fn register(ctx: &Ctx, a: &RegisterArgs) -> CliResult<()> {
    let ns = namespace(&a.namespace)?;
    let h = witness(&a.witness.weights, &a.witness.commitment)?;
    let key = ctx.key(&a.conn, &[Role::Developer])?;
    let metadata = match &a.metadata {
        Some(p) => read(p)?,
        None => Vec::new(),
    };
    if a.rounds == 0 {
        return Err(CliError::input("--rounds must be at least 1"));
    }
    let bundle = RegistrationBundle {
        namespace: ns,
        country: a.fields.country.clone(),
        family: a.fields.family.clone(),
        version: a.fields.version.clone(),
        date: a.fields.date.clone(),
        hash_tail: hash_tail(&h),
        ai_id: derive_ai_id(&h, &ns),
        zkp_anchor: zk::zkp_anchor(a.rounds),
        metadata,
        developer_public_key: key.keypair.public(),
        registered_at: SystemClock.now(),
        developer_signature: Signature([0; 64]),
        risk_class: a.risk_class.clone(),
    };
    let bundle = sign_bundle(bundle, &key.keypair).map_err(|e| CliError::input(e.to_string()))?;
    let cred: Credential = ctx.registry(&a.conn)?.post("/v1/entries", &bundle)?;
    ctx.emit(
        serde_json::to_value(&cred).expect("credential serializes"),
        format!("{}\nai_id  {}\nstatus {}", cred.secondary_id, cred.entry.ai_id, cred.status),
    );
    Ok(())
}

fn status(ctx: &Ctx, id: &str, set: Option<&str>, conn: &Conn) -> CliResult<()> {
    let id = ai_id(id)?;
    let reg = ctx.registry(conn)?;
    match set {
        None => {
            let view: EntryView = reg.get(&format!("/v1/entries/{id}"))?;
            let flag = if view.drift_flagged { " drift-flagged" } else { "" };
            ctx.emit(
                serde_json::to_value(&view).expect("view serializes"),
                format!("{} {}{flag}", view.secondary_id, view.status),
            );
        }
        Some(s) => {
            let new: TestingStatus = s.parse().map_err(|e| CliError::input(format!("{e}")))?;
            let key = ctx.key(conn, &[Role::Authority])?;
            let ts = SystemClock.now();
            let req = StatusRequest {
                status: new,
                timestamp: ts,
                authority_public_key: key.keypair.public(),
                authority_signature: key.keypair.sign(&status_update_message(&id, new, ts)),
            };
            let resp: StatusResponse = reg.post(&format!("/v1/entries/{id}/status"), &req)?;
            ctx.emit(json!(resp), resp.status);
        }
    }
    Ok(())
}

fn prove(ctx: &Ctx, w: &Witness, ns: &str, expected: Option<&str>, conn: &Conn) -> CliResult<()> {
    let ns = namespace(ns)?;
    let h = witness(&w.weights, &w.commitment)?;
    let id = derive_ai_id(&h, &ns);
    if let Some(e) = expected {
        if ai_id(e)? != id {
            return Err(CliError::verify(format!("witness does not match ai_id {e} (it opens {id})")).at("prove"));
        }
    }
    let reg = ctx.registry(conn)?;
    let entry: EntryView = reg.get(&format!("/v1/entries/{id}")).map_err(|e| e.at("lookup"))?;
    let rounds = anchor_rounds(&entry.entry.zkp_anchor)
        .ok_or_else(|| CliError::server("entry's zkp_anchor names no known round count").at("lookup"))?;
    let challenge: Challenge = reg
        .post("/v1/challenges", &ChallengeRequest { ai_id: id })
        .map_err(|e| e.at("challenge"))?;
    let statement = PossessionStatement::new(id, ns, challenge.nonce).with_rounds(rounds);
    let proof = zk::prove(&statement, &PossessionWitness { h }, &mut rand::rngs::OsRng)
        .map_err(|e| CliError::verify(e.to_string()).at("prove"))?;
    let submission = ProofSubmission {
        challenge_id: hex::encode(challenge.challenge_id),
        proof: B64.encode(proof.to_bytes()),
    };
    let verdict: VerificationVerdict = reg.post("/v1/proofs", &submission).map_err(|e| e.at("submit"))?;
    let outcome = serde_json::to_value(verdict.outcome).expect("outcome serializes");
    let label = outcome.as_str().unwrap_or_default().to_owned();
    ctx.emit(
        serde_json::to_value(&verdict).expect("verdict serializes"),
        format!("{label}\n{}", verdict.detail),
    );
    if verdict.outcome == VerificationOutcome::Verified {
        Ok(())
    } else {
        Err(CliError::verify(format!("verification outcome {label}")))
    }
}

fn drift(ctx: &Ctx, a: &DriftArgs) -> CliResult<()> {
    let policy = DriftPolicy::new(a.threshold, "cli").map_err(|e| CliError::input(e.to_string()))?;
    let candidate = read(&a.candidate)?;
    let anchor_sketch = match &a.anchor_sketch {
        Some(p) => Some(DigestSketch::from_bytes(&read(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let anchor_bytes = match &a.anchor {
        Some(p) => read(p)?,
        None => Vec::new(),
    };
    let anchor = match &anchor_sketch {
        Some(s) => DriftAnchor::Sketch(s),
        None => DriftAnchor::Stream(&anchor_bytes),
    };
    let verdict = lzjd::screen_drift(anchor, None, &candidate, &policy).map_err(|e| CliError::input(e.to_string()))?;
    let label = match verdict.outcome {
        DriftOutcome::Within => "WITHIN",
        DriftOutcome::Drifted => "DRIFTED",
    };
    let mut out = json!({"score": verdict.score, "outcome": verdict.outcome, "mode": verdict.mode,
                         "threshold": a.threshold});
    if let Some(id) = &a.report {
        let id = ai_id(id)?;
        let key = ctx.key(&a.conn, &[Role::Reporter, Role::Attestor])?;
        let k = anchor_sketch.as_ref().map_or(DEFAULT_K, |s| s.k() as usize);
        let digest = lzjd::sketch(&candidate, k)
            .map(|s| Digest32::of(&s.to_bytes()))
            .map_err(|e| CliError::input(e.to_string()))?;
        let ts = SystemClock.now();
        let report = DriftReport {
            ai_id: id,
            score: verdict.score,
            mode: verdict.mode,
            candidate_sketch_digest: digest,
            timestamp: ts,
            reporter_public_key: key.keypair.public(),
            reporter_signature: key
                .keypair
                .sign(&drift_report_message(&id, verdict.score, verdict.mode, &digest, ts)),
        };
        let record: serde_json::Value = ctx
            .registry(&a.conn)?
            .post("/v1/drift-attestations", &report)
            .map_err(|e| e.at("report"))?;
        out["attestation"] = record;
    }
    let mode = match verdict.mode {
        DriftMode::Exact => "exact",
        DriftMode::Sketch => "sketch",
    };
    ctx.emit(out, format!("{:.6} {label} ({mode})", verdict.score));
    match verdict.outcome {
        DriftOutcome::Within => Ok(()),
        DriftOutcome::Drifted => Err(CliError::verify(format!(
            "score {:.6} exceeds threshold {}",
            verdict.score, a.threshold
        ))),
    }
}

fn sketch(ctx: &Ctx, input: &Path, k: usize, out: &Path) -> CliResult<()> {
    let s = lzjd::sketch(&read(input)?, k).map_err(|e| CliError::input(e.to_string()))?;
    let bytes = s.to_bytes();
    write(out, &bytes)?;
    let digest = Digest32::of(&bytes);
    ctx.emit(
        json!({"k": s.k(), "values": s.values().len(), "sketch_digest": digest, "path": out}),
        format!("{digest} k={} values={}", s.k(), s.values().len()),
    );
    Ok(())
}

fn audit(ctx: &Ctx, ledger: Option<&Path>, conn: &Conn) -> CliResult<()> {
    let bytes = match ledger {
        Some(p) => read(p)?,
        None => {
            let resp: BlocksResponse = ctx.registry(conn)?.get("/v1/ledger/blocks?from=0")?;
            let mut all = Vec::new();
            for b in &resp.blocks {
                all.extend(B64.decode(b).map_err(|e| CliError::server(format!("block encoding: {e}")))?);
            }
            all
        }
    };
    match verify_chain_bytes(&bytes) {
        ChainVerdict::Ok { blocks } => {
            ctx.emit(json!({"ok": true, "blocks": blocks}), format!("ok {blocks} blocks"));
            Ok(())
        }
        ChainVerdict::Invalid { index, fault } => {
            ctx.emit(
                json!({"ok": false, "first_bad_block": index, "fault": fault.to_string()}),
                format!("invalid at block {index}: {fault}"),
            );
            Err(CliError::verify(format!("chain invalid at block {index}")))
        }
    }
}

fn serve(ctx: &Ctx, bind: Option<&str>, ledger: Option<&Path>) -> CliResult<()> {
    let mut cfg = ctx.file.server.clone().unwrap_or_default();
    if let Some(b) = bind {
        cfg.bind = b.to_owned();
    }
    if let Some(l) = ledger {
        cfg.ledger_path = Some(l.to_owned());
    }
    let cfg = cfg
        .apply_env(|k| std::env::var(k).ok())
        .map_err(|e| CliError::input(e.to_string()))?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let registry = Arc::new(aiid_server::build_registry(&cfg).map_err(|e| CliError::input(e.to_string()))?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::input(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .map_err(|e| CliError::input(format!("binding {}: {e}", cfg.bind)))?;
        let addr = listener.local_addr().map_err(|e| CliError::input(e.to_string()))?;
        ctx.emit(json!({"listening": addr.to_string()}), format!("listening on {addr}"));
        let _ = std::io::stdout().flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        aiid_server::serve(listener, registry, shutdown)
            .await
            .map_err(|e| CliError::server(e.to_string()))
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("reading {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let ctx = Ctx { json: cli.json, file };
    match &cli.cmd {
        Cmd::Keygen { role, out, force } => keygen(&ctx, *role, out, *force),
        Cmd::Fingerprint {
            weights,
            namespace,
            commitment_out,
        } => fingerprint(&ctx, weights, namespace, commitment_out.as_deref()),
        Cmd::Id {
            cmd: IdCmd::Build { fields, owner, tail },
        } => id_build(&ctx, fields, owner, tail),
        Cmd::Id {
            cmd: IdCmd::Check { id },
        } => id_check(&ctx, id),
        Cmd::Register(a) => register(&ctx, a),
        Cmd::Status { ai_id, set, conn } => status(&ctx, ai_id, set.as_deref(), conn),
        Cmd::Prove {
            witness,
            namespace,
            ai_id,
            conn,
        } => prove(&ctx, witness, namespace, ai_id.as_deref(), conn),
        Cmd::Drift(a) => drift(&ctx, a),
        Cmd::Sketch { input, k, out } => sketch(&ctx, input, *k, out),
        Cmd::Audit { ledger, conn } => audit(&ctx, ledger.as_deref(), conn),
        Cmd::Serve { bind, ledger } => serve(&ctx, bind.as_deref(), ledger.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
