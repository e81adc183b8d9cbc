//! Snapshot files: save a [`ClusterState`] and restore it bit-exactly.
//!
//! A snapshot is two lines of JSON. The first is a header carrying the
//! format version and a SHA-256 of the second line; the second is the
//! payload (config, clusters as compensated running sums, points seen). Floats are
//! written as shortest round-trip numerals, so a load reproduces every sum
//! bit for bit.
//!
//! ```text
//! {"format":"simstream-snapshot","format_version":1,"checksum":"<sha256 hex>"}
//! {"config":{"strictness":60.0,"n_features":10},"points_seen":6,"clusters":[...]}
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Cluster, ClusterState, Config};

pub const FORMAT_NAME: &str = "simstream-snapshot";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot checksum mismatch (file truncated or modified)")]
    ChecksumMismatch,
    #[error("unsupported snapshot format version {0}")]
    VersionUnsupported(u32),
    #[error("not a snapshot file: {0}")]
    Malformed(String),
    #[error("snapshot is internally inconsistent: {0}")]
    InvariantViolation(String),
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    format_version: u32,
    checksum: String,
}

#[derive(Serialize, Deserialize)]
struct ConfigRecord {
    strictness: f64,
    n_features: usize,
}

#[derive(Serialize, Deserialize)]
struct ClusterRecord {
    id: u32,
    member_count: u64,
    feature_sums: Vec<f64>,
    sum_residuals: Vec<f64>,
    member_seqs: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    config: ConfigRecord,
    points_seen: u64,
    clusters: Vec<ClusterRecord>,
}

fn checksum(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

/// Serializes `state` to the two-line snapshot document.
pub fn encode(state: &ClusterState) -> String {
    let payload = Payload {
        config: ConfigRecord {
            strictness: state.config().strictness(),
            n_features: state.config().n_features(),
        },
        points_seen: state.points_seen(),
        clusters: state
            .clusters()
            .iter()
            .map(|c| ClusterRecord {
                id: c.id(),
                member_count: c.member_count(),
                feature_sums: c.feature_sums().to_vec(),
                sum_residuals: c.sum_residuals().to_vec(),
                member_seqs: c.member_seqs().to_vec(),
            })
            .collect(),
    };
    let body = serde_json::to_string(&payload).expect("payload is always serializable");
    let header = Header {
        format: FORMAT_NAME.to_owned(),
        format_version: FORMAT_VERSION,
        checksum: checksum(body.as_bytes()),
    };
    let header = serde_json::to_string(&header).expect("header is always serializable");
    format!("{header}\n{body}\n")
}

/// Parses a snapshot document, verifying version and checksum before the
/// payload is interpreted.
pub fn decode(bytes: &[u8]) -> Result<ClusterState, SnapshotError> {
    let Some(split) = bytes.iter().position(|&b| b == b'\n') else {
        // header line never terminated
        return Err(SnapshotError::ChecksumMismatch);
    };
    let header: Header = serde_json::from_slice(&bytes[..split])
        .map_err(|e| SnapshotError::Malformed(format!("header: {e}")))?;
    if header.format != FORMAT_NAME {
        return Err(SnapshotError::Malformed(format!(
            "unexpected format tag {:?}",
            header.format
        )));
    }
    if header.format_version != FORMAT_VERSION {
        return Err(SnapshotError::VersionUnsupported(header.format_version));
    }

    let rest = &bytes[split + 1..];
    let body = rest.strip_suffix(b"\n").unwrap_or(rest);
    if checksum(body) != header.checksum {
        return Err(SnapshotError::ChecksumMismatch);
    }

    let payload: Payload = serde_json::from_slice(body)
        .map_err(|e| SnapshotError::Malformed(format!("payload: {e}")))?;
    let config = Config::new(payload.config.strictness, payload.config.n_features)
        .map_err(|e| SnapshotError::InvariantViolation(e.to_string()))?;
    let clusters = payload
        .clusters
        .into_iter()
        .map(|c| {
            Cluster::from_parts(
                c.id,
                c.member_count,
                c.feature_sums,
                c.sum_residuals,
                c.member_seqs,
            )
        })
        .collect();
    ClusterState::from_parts(config, clusters, payload.points_seen)
        .map_err(|e| SnapshotError::InvariantViolation(e.to_string()))
}

/// Writes `state` to `destination`, replacing any existing file atomically.
pub fn save_snapshot(state: &ClusterState, destination: &Path) -> Result<(), SnapshotError> {
    let dir = match destination.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(encode(state).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(destination).map_err(|e| e.error)?;
    Ok(())
}

pub fn load_snapshot(source: &Path) -> Result<ClusterState, SnapshotError> {
    decode(&std::fs::read(source)?)
}
