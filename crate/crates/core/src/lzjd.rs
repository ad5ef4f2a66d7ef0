// SPDX-License-Identifier: Apache-2.0

//! Lempel–Ziv Jaccard distance between byte streams.
//!
//! Two modes: exact set arithmetic over LZ phrase sets, and a bottom-k
//! estimate over 64-bit FNV-1a phrase hashes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::PrimaryIdentifier;

pub const DEFAULT_K: usize = 1024;
pub const SKETCH_MAGIC: [u8; 4] = *b"LZJ1";
/// `hash_algorithm_id` for FNV-1a 64 followed by the murmur3 64-bit finalizer.
pub const FNV1A_64_FMIX: u8 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LzjdError {
    #[error("both inputs are empty; distance is undefined")]
    BothEmpty,
    #[error("sketch parameters differ: k {0} vs {1}, algorithm {2} vs {3}")]
    SketchMismatch(u32, u32, u8, u8),
    #[error("sketch size must be at least 1")]
    ZeroK,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("malformed sketch: {0}")]
    Malformed(&'static str),
}

/// The set of unique phrases produced by LZ parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseSet(HashSet<Vec<u8>>);

impl PhraseSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, phrase: &[u8]) -> bool {
        self.0.contains(phrase)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.0.iter().map(Vec::as_slice)
    }
}

impl<T: AsRef<[u8]>> FromIterator<T> for PhraseSet {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self(iter.into_iter().map(|p| p.as_ref().to_vec()).collect())
    }
}

/// Single left-to-right pass: grow the current phrase byte by byte and emit
/// it the first time it is unseen. A trailing phrase already in the set is
/// dropped.
pub fn lz_phrases(bytes: &[u8]) -> PhraseSet {
    let mut set: HashSet<Vec<u8>> = HashSet::new();
    let mut start = 0;
    for end in 1..=bytes.len() {
        let p = &bytes[start..end];
        if !set.contains(p) {
            set.insert(p.to_vec());
            start = end;
        }
    }
    PhraseSet(set)
}

/// `1 - |a ∩ b| / |a ∪ b|`.
pub fn jaccard_distance(a: &PhraseSet, b: &PhraseSet) -> Result<f64, LzjdError> {
    if a.is_empty() && b.is_empty() {
        return Err(LzjdError::BothEmpty);
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.0.iter().filter(|p| large.0.contains(*p)).count();
    let union = a.len() + b.len() - inter;
    Ok(1.0 - inter as f64 / union as f64)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Sketch hash of one phrase. Raw FNV-1a leaves the high bits of short
/// inputs nearly constant, which skews a bottom-k sample towards long
/// phrases; the finalizer spreads them.
pub fn phrase_hash(phrase: &[u8]) -> u64 {
    fmix64(fnv1a64(phrase))
}

fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

/// Bottom-k sketch of a phrase set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestSketch {
    k: u32,
    values: Vec<u64>,
    hash_algorithm_id: u8,
}

impl DigestSketch {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn hash_algorithm_id(&self) -> u8 {
        self.hash_algorithm_id
    }

    /// Binary form: `"LZJ1" | k u32 | count u32 | values u64* | algorithm u8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 8 * self.values.len());
        out.extend_from_slice(&SKETCH_MAGIC);
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.hash_algorithm_id);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LzjdError> {
        if bytes.len() < 13 || bytes[..4] != SKETCH_MAGIC {
            return Err(LzjdError::Malformed("bad magic or header"));
        }
        let k = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if k == 0 {
            return Err(LzjdError::ZeroK);
        }
        if count > k as usize {
            return Err(LzjdError::Malformed("more values than k"));
        }
        if bytes.len() != 13 + 8 * count {
            return Err(LzjdError::Malformed("length does not match count"));
        }
        let values: Vec<u64> = bytes[12..12 + 8 * count]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LzjdError::Malformed("values not strictly ascending"));
        }
        let alg = bytes[12 + 8 * count];
        if alg != FNV1A_64_FMIX {
            return Err(LzjdError::Malformed("unknown hash algorithm"));
        }
        Ok(Self {
            k,
            values,
            hash_algorithm_id: alg,
        })
    }
}

pub fn sketch(bytes: &[u8], k: usize) -> Result<DigestSketch, LzjdError> {
    sketch_phrases(&lz_phrases(bytes), k)
}

pub fn sketch_phrases(phrases: &PhraseSet, k: usize) -> Result<DigestSketch, LzjdError> {
    if k == 0 {
        return Err(LzjdError::ZeroK);
    }
    let k32 = u32::try_from(k).map_err(|_| LzjdError::Malformed("k exceeds u32"))?;
    let mut values: Vec<u64> = phrases.iter().map(phrase_hash).collect();
    values.sort_unstable();
    values.dedup();
    values.truncate(k);
    Ok(DigestSketch {
        k: k32,
        values,
        hash_algorithm_id: FNV1A_64_FMIX,
    })
}

/// Bottom-k estimate: over the `k` smallest values of the union, the
/// fraction present in both sketches.
pub fn sketch_distance(a: &DigestSketch, b: &DigestSketch) -> Result<f64, LzjdError> {
    if a.k != b.k || a.hash_algorithm_id != b.hash_algorithm_id {
        return Err(LzjdError::SketchMismatch(
            a.k,
            b.k,
            a.hash_algorithm_id,
            b.hash_algorithm_id,
        ));
    }
    if a.values.is_empty() && b.values.is_empty() {
        return Err(LzjdError::BothEmpty);
    }
    let k = a.k as usize;
    let (mut i, mut j) = (0, 0);
    let (mut taken, mut shared) = (0usize, 0usize);
    // merge walk over the two sorted lists, stopping after k union members
    while taken < k && (i < a.values.len() || j < b.values.len()) {
        match (a.values.get(i), b.values.get(j)) {
            (Some(x), Some(y)) if x == y => {
                shared += 1;
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => i += 1,
            (Some(_), Some(_)) => j += 1,
            (Some(_), None) => i += 1,
            (None, Some(_)) => j += 1,
            (None, None) => unreachable!(),
        }
        taken += 1;
    }
    Ok(1.0 - shared as f64 / taken as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPolicy {
    threshold: f64,
    pub policy_id: String,
}

impl DriftPolicy {
    pub fn new(threshold: f64, policy_id: impl Into<String>) -> Result<Self, LzjdError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(LzjdError::BadThreshold(threshold));
        }
        Ok(Self {
            threshold,
            policy_id: policy_id.into(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn outcome(&self, score: f64) -> DriftOutcome {
        if score > self.threshold {
            DriftOutcome::Drifted
        } else {
            DriftOutcome::Within
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DriftOutcome {
    Within,
    Drifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DriftMode {
    Exact,
    Sketch,
}

impl DriftMode {
    pub fn code(self) -> u8 {
        match self {
            DriftMode::Exact => 1,
            DriftMode::Sketch => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    pub score: f64,
    pub outcome: DriftOutcome,
    pub anchor_ai_id: Option<PrimaryIdentifier>,
    pub mode: DriftMode,
}

/// What a drift screen compares the candidate against.
#[derive(Debug, Clone, Copy)]
pub enum DriftAnchor<'a> {
    Stream(&'a [u8]),
    Sketch(&'a DigestSketch),
}

pub fn screen_drift(
    anchor: DriftAnchor<'_>,
    anchor_ai_id: Option<PrimaryIdentifier>,
    candidate: &[u8],
    policy: &DriftPolicy,
) -> Result<DriftVerdict, LzjdError> {
    let (score, mode) = match anchor {
        DriftAnchor::Stream(a) => (
            jaccard_distance(&lz_phrases(a), &lz_phrases(candidate))?,
            DriftMode::Exact,
        ),
        DriftAnchor::Sketch(s) => {
            let c = sketch(candidate, s.k as usize)?;
            (sketch_distance(s, &c)?, DriftMode::Sketch)
        }
    };
    Ok(DriftVerdict {
        score,
        outcome: policy.outcome(score),
        anchor_ai_id,
        mode,
    })
}
