// SPDX-License-Identifier: Apache-2.0

//! Commitment, namespaced AI-ID and the human-readable secondary identifier.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical::CanonicalWeightStream;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("expected 64 lowercase hex characters")]
    BadHex,
    #[error("namespace must be 8 characters of [A-Z0-9], got {0:?}")]
    BadNamespace(String),
    #[error("invalid {field}: {value:?}")]
    BadField { field: &'static str, value: String },
    #[error("invalid calendar date {0:?}")]
    BadDate(String),
    #[error("secondary identifier grammar mismatch at position {position}: {reason}")]
    Grammar { position: usize, reason: &'static str },
    #[error("checksum mismatch: expected {expected}, found {found}")]
    ChecksumMismatch { expected: String, found: String },
}

macro_rules! digest_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl From<[u8; 32]> for $name {
            fn from(b: [u8; 32]) -> Self {
                Self(b)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = IdentityError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_hex32(s).map(Self)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// Parses the canonical lowercase hex form of a 32-byte digest.
pub fn parse_hex32(s: &str) -> Result<[u8; 32], IdentityError> {
    if s.len() != 64 || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(IdentityError::BadHex);
    }
    let mut out = [0u8; 32];
    hex::decode_to_slice(s, &mut out).map_err(|_| IdentityError::BadHex)?;
    Ok(out)
}

digest_newtype!(
    /// `H_w`: SHA-256 over the canonical weight stream. Secret to the model owner.
    Commitment
);
digest_newtype!(
    /// The namespaced AI-ID, `SHA-256(namespace || H_w)`.
    PrimaryIdentifier
);
digest_newtype!(
    /// A generic 32-byte SHA-256 digest (anchors, metadata digests, block hashes).
    Digest32
);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0; 32]);

    pub fn of(bytes: &[u8]) -> Self {
        Self(Sha256::digest(bytes).into())
    }
}

/// Issuer prefix: exactly 8 characters of `[A-Z0-9]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IssuerNamespace([u8; 8]);

impl IssuerNamespace {
    pub fn new(s: &str) -> Result<Self, IdentityError> {
        let bytes: [u8; 8] = s
            .as_bytes()
            .try_into()
            .map_err(|_| IdentityError::BadNamespace(s.to_owned()))?;
        if !bytes.iter().all(is_upper_alnum) {
            return Err(IdentityError::BadNamespace(s.to_owned()));
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; 8] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        // validated ASCII
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl fmt::Display for IssuerNamespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for IssuerNamespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IssuerNamespace({})", self.as_str())
    }
}

impl FromStr for IssuerNamespace {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for IssuerNamespace {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for IssuerNamespace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::new(&s).map_err(serde::de::Error::custom)
    }
}

pub fn compute_commitment(stream: &CanonicalWeightStream) -> Commitment {
    commit_bytes(stream.as_bytes())
}

/// SHA-256 over raw stream bytes, without AIW1 validation.
pub fn commit_bytes(bytes: &[u8]) -> Commitment {
    Commitment(Sha256::digest(bytes).into())
}

/// `SHA-256(namespace || H_w)` over the fixed 40-byte message.
pub fn derive_ai_id(h: &Commitment, ns: &IssuerNamespace) -> PrimaryIdentifier {
    let mut hasher = Sha256::new();
    hasher.update(ns.as_bytes());
    hasher.update(h.as_bytes());
    PrimaryIdentifier(hasher.finalize().into())
}

const BASE36: &[u8; 36] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";

fn base36_fixed<const N: usize>(mut value: u32) -> String {
    let mut out = [b'0'; N];
    for slot in out.iter_mut().rev() {
        *slot = BASE36[(value % 36) as usize];
        value /= 36;
    }
    String::from_utf8(out.to_vec()).unwrap()
}

fn is_upper_alnum(b: &u8) -> bool {
    b.is_ascii_digit() || b.is_ascii_uppercase()
}

/// Four base-36 characters from the last three bytes of `H_w`.
pub fn hash_tail(h: &Commitment) -> String {
    let b = h.as_bytes();
    let v = u32::from_be_bytes([0, b[29], b[30], b[31]]);
    base36_fixed::<4>(v % 36u32.pow(4))
}

/// The seven fields of a secondary identifier, prior to checksumming.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecondaryFields {
    pub country: String,
    pub owner_id: String,
    pub family: String,
    pub version: String,
    pub date: String,
}

impl SecondaryFields {
    pub fn new(
        country: impl Into<String>,
        owner_id: impl Into<String>,
        family: impl Into<String>,
        version: impl Into<String>,
        date: impl Into<String>,
    ) -> Self {
        Self {
            country: country.into(),
            owner_id: owner_id.into(),
            family: family.into(),
            version: version.into(),
            date: date.into(),
        }
    }

    pub fn validate(&self) -> Result<(), IdentityError> {
        check_field("country", &self.country, 2, |b| b.is_ascii_uppercase())?;
        check_field("owner_id", &self.owner_id, 8, is_upper_alnum)?;
        check_field("family", &self.family, 3, is_upper_alnum)?;
        check_field("version", &self.version, 2, is_upper_alnum)?;
        check_field("date", &self.date, 8, u8::is_ascii_digit)?;
        check_date(&self.date)
    }
}

fn check_field(
    field: &'static str,
    value: &str,
    len: usize,
    class: impl Fn(&u8) -> bool,
) -> Result<(), IdentityError> {
    if value.len() != len || !value.as_bytes().iter().all(class) {
        return Err(IdentityError::BadField {
            field,
            value: value.to_owned(),
        });
    }
    Ok(())
}

fn check_date(date: &str) -> Result<(), IdentityError> {
    let (y, rest) = date.split_at(4);
    let (m, d) = rest.split_at(2);
    let ok = match (y.parse(), m.parse(), d.parse()) {
        (Ok(y), Ok(m), Ok(d)) => NaiveDate::from_ymd_opt(y, m, d).is_some(),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(IdentityError::BadDate(date.to_owned()))
    }
}

/// `CC-OOOOOOOO-FFFVV-YYYYMMDD-TTTT-KK`
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SecondaryIdentifier {
    fields: SecondaryFields,
    hash_tail: String,
    checksum: String,
}

pub const SECONDARY_ID_LEN: usize = 34;

impl SecondaryIdentifier {
    pub fn fields(&self) -> &SecondaryFields {
        &self.fields
    }

    pub fn country(&self) -> &str {
        &self.fields.country
    }

    pub fn owner_id(&self) -> &str {
        &self.fields.owner_id
    }

    pub fn family(&self) -> &str {
        &self.fields.family
    }

    pub fn version(&self) -> &str {
        &self.fields.version
    }

    pub fn date(&self) -> &str {
        &self.fields.date
    }

    pub fn hash_tail(&self) -> &str {
        &self.hash_tail
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn render(&self) -> String {
        let f = &self.fields;
        format!(
            "{}-{}-{}{}-{}-{}-{}",
            f.country, f.owner_id, f.family, f.version, f.date, self.hash_tail, self.checksum
        )
    }

    /// The checksum the other six fields call for.
    pub fn expected_checksum(&self) -> String {
        checksum(&self.fields, &self.hash_tail)
    }
}

impl fmt::Display for SecondaryIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Debug for SecondaryIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecondaryIdentifier({})", self.render())
    }
}

impl Serialize for SecondaryIdentifier {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for SecondaryIdentifier {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_secondary_id(&s, true).map_err(serde::de::Error::custom)
    }
}

/// Two base-36 characters over the first two bytes of
/// `SHA-256(country || owner || family || version || date || tail)`.
pub fn checksum(fields: &SecondaryFields, tail: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [
        &fields.country,
        &fields.owner_id,
        &fields.family,
        &fields.version,
        &fields.date,
    ] {
        hasher.update(part.as_bytes());
    }
    hasher.update(tail.as_bytes());
    let d = hasher.finalize();
    let v = u32::from(u16::from_be_bytes([d[0], d[1]]));
    base36_fixed::<2>(v % (36 * 36))
}

pub fn build_secondary_id(
    fields: SecondaryFields,
    h: &Commitment,
) -> Result<SecondaryIdentifier, IdentityError> {
    complete_secondary_id(fields, &hash_tail(h))
}

/// Builds a secondary identifier from a caller-supplied hash tail.
///
/// Used where `H_w` is not available (the registry only ever sees the tail).
pub fn complete_secondary_id(
    fields: SecondaryFields,
    tail: &str,
) -> Result<SecondaryIdentifier, IdentityError> {
    fields.validate()?;
    check_field("hash_tail", tail, 4, is_upper_alnum)?;
    let checksum = checksum(&fields, tail);
    Ok(SecondaryIdentifier {
        fields,
        hash_tail: tail.to_owned(),
        checksum,
    })
}

#[derive(Clone, Copy)]
enum Class {
    Upper,
    Alnum,
    Digit,
    Hyphen,
}

// position classes of the 34-character grammar
const GRAMMAR: [Class; SECONDARY_ID_LEN] = {
    use Class::*;
    [
        Upper, Upper, Hyphen, // CC-
        Alnum, Alnum, Alnum, Alnum, Alnum, Alnum, Alnum, Alnum, Hyphen, // OOOOOOOO-
        Alnum, Alnum, Alnum, Alnum, Alnum, Hyphen, // FFFVV-
        Digit, Digit, Digit, Digit, Digit, Digit, Digit, Digit, Hyphen, // YYYYMMDD-
        Alnum, Alnum, Alnum, Alnum, Hyphen, // TTTT-
        Alnum, Alnum, // KK
    ]
};

/// Parses the rendered form. With `verify_checksum`, the checksum is
/// recomputed and compared.
pub fn parse_secondary_id(
    text: &str,
    verify_checksum: bool,
) -> Result<SecondaryIdentifier, IdentityError> {
    let bytes = text.as_bytes();
    for (i, class) in GRAMMAR.iter().enumerate() {
        let Some(&b) = bytes.get(i) else {
            return Err(IdentityError::Grammar {
                position: i,
                reason: "input too short",
            });
        };
        let (ok, reason) = match class {
            Class::Upper => (b.is_ascii_uppercase(), "expected A-Z"),
            Class::Alnum => (is_upper_alnum(&b), "expected A-Z or 0-9"),
            Class::Digit => (b.is_ascii_digit(), "expected 0-9"),
            Class::Hyphen => (b == b'-', "expected '-'"),
        };
        if !ok {
            return Err(IdentityError::Grammar { position: i, reason });
        }
    }
    if bytes.len() > SECONDARY_ID_LEN {
        return Err(IdentityError::Grammar {
            position: SECONDARY_ID_LEN,
            reason: "trailing characters",
        });
    }
    let date = &text[18..26];
    check_date(date).map_err(|_| IdentityError::Grammar {
        position: 18,
        reason: "not a calendar date",
    })?;
    let id = SecondaryIdentifier {
        fields: SecondaryFields::new(&text[0..2], &text[3..11], &text[12..15], &text[15..17], date),
        hash_tail: text[27..31].to_owned(),
        checksum: text[32..34].to_owned(),
    };
    if verify_checksum {
        let expected = id.expected_checksum();
        if expected != id.checksum {
            return Err(IdentityError::ChecksumMismatch {
                expected,
                found: id.checksum,
            });
        }
    }
    Ok(id)
}
