// SPDX-License-Identifier: Apache-2.0

//! Deterministic, bit-exact encoding of model parameters (the AIW1 format).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "AIW1" | format_version u16 | record_count u32 |
//!   for each record, sorted bytewise by name:
//!   name_len u16 | name | dtype u8 | rank u8 | dims u64 * rank | data_len u64 | data
//! ```
//!
//! Floating-point payloads are carried verbatim: NaN payloads and signed
//! zeros survive unchanged, so the encoding is a pure function of the bytes
//! a model actually ships.

use std::fmt;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"AIW1";
pub const FORMAT_VERSION: u16 = 1;
/// Byte length of the fixed stream header (magic, version, record count).
pub const HEADER_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum DType {
    F16 = 1,
    F32 = 2,
    F64 = 3,
    I8 = 4,
    I32 = 5,
    I64 = 6,
    U8 = 7,
    BF16 = 8,
}

impl DType {
    pub const ALL: [DType; 8] = [
        DType::F16,
        DType::F32,
        DType::F64,
        DType::I8,
        DType::I32,
        DType::I64,
        DType::U8,
        DType::BF16,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).wrapping_sub(1)).copied()
    }

    /// Size of one element in bytes.
    pub fn element_size(self) -> u64 {
        match self {
            DType::I8 | DType::U8 => 1,
            DType::F16 | DType::BF16 => 2,
            DType::F32 | DType::I32 => 4,
            DType::F64 | DType::I64 => 8,
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DType::F16 => "f16",
            DType::F32 => "f32",
            DType::F64 => "f64",
            DType::I8 => "i8",
            DType::I32 => "i32",
            DType::I64 => "i64",
            DType::U8 => "u8",
            DType::BF16 => "bf16",
        };
        f.write_str(s)
    }
}

/// One named tensor: dtype, shape and raw row-major little-endian bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorRecord {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<u64>,
    pub data: Vec<u8>,
}

impl TensorRecord {
    pub fn new(name: impl Into<String>, dtype: DType, shape: Vec<u64>, data: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            dtype,
            shape,
            data,
        }
    }

    /// Expected data length, or `None` if the shape overflows `u64`.
    pub fn expected_data_len(&self) -> Option<u64> {
        expected_len(self.dtype, &self.shape)
    }
}

fn expected_len(dtype: DType, shape: &[u64]) -> Option<u64> {
    shape
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(dtype.element_size()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightManifest {
    pub format_version: u16,
    pub records: Vec<TensorRecord>,
}

impl Default for WeightManifest {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            records: Vec::new(),
        }
    }
}

impl WeightManifest {
    pub fn new(records: Vec<TensorRecord>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            records,
        }
    }

    /// Builds a manifest from records in any order, sorting them by name.
    pub fn from_unsorted(mut records: Vec<TensorRecord>) -> Self {
        records.sort_by(|a, b| a.name.as_bytes().cmp(b.name.as_bytes()));
        Self::new(records)
    }

    pub fn validate(&self) -> Result<(), CanonicalError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CanonicalError::UnsupportedVersion {
                offset: 4,
                version: self.format_version,
            });
        }
        if u32::try_from(self.records.len()).is_err() {
            return Err(CanonicalError::TooManyRecords(self.records.len()));
        }
        for (i, rec) in self.records.iter().enumerate() {
            let name_len = rec.name.len();
            if name_len == 0 || name_len > usize::from(u16::MAX) {
                return Err(CanonicalError::NameLength {
                    record: i,
                    len: name_len,
                });
            }
            if rec.shape.len() > usize::from(u8::MAX) {
                return Err(CanonicalError::RankTooLarge {
                    record: i,
                    rank: rec.shape.len(),
                });
            }
            let expected = rec
                .expected_data_len()
                .ok_or(CanonicalError::ShapeOverflow { record: i })?;
            if expected != rec.data.len() as u64 {
                return Err(CanonicalError::DataLength {
                    record: i,
                    expected,
                    actual: rec.data.len() as u64,
                });
            }
            if i > 0 && self.records[i - 1].name.as_bytes() >= rec.name.as_bytes() {
                return Err(CanonicalError::NameOrder { record: i });
            }
        }
        Ok(())
    }
}

/// A validated AIW1 byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalWeightStream(Vec<u8>);

impl CanonicalWeightStream {
    /// Validates `bytes` as AIW1 and wraps them.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, ParseError> {
        parse(&bytes)?;
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[u8]> for CanonicalWeightStream {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonicalError {
    #[error("unsupported format version {version} at offset {offset}")]
    UnsupportedVersion { offset: usize, version: u16 },
    #[error("record {record}: name length {len} outside 1..=65535")]
    NameLength { record: usize, len: usize },
    #[error("record {record}: rank {rank} exceeds 255")]
    RankTooLarge { record: usize, rank: usize },
    #[error("record {record}: element count overflows")]
    ShapeOverflow { record: usize },
    #[error("record {record}: data length {actual} does not match shape ({expected})")]
    DataLength {
        record: usize,
        expected: u64,
        actual: u64,
    },
    #[error("record {record}: names not strictly increasing")]
    NameOrder { record: usize },
    #[error("{0} records exceed the u32 record count")]
    TooManyRecords(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated stream")]
    Truncated,
    #[error("trailing bytes after last record")]
    TrailingBytes,
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("empty tensor name")]
    EmptyName,
    #[error("tensor name is not valid UTF-8")]
    InvalidUtf8,
    #[error("tensor names out of order or duplicated")]
    NameOrder,
    #[error("data length {actual} does not match shape ({expected})")]
    DataLength { expected: u64, actual: u64 },
    #[error("element count overflows")]
    ShapeOverflow,
}

/// Parse failure, tagged with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(offset: usize, kind: ParseErrorKind) -> Self {
        Self { offset, kind }
    }
}

/// Serializes a manifest into its AIW1 stream.
pub fn serialize(manifest: &WeightManifest) -> Result<CanonicalWeightStream, CanonicalError> {
    manifest.validate()?;
    let body: usize = manifest
        .records
        .iter()
        .map(|r| 2 + r.name.len() + 2 + 8 * r.shape.len() + 8 + r.data.len())
        .sum();
    let mut out = Vec::with_capacity(HEADER_LEN + body);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&manifest.format_version.to_le_bytes());
    out.extend_from_slice(&(manifest.records.len() as u32).to_le_bytes());
    for rec in &manifest.records {
        out.extend_from_slice(&(rec.name.len() as u16).to_le_bytes());
        out.extend_from_slice(rec.name.as_bytes());
        out.push(rec.dtype.code());
        out.push(rec.shape.len() as u8);
        for dim in &rec.shape {
            out.extend_from_slice(&dim.to_le_bytes());
        }
        out.extend_from_slice(&(rec.data.len() as u64).to_le_bytes());
        out.extend_from_slice(&rec.data);
    }
    Ok(CanonicalWeightStream(out))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(ParseError::at(self.pos, ParseErrorKind::Truncated))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ParseError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ParseError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ParseError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ParseError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses an AIW1 stream. Accepts exactly the outputs of [`serialize`].
pub fn parse(bytes: &[u8]) -> Result<WeightManifest, ParseError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r
        .take(4)
        .map_err(|_| ParseError::at(0, ParseErrorKind::BadMagic))?;
    if magic != MAGIC {
        return Err(ParseError::at(0, ParseErrorKind::BadMagic));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(ParseError::at(4, ParseErrorKind::UnsupportedVersion(version)));
    }
    let count = r.u32()?;

    let mut records: Vec<TensorRecord> = Vec::new();
    for _ in 0..count {
        let name_off = r.pos;
        let name_len = usize::from(r.u16()?);
        if name_len == 0 {
            return Err(ParseError::at(name_off, ParseErrorKind::EmptyName));
        }
        let name_bytes = r.take(name_len)?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| ParseError::at(name_off + 2, ParseErrorKind::InvalidUtf8))?;
        if let Some(prev) = records.last() {
            if prev.name.as_bytes() >= name_bytes {
                return Err(ParseError::at(name_off, ParseErrorKind::NameOrder));
            }
        }
        let dtype_off = r.pos;
        let code = r.u8()?;
        let dtype = DType::from_code(code)
            .ok_or(ParseError::at(dtype_off, ParseErrorKind::UnknownDtype(code)))?;
        let rank = r.u8()?;
        let mut shape = Vec::with_capacity(usize::from(rank));
        for _ in 0..rank {
            shape.push(r.u64()?);
        }
        let len_off = r.pos;
        let data_len = r.u64()?;
        let expected = expected_len(dtype, &shape)
            .ok_or(ParseError::at(len_off, ParseErrorKind::ShapeOverflow))?;
        if data_len != expected {
            return Err(ParseError::at(
                len_off,
                ParseErrorKind::DataLength {
                    expected,
                    actual: data_len,
                },
            ));
        }
        let data_len = usize::try_from(data_len)
            .map_err(|_| ParseError::at(r.pos, ParseErrorKind::Truncated))?;
        let data = r.take(data_len)?.to_vec();
        records.push(TensorRecord {
            name: name.to_owned(),
            dtype,
            shape,
            data,
        });
    }
    if r.pos != bytes.len() {
        return Err(ParseError::at(r.pos, ParseErrorKind::TrailingBytes));
    }
    Ok(WeightManifest {
        format_version: version,
        records,
    })
}

/// Byte range of each record's data payload within a serialized stream.
///
/// Useful for perturbing tensor contents without breaking the framing.
pub fn data_ranges(manifest: &WeightManifest) -> Vec<std::ops::Range<usize>> {
    let mut pos = HEADER_LEN;
    manifest
        .records
        .iter()
        .map(|r| {
            pos += 2 + r.name.len() + 2 + 8 * r.shape.len() + 8;
            let range = pos..pos + r.data.len();
            pos = range.end;
            range
        })
        .collect()
}
