//! The comparison compressors: Null Data, Delta Array and a general-purpose
//! statistical byte-stream compressor. All three work on one APDU at a time
//! and keep no state across APDUs.

use crate::dlms::{decode_reading, encode_reading, DlmsError, Reading, FIELD_RANGES, READING_LEN};
use flate2::read::{DeflateDecoder, DeflateEncoder};
use flate2::Compression;
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    NullData,
    DeltaArray,
    Statistical,
    Uncompressed,
}

impl BaselineKind {
    pub fn parse(s: &str) -> Option<BaselineKind> {
        match s {
            "null" => Some(BaselineKind::NullData),
            "delta" => Some(BaselineKind::DeltaArray),
            "stat" => Some(BaselineKind::Statistical),
            "uncompressed" => Some(BaselineKind::Uncompressed),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::NullData => "null",
            BaselineKind::DeltaArray => "delta",
            BaselineKind::Statistical => "stat",
            BaselineKind::Uncompressed => "uncompressed",
        }
    }
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty reading list")]
    EmptyReadingList,
    #[error("period must be positive")]
    BadPeriod,
    #[error(transparent)]
    Dlms(#[from] DlmsError),
    #[error("malformed compressed buffer at offset {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("delta {delta} for field {field} does not fit a 32-bit signed value")]
    DeltaOverflow { field: &'static str, delta: i64 },
}

const NULL_TAG: u8 = 0x00;
const DELTA_I8_TAG: u8 = 0x0f;
const DELTA_I16_TAG: u8 = 0x10;
const DELTA_I32_TAG: u8 = 0x05;

/// Fields whose next value is predictable: log id advances by one, the
/// timestamp by the Load Profile period. All other fields predict "same as
/// before".
fn predicted(prev: &Reading, period_minutes: u32) -> Result<Reading, DlmsError> {
    let mut p = *prev;
    p.log_id = prev.log_id.wrapping_add(1);
    p.timestamp = prev.timestamp.plus_minutes(period_minutes as i64)?;
    Ok(p)
}

/// Null Data: the first reading is encoded in full; in later readings every
/// field equal to its predicted value collapses to a single NULL byte.
pub fn null_compress(readings: &[Reading], period_minutes: u32) -> Result<Vec<u8>, BaselineError> {
    if readings.is_empty() {
        return Err(BaselineError::EmptyReadingList);
    }
    if period_minutes == 0 {
        return Err(BaselineError::BadPeriod);
    }
    let mut out = Vec::new();
    out.extend_from_slice(&encode_reading(&readings[0])?);
    for pair in readings.windows(2) {
        let enc = encode_reading(&pair[1])?;
        let pred_enc = encode_reading(&predicted(&pair[0], period_minutes)?)?;
        out.push(0x02);
        out.push(0x08);
        for (_, start, end) in FIELD_RANGES {
            if enc[start..end] == pred_enc[start..end] {
                out.push(NULL_TAG);
            } else {
                out.extend_from_slice(&enc[start..end]);
            }
        }
    }
    Ok(out)
}

fn expect_byte(buf: &[u8], pos: usize, value: u8, what: &str) -> Result<(), BaselineError> {
    match buf.get(pos) {
        Some(&b) if b == value => Ok(()),
        Some(&b) => Err(BaselineError::Malformed {
            offset: pos,
            message: format!("expected {what} byte {value:#04x}, found {b:#04x}"),
        }),
        None => Err(BaselineError::Malformed {
            offset: pos,
            message: format!("truncated, expected {what}"),
        }),
    }
}

fn take(buf: &[u8], pos: usize, n: usize) -> Result<&[u8], BaselineError> {
    buf.get(pos..pos + n).ok_or(BaselineError::Malformed {
        offset: pos,
        message: "truncated".into(),
    })
}

pub fn null_decompress(buf: &[u8], period_minutes: u32) -> Result<Vec<Reading>, BaselineError> {
    if period_minutes == 0 {
        return Err(BaselineError::BadPeriod);
    }
    let first = decode_reading(take(buf, 0, READING_LEN)?)?;
    let mut readings = vec![first];
    let mut pos = READING_LEN;
    while pos < buf.len() {
        expect_byte(buf, pos, 0x02, "structure")?;
        expect_byte(buf, pos + 1, 0x08, "structure")?;
        pos += 2;
        let prev = *readings.last().unwrap();
        let pred_enc = encode_reading(&predicted(&prev, period_minutes)?)?;
        let mut enc = [0u8; READING_LEN];
        enc[0] = 0x02;
        enc[1] = 0x08;
        for (_, start, end) in FIELD_RANGES {
            if buf.get(pos) == Some(&NULL_TAG) {
                enc[start..end].copy_from_slice(&pred_enc[start..end]);
                pos += 1;
            } else {
                enc[start..end].copy_from_slice(take(buf, pos, end - start)?);
                pos += end - start;
            }
        }
        readings.push(decode_reading(&enc)?);
    }
    Ok(readings)
}

/// The five counter fields that Delta Array encodes as differences.
const COUNTER_FIELDS: [&str; 5] = ["log_id", "a14", "a23", "r12", "r34"];

fn is_counter(name: &str) -> bool {
    COUNTER_FIELDS.contains(&name)
}

fn counter_value(enc: &[u8], start: usize) -> i64 {
    u32::from_be_bytes(enc[start + 1..start + 5].try_into().unwrap()) as i64
}

/// Delta Array: counters are encoded as signed deltas on the smallest of
/// 1/2/4 bytes; the remaining fields follow the Null rule. Deltas outside
/// the 32-bit range fall back to the full tagged value.
pub fn delta_compress(readings: &[Reading], period_minutes: u32) -> Result<Vec<u8>, BaselineError> {
    if readings.is_empty() {
        return Err(BaselineError::EmptyReadingList);
    }
    if period_minutes == 0 {
        return Err(BaselineError::BadPeriod);
    }
    let mut out = Vec::new();
    out.extend_from_slice(&encode_reading(&readings[0])?);
    for pair in readings.windows(2) {
        let prev_enc = encode_reading(&pair[0])?;
        let enc = encode_reading(&pair[1])?;
        let pred_enc = encode_reading(&predicted(&pair[0], period_minutes)?)?;
        out.push(0x02);
        out.push(0x08);
        for (name, start, end) in FIELD_RANGES {
            if is_counter(name) {
                let delta = counter_value(&enc, start) - counter_value(&prev_enc, start);
                if let Ok(d) = i8::try_from(delta) {
                    out.push(DELTA_I8_TAG);
                    out.push(d as u8);
                } else if let Ok(d) = i16::try_from(delta) {
                    out.push(DELTA_I16_TAG);
                    out.extend_from_slice(&d.to_be_bytes());
                } else if let Ok(d) = i32::try_from(delta) {
                    out.push(DELTA_I32_TAG);
                    out.extend_from_slice(&d.to_be_bytes());
                } else {
                    out.extend_from_slice(&enc[start..end]);
                }
            } else if enc[start..end] == pred_enc[start..end] {
                out.push(NULL_TAG);
            } else {
                out.extend_from_slice(&enc[start..end]);
            }
        }
    }
    Ok(out)
}

pub fn delta_decompress(buf: &[u8], period_minutes: u32) -> Result<Vec<Reading>, BaselineError> {
    if period_minutes == 0 {
        return Err(BaselineError::BadPeriod);
    }
    let first = decode_reading(take(buf, 0, READING_LEN)?)?;
    let mut readings = vec![first];
    let mut pos = READING_LEN;
    while pos < buf.len() {
        expect_byte(buf, pos, 0x02, "structure")?;
        expect_byte(buf, pos + 1, 0x08, "structure")?;
        pos += 2;
        let prev = *readings.last().unwrap();
        let prev_enc = encode_reading(&prev)?;
        let pred_enc = encode_reading(&predicted(&prev, period_minutes)?)?;
        let mut enc = [0u8; READING_LEN];
        enc[0] = 0x02;
        enc[1] = 0x08;
        for (name, start, end) in FIELD_RANGES {
            if is_counter(name) {
                let tag = *take(buf, pos, 1)?.first().unwrap();
                let delta = match tag {
                    DELTA_I8_TAG => {
                        let d = take(buf, pos + 1, 1)?[0] as i8 as i64;
                        pos += 2;
                        Some(d)
                    }
                    DELTA_I16_TAG => {
                        let d = i16::from_be_bytes(take(buf, pos + 1, 2)?.try_into().unwrap()) as i64;
                        pos += 3;
                        Some(d)
                    }
                    DELTA_I32_TAG => {
                        let d = i32::from_be_bytes(take(buf, pos + 1, 4)?.try_into().unwrap()) as i64;
                        pos += 5;
                        Some(d)
                    }
                    0x06 => None,
                    other => {
                        return Err(BaselineError::Malformed {
                            offset: pos,
                            message: format!("unexpected counter tag {other:#04x}"),
                        })
                    }
                };
                match delta {
                    Some(d) => {
                        let value = (counter_value(&prev_enc, start) + d) as u32;
                        enc[start] = 0x06;
                        enc[start + 1..end].copy_from_slice(&value.to_be_bytes());
                    }
                    None => {
                        enc[start..end].copy_from_slice(take(buf, pos, end - start)?);
                        pos += end - start;
                    }
                }
            } else if buf.get(pos) == Some(&NULL_TAG) {
                enc[start..end].copy_from_slice(&pred_enc[start..end]);
                pos += 1;
            } else {
                enc[start..end].copy_from_slice(take(buf, pos, end - start)?);
                pos += end - start;
            }
        }
        readings.push(decode_reading(&enc)?);
    }
    Ok(readings)
}

/// Raw-DEFLATE byte-stream compression of a whole APDU buffer, no
/// structural knowledge. The level is the frozen statistical-baseline
/// parameter from the repo config.
pub fn stat_compress(buf: &[u8], level: u32) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(buf, Compression::new(level));
    let mut out = Vec::new();
    enc.read_to_end(&mut out).expect("in-memory deflate");
    out
}

pub fn stat_decompress(buf: &[u8]) -> Result<Vec<u8>, BaselineError> {
    let mut dec = DeflateDecoder::new(buf);
    let mut out = Vec::new();
    dec.read_to_end(&mut out).map_err(|e| BaselineError::Malformed {
        offset: 0,
        message: format!("deflate: {e}"),
    })?;
    Ok(out)
}
