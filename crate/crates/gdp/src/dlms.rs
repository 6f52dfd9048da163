//! Encoding and decoding of meter readings to the fixed 49-byte APDU
//! data-buffer layout.
//!
//! Every reading is a DLMS structure of 8 elements, serialized with A-XDR
//! style type tags in front of each value:
//!
//! ```text
//! offset  bytes  content
//!      0      2  02 08            structure, 8 elements
//!      2      5  06 + u32 BE      log id
//!      7     14  09 0C + 12 B     timestamp (octet string, date-time)
//!     21      3  12 + u16 BE      log status bitmap
//!     24      5  06 + u32 BE      data quality bitmap
//!     29      5  06 + u32 BE      A14, active energy consumption (Wh)
//!     34      5  06 + u32 BE      A23, active energy generation (Wh)
//!     39      5  06 + u32 BE      R12, reactive energy, phases 1-2 (varh)
//!     44      5  06 + u32 BE      R34, reactive energy, phases 3-4 (varh)
//! ```
//!
//! The 12-byte timestamp is `[year-hi, year-lo, month, day, weekday, hour,
//! minute, second, hundredths, offset-hi, offset-lo, clock-status]`, all
//! multi-byte subfields big-endian.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use std::io;
use std::path::Path;
use thiserror::Error;

/// Encoded size of one reading, tags included.
pub const READING_LEN: usize = 49;

/// Byte ranges of the eight fields inside one encoded reading (tag included).
pub const FIELD_RANGES: [(&str, usize, usize); 8] = [
    ("log_id", 2, 7),
    ("timestamp", 7, 21),
    ("log_status", 21, 24),
    ("data_quality", 24, 29),
    ("a14", 29, 34),
    ("a23", 34, 39),
    ("r12", 39, 44),
    ("r34", 44, 49),
];

#[derive(Debug, Error)]
pub enum DlmsError {
    #[error("field {field} out of range: {value}")]
    FieldRange { field: &'static str, value: u64 },
    #[error("malformed buffer at offset {offset}: expected tag {expected:#04x}, found {found:#04x}")]
    MalformedBuffer {
        offset: usize,
        expected: u8,
        found: u8,
    },
    #[error("buffer length {found} is not {expected}")]
    BadLength { expected: usize, found: usize },
    #[error("APDU buffer length {0} is not a multiple of 49")]
    BadApduLength(usize),
    #[error("empty reading list")]
    EmptyReadingList,
    #[error("invalid timestamp: {0}")]
    InvalidTimestamp(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv field {field} in record {record}: {message}")]
    CsvField {
        record: usize,
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Calendar date-time with minute resolution plus DLMS clock metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timestamp {
    pub year: u16,
    pub month: u8,
    pub day: u8,
    /// 1 = Monday .. 7 = Sunday.
    pub weekday: u8,
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
    pub hundredths: u8,
    pub offset_minutes: i16,
    pub clock_status: u8,
}

impl Timestamp {
    pub fn from_naive(dt: NaiveDateTime, offset_minutes: i16, clock_status: u8) -> Self {
        Self {
            year: dt.year() as u16,
            month: dt.month() as u8,
            day: dt.day() as u8,
            weekday: dt.weekday().number_from_monday() as u8,
            hour: dt.hour() as u8,
            minute: dt.minute() as u8,
            second: dt.second() as u8,
            hundredths: 0,
            offset_minutes,
            clock_status,
        }
    }

    pub fn to_naive(&self) -> Result<NaiveDateTime, DlmsError> {
        let date = NaiveDate::from_ymd_opt(self.year as i32, self.month as u32, self.day as u32)
            .ok_or_else(|| invalid_timestamp(self))?;
        date.and_hms_opt(self.hour as u32, self.minute as u32, self.second as u32)
            .ok_or_else(|| invalid_timestamp(self))
    }

    /// Timestamp advanced by `minutes`, weekday recomputed.
    pub fn plus_minutes(&self, minutes: i64) -> Result<Timestamp, DlmsError> {
        let dt = self.to_naive()? + chrono::Duration::minutes(minutes);
        let mut t = Timestamp::from_naive(dt, self.offset_minutes, self.clock_status);
        t.hundredths = self.hundredths;
        Ok(t)
    }

    fn validate(&self) -> Result<(), DlmsError> {
        let checks: [(&'static str, u64, u64, u64); 5] = [
            ("month", self.month as u64, 1, 12),
            ("day", self.day as u64, 1, 31),
            ("hour", self.hour as u64, 0, 23),
            ("minute", self.minute as u64, 0, 59),
            ("second", self.second as u64, 0, 59),
        ];
        for (field, value, lo, hi) in checks {
            if value < lo || value > hi {
                return Err(DlmsError::FieldRange { field, value });
            }
        }
        Ok(())
    }
}

fn invalid_timestamp(t: &Timestamp) -> DlmsError {
    DlmsError::InvalidTimestamp(format!(
        "{:04}-{:02}-{:02} {:02}:{:02}:{:02}",
        t.year, t.month, t.day, t.hour, t.minute, t.second
    ))
}

/// One meter measurement, the contents of a single Load Profile row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reading {
    pub log_id: u32,
    pub timestamp: Timestamp,
    pub log_status: u16,
    pub data_quality: u32,
    /// Active energy consumption, Wh.
    pub a14: u32,
    /// Active energy generation, Wh.
    pub a23: u32,
    /// Reactive energy consumption, phases 1-2, varh.
    pub r12: u32,
    /// Reactive energy consumption, phases 3-4, varh.
    pub r34: u32,
}

/// Encodes one reading into its 49-byte layout.
pub fn encode_reading(r: &Reading) -> Result<[u8; READING_LEN], DlmsError> {
    r.timestamp.validate()?;
    let mut out = [0u8; READING_LEN];
    out[0] = 0x02;
    out[1] = 0x08;
    out[2] = 0x06;
    out[3..7].copy_from_slice(&r.log_id.to_be_bytes());
    out[7] = 0x09;
    out[8] = 0x0c;
    let t = &r.timestamp;
    out[9..11].copy_from_slice(&t.year.to_be_bytes());
    out[11] = t.month;
    out[12] = t.day;
    out[13] = t.weekday;
    out[14] = t.hour;
    out[15] = t.minute;
    out[16] = t.second;
    out[17] = t.hundredths;
    out[18..20].copy_from_slice(&t.offset_minutes.to_be_bytes());
    out[20] = t.clock_status;
    out[21] = 0x12;
    out[22..24].copy_from_slice(&r.log_status.to_be_bytes());
    out[24] = 0x06;
    out[25..29].copy_from_slice(&r.data_quality.to_be_bytes());
    out[29] = 0x06;
    out[30..34].copy_from_slice(&r.a14.to_be_bytes());
    out[34] = 0x06;
    out[35..39].copy_from_slice(&r.a23.to_be_bytes());
    out[39] = 0x06;
    out[40..44].copy_from_slice(&r.r12.to_be_bytes());
    out[44] = 0x06;
    out[45..49].copy_from_slice(&r.r34.to_be_bytes());
    Ok(out)
}

/// Tag bytes expected at fixed offsets of every encoded reading.
pub const TAG_OFFSETS: [(usize, u8); 11] = [
    (0, 0x02),
    (1, 0x08),
    (2, 0x06),
    (7, 0x09),
    (8, 0x0c),
    (21, 0x12),
    (24, 0x06),
    (29, 0x06),
    (34, 0x06),
    (39, 0x06),
    (44, 0x06),
];

/// Decodes one 49-byte reading, checking every tag byte.
pub fn decode_reading(b: &[u8]) -> Result<Reading, DlmsError> {
    if b.len() != READING_LEN {
        return Err(DlmsError::BadLength {
            expected: READING_LEN,
            found: b.len(),
        });
    }
    for (offset, expected) in TAG_OFFSETS {
        if b[offset] != expected {
            return Err(DlmsError::MalformedBuffer {
                offset,
                expected,
                found: b[offset],
            });
        }
    }
    let u32_at = |i: usize| u32::from_be_bytes(b[i..i + 4].try_into().unwrap());
    Ok(Reading {
        log_id: u32_at(3),
        timestamp: Timestamp {
            year: u16::from_be_bytes([b[9], b[10]]),
            month: b[11],
            day: b[12],
            weekday: b[13],
            hour: b[14],
            minute: b[15],
            second: b[16],
            hundredths: b[17],
            offset_minutes: i16::from_be_bytes([b[18], b[19]]),
            clock_status: b[20],
        },
        log_status: u16::from_be_bytes([b[22], b[23]]),
        data_quality: u32_at(25),
        a14: u32_at(30),
        a23: u32_at(35),
        r12: u32_at(40),
        r34: u32_at(45),
    })
}

/// The data-buffer region of one APDU: concatenated encoded readings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApduDataBuffer {
    pub bytes: Vec<u8>,
    pub reading_count: usize,
}

/// Encodes a non-empty reading list into one APDU data buffer.
pub fn encode_apdu(readings: &[Reading]) -> Result<ApduDataBuffer, DlmsError> {
    if readings.is_empty() {
        return Err(DlmsError::EmptyReadingList);
    }
    let mut bytes = Vec::with_capacity(readings.len() * READING_LEN);
    for r in readings {
        bytes.extend_from_slice(&encode_reading(r)?);
    }
    Ok(ApduDataBuffer {
        bytes,
        reading_count: readings.len(),
    })
}

pub fn decode_apdu(bytes: &[u8]) -> Result<Vec<Reading>, DlmsError> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(READING_LEN) {
        return Err(DlmsError::BadApduLength(bytes.len()));
    }
    bytes.chunks_exact(READING_LEN).map(decode_reading).collect()
}

pub const CSV_HEADER: [&str; 8] = [
    "log_id",
    "timestamp_iso8601",
    "log_status",
    "data_quality",
    "a14",
    "a23",
    "r12",
    "r34",
];

fn format_offset(offset_minutes: i16) -> String {
    let sign = if offset_minutes < 0 { '-' } else { '+' };
    let abs = offset_minutes.unsigned_abs();
    format!("{}{:02}:{:02}", sign, abs / 60, abs % 60)
}

fn timestamp_to_iso(t: &Timestamp) -> String {
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}{}",
        t.year,
        t.month,
        t.day,
        t.hour,
        t.minute,
        t.second,
        format_offset(t.offset_minutes)
    )
}

fn timestamp_from_iso(s: &str) -> Option<Timestamp> {
    let dt = chrono::DateTime::parse_from_rfc3339(s).ok()?;
    Some(Timestamp::from_naive(
        dt.naive_local(),
        (dt.offset().local_minus_utc() / 60) as i16,
        0,
    ))
}

/// Writes readings in the CSV interchange format.
pub fn write_readings_csv<W: io::Write>(w: W, readings: &[Reading]) -> Result<(), DlmsError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in readings {
        wtr.write_record([
            r.log_id.to_string(),
            timestamp_to_iso(&r.timestamp),
            r.log_status.to_string(),
            r.data_quality.to_string(),
            r.a14.to_string(),
            r.a23.to_string(),
            r.r12.to_string(),
            r.r34.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the CSV interchange format. Hundredths and clock status are not
/// carried by the CSV and come back as zero.
pub fn read_readings_csv<R: io::Read>(r: R) -> Result<Vec<Reading>, DlmsError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |idx: usize, name: &'static str| -> Result<&str, DlmsError> {
            record.get(idx).ok_or(DlmsError::CsvField {
                record: i,
                field: name,
                message: "missing".into(),
            })
        };
        let parse_num = |idx: usize, name: &'static str| -> Result<u64, DlmsError> {
            field(idx, name)?
                .trim()
                .parse()
                .map_err(|e| DlmsError::CsvField {
                    record: i,
                    field: name,
                    message: format!("{e}"),
                })
        };
        let ts = timestamp_from_iso(field(1, "timestamp_iso8601")?.trim()).ok_or(
            DlmsError::CsvField {
                record: i,
                field: "timestamp_iso8601",
                message: "not an ISO-8601 date-time with offset".into(),
            },
        )?;
        out.push(Reading {
            log_id: parse_num(0, "log_id")? as u32,
            timestamp: ts,
            log_status: parse_num(2, "log_status")? as u16,
            data_quality: parse_num(3, "data_quality")? as u32,
            a14: parse_num(4, "a14")? as u32,
            a23: parse_num(5, "a23")? as u32,
            r12: parse_num(6, "r12")? as u32,
            r34: parse_num(7, "r34")? as u32,
        });
    }
    Ok(out)
}

pub fn read_readings_csv_path(path: &Path) -> Result<Vec<Reading>, DlmsError> {
    read_readings_csv(std::fs::File::open(path)?)
}

pub fn write_readings_csv_path(path: &Path, readings: &[Reading]) -> Result<(), DlmsError> {
    write_readings_csv(std::fs::File::create(path)?, readings)
}
