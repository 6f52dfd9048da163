//! Stateful stream compressor and decompressor.
//!
//! The compressor keeps one ordered array of unique bases per basis
//! byte-length (a "class"). A compressed APDU carries three sections:
//!
//! * Section A — per class, ascending basis length: a u16 BE count of bases
//!   new in this APDU followed by the bases themselves in first-occurrence
//!   order. Every class named by the pattern carries a count, even when 0.
//! * Section B — the base reconstruction list: per chunk in plan order, the
//!   basis index packed MSB-first on `w` bits, where
//!   `w = max(1, ceil(log2(N)))` and `N` is the class size after Section A
//!   ingestion. Zero-padded to a byte boundary.
//! * Section C — deviations concatenated in plan order.
//!
//! Class arrays only grow and keep insertion order, so compressing a fixed
//! reading stream yields the same final state regardless of how the stream
//! was cut into APDUs.

use crate::bits::{BitReader, BitWriter};
use crate::pattern::{plan_chunks, Pattern, PatternError, Token};
use crate::transform::{merge_chunk, split_chunk, BasisDeviationPair, TransformError};
use std::collections::{BTreeMap, HashMap};
use std::io::{self, Read, Write};
use thiserror::Error;

pub const CONTAINER_MAGIC: [u8; 4] = *b"GDPC";
pub const STATE_MAGIC: [u8; 4] = *b"GDPS";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("corrupt stream: basis index {index} out of range for {class_len}-byte class of size {class_size}")]
    IndexOutOfRange {
        class_len: usize,
        index: u64,
        class_size: usize,
    },
    #[error("corrupt stream: truncated {section}")]
    Truncated { section: &'static str },
    #[error("corrupt stream: basis resent for {class_len}-byte class")]
    DuplicateBasis { class_len: usize },
    #[error("corrupt stream: payload length {remaining} after new bases matches no whole number of body repetitions")]
    NoBodyCount { remaining: usize },
    #[error("corrupt stream: payload length matches several body repetition counts")]
    AmbiguousBodyCount,
    #[error("too many new bases in one APDU for {class_len}-byte class: {count}")]
    TooManyNewBases { class_len: usize, count: usize },
    #[error("bad magic, not a {expected} file")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("pattern mismatch: state has `{state}`, expected `{expected}`")]
    PatternMismatch { state: String, expected: String },
    #[error("corrupt frame {index}: {message}")]
    CorruptFrame { index: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default)]
struct BasisClass {
    bases: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, u32>,
}

impl BasisClass {
    fn insert_new(&mut self, basis: Vec<u8>) -> u32 {
        let idx = self.bases.len() as u32;
        self.lookup.insert(basis.clone(), idx);
        self.bases.push(basis);
        idx
    }
}

/// Per-stream compressor (and decompressor) state: the pattern plus the
/// unique-basis array of every class the pattern can produce.
#[derive(Debug, Clone)]
pub struct CompressorState {
    pattern: Pattern,
    classes: BTreeMap<usize, BasisClass>,
}

impl PartialEq for CompressorState {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern
            && self.classes.len() == other.classes.len()
            && self
                .classes
                .iter()
                .zip(&other.classes)
                .all(|((la, ca), (lb, cb))| la == lb && ca.bases == cb.bases)
    }
}

impl Eq for CompressorState {}

impl CompressorState {
    pub fn new(pattern: Pattern) -> Self {
        let classes = pattern
            .class_lens()
            .into_iter()
            .map(|len| (len, BasisClass::default()))
            .collect();
        Self { pattern, classes }
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    /// (basis length, stored basis count) per class, ascending length.
    pub fn class_sizes(&self) -> Vec<(usize, usize)> {
        self.classes.iter().map(|(&l, c)| (l, c.bases.len())).collect()
    }

    pub fn total_bases(&self) -> usize {
        self.classes.values().map(|c| c.bases.len()).sum()
    }

    /// Size of the persisted state:
    /// `8 + len(pattern string) + sum over classes of (6 + count * length)`.
    /// Always equal to `save_state(self).len()`.
    pub fn state_size_bytes(&self) -> usize {
        8 + self.pattern.canonical().len()
            + self
                .classes
                .iter()
                .map(|(&l, c)| 6 + c.bases.len() * l)
                .sum::<usize>()
    }
}

/// Minimal index width for a class of `n` bases.
fn index_width(n: usize) -> u32 {
    if n <= 2 {
        1
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// One compressed APDU, split into its three wire sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedApdu {
    pub new_basis_block: Vec<u8>,
    pub reconstruction_list: Vec<u8>,
    pub deviation_block: Vec<u8>,
}

impl CompressedApdu {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(self.new_basis_block.len() + self.reconstruction_list.len() + self.deviation_block.len());
        out.extend_from_slice(&self.new_basis_block);
        out.extend_from_slice(&self.reconstruction_list);
        out.extend_from_slice(&self.deviation_block);
        out
    }

    pub fn len(&self) -> usize {
        self.new_basis_block.len() + self.reconstruction_list.len() + self.deviation_block.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Compresses one APDU buffer, updating the state in place. The pattern's
/// prefix (when present) is consumed at the head of every APDU.
pub fn compress_apdu(state: &mut CompressorState, buf: &[u8]) -> Result<CompressedApdu, StreamError> {
    let include_prefix = !state.pattern.prefix.is_empty();
    let plan = plan_chunks(&state.pattern, buf.len(), include_prefix)?;

    let mut new_per_class: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut chunk_refs: Vec<(usize, u32)> = Vec::with_capacity(plan.chunks.len());
    let mut deviation_block = Vec::new();
    for chunk in &plan.chunks {
        let end = chunk.offset + chunk.token.chunk_len();
        let pair = split_chunk(&chunk.token, &buf[chunk.offset..end])?;
        let class_len = pair.basis.len();
        let class = state
            .classes
            .get_mut(&class_len)
            .expect("pattern-derived class exists");
        let idx = match class.lookup.get(&pair.basis) {
            Some(&i) => i,
            None => {
                let i = class.insert_new(pair.basis);
                new_per_class.entry(class_len).or_default().push(i);
                i
            }
        };
        chunk_refs.push((class_len, idx));
        deviation_block.extend_from_slice(&pair.deviation);
    }

    // Section A: every present class, ascending length, count first.
    let mut new_basis_block = Vec::new();
    for (&class_len, class) in &state.classes {
        let new_ids = new_per_class.get(&class_len).map(Vec::as_slice).unwrap_or(&[]);
        let count = new_ids.len();
        if count > u16::MAX as usize {
            return Err(StreamError::TooManyNewBases { class_len, count });
        }
        new_basis_block.extend_from_slice(&(count as u16).to_be_bytes());
        for &i in new_ids {
            new_basis_block.extend_from_slice(&class.bases[i as usize]);
        }
    }

    // Section B: widths from the class sizes after ingestion.
    let mut bits = BitWriter::new();
    for &(class_len, idx) in &chunk_refs {
        let n = state.classes[&class_len].bases.len();
        bits.write_bits(idx as u64, index_width(n));
    }
    let reconstruction_list = bits.finish();

    Ok(CompressedApdu {
        new_basis_block,
        reconstruction_list,
        deviation_block,
    })
}

pub fn compress_apdu_bytes(state: &mut CompressorState, buf: &[u8]) -> Result<Vec<u8>, StreamError> {
    compress_apdu(state, buf).map(|c| c.to_bytes())
}

/// Section B/C cost in bits and bytes of one run of `tokens`, given the
/// per-class index widths.
fn token_costs(tokens: &[Token], widths: &BTreeMap<usize, u32>) -> (usize, usize) {
    let mut bits = 0usize;
    let mut dev_bytes = 0usize;
    for t in tokens {
        bits += widths[&t.basis_len()] as usize;
        dev_bytes += t.deviation_len();
    }
    (bits, dev_bytes)
}

/// Decompresses one APDU payload against the mirrored state, updating it in
/// place. Returns the original buffer bytes.
pub fn decompress_apdu(state: &mut CompressorState, payload: &[u8]) -> Result<Vec<u8>, StreamError> {
    // Section A
    let mut pos = 0usize;
    for (&class_len, class) in state.classes.iter_mut() {
        let count_bytes = payload
            .get(pos..pos + 2)
            .ok_or(StreamError::Truncated { section: "new-basis block" })?;
        let count = u16::from_be_bytes(count_bytes.try_into().unwrap()) as usize;
        pos += 2;
        for _ in 0..count {
            let basis = payload
                .get(pos..pos + class_len)
                .ok_or(StreamError::Truncated { section: "new-basis block" })?
                .to_vec();
            pos += class_len;
            if class.lookup.contains_key(&basis) {
                return Err(StreamError::DuplicateBasis { class_len });
            }
            class.insert_new(basis);
        }
    }

    let widths: BTreeMap<usize, u32> = state
        .classes
        .iter()
        .map(|(&l, c)| (l, index_width(c.bases.len())))
        .collect();

    // The payload does not carry the original length; recover the body
    // repetition count from the remaining byte count.
    let remaining = payload.len() - pos;
    let prefix_tokens: &[Token] = if state.pattern.prefix.is_empty() {
        &[]
    } else {
        &state.pattern.prefix
    };
    let (prefix_bits, prefix_dev) = token_costs(prefix_tokens, &widths);
    let (body_bits, body_dev) = token_costs(&state.pattern.body, &widths);
    let total_for = |m: usize| (prefix_bits + m * body_bits).div_ceil(8) + prefix_dev + m * body_dev;
    let mut matches = Vec::new();
    let mut m = 1usize;
    while total_for(m) <= remaining {
        if total_for(m) == remaining {
            matches.push(m);
        }
        m += 1;
    }
    let reps = match matches.as_slice() {
        [] => return Err(StreamError::NoBodyCount { remaining }),
        [m] => *m,
        _ => return Err(StreamError::AmbiguousBodyCount),
    };

    let chunk_tokens: Vec<Token> = prefix_tokens
        .iter()
        .chain(state.pattern.body.iter().cycle().take(reps * state.pattern.body.len()))
        .copied()
        .collect();

    let b_len = (prefix_bits + reps * body_bits).div_ceil(8);
    let b_section = payload
        .get(pos..pos + b_len)
        .ok_or(StreamError::Truncated { section: "reconstruction list" })?;
    let mut bits = BitReader::new(b_section);
    let mut c_pos = pos + b_len;

    let mut out = Vec::new();
    for token in &chunk_tokens {
        let class_len = token.basis_len();
        let class = &state.classes[&class_len];
        let idx = bits
            .read_bits(widths[&class_len])
            .ok_or(StreamError::Truncated { section: "reconstruction list" })?;
        let basis = class
            .bases
            .get(idx as usize)
            .ok_or(StreamError::IndexOutOfRange {
                class_len,
                index: idx,
                class_size: class.bases.len(),
            })?
            .clone();
        let k = token.deviation_len();
        let deviation = payload
            .get(c_pos..c_pos + k)
            .ok_or(StreamError::Truncated { section: "deviation block" })?
            .to_vec();
        c_pos += k;
        out.extend_from_slice(&merge_chunk(token, &BasisDeviationPair { basis, deviation })?);
    }
    if c_pos != payload.len() {
        return Err(StreamError::Truncated { section: "deviation block" });
    }
    Ok(out)
}

/// Serializes a state: magic, version, canonical pattern string, then every
/// pattern-derived class (ascending basis length) with its basis array.
pub fn save_state(state: &CompressorState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&STATE_MAGIC);
    out.push(FORMAT_VERSION);
    let pat = state.pattern.canonical();
    out.extend_from_slice(&(pat.len() as u16).to_be_bytes());
    out.extend_from_slice(pat.as_bytes());
    out.push(state.classes.len() as u8);
    for (&len, class) in &state.classes {
        out.extend_from_slice(&(len as u16).to_be_bytes());
        out.extend_from_slice(&(class.bases.len() as u32).to_be_bytes());
        for b in &class.bases {
            out.extend_from_slice(b);
        }
    }
    out
}

pub fn load_state(bytes: &[u8]) -> Result<CompressorState, StreamError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], StreamError> {
        let s = bytes
            .get(*pos..*pos + n)
            .ok_or(StreamError::Truncated { section: "state file" })?;
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != STATE_MAGIC {
        return Err(StreamError::BadMagic { expected: "GDPS" });
    }
    let version = take(&mut pos, 1)?[0];
    if version != FORMAT_VERSION {
        return Err(StreamError::BadVersion(version));
    }
    let pat_len = u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
    let pat_str = std::str::from_utf8(take(&mut pos, pat_len)?)
        .map_err(|_| StreamError::Truncated { section: "state pattern string" })?;
    let pattern: Pattern = pat_str.parse()?;
    let mut state = CompressorState::new(pattern);
    let class_count = take(&mut pos, 1)?[0] as usize;
    for _ in 0..class_count {
        let len = u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let count = u32::from_be_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let class = state.classes.entry(len).or_default();
        for _ in 0..count {
            let basis = take(&mut pos, len)?.to_vec();
            class.insert_new(basis);
        }
    }
    if pos != bytes.len() {
        return Err(StreamError::Truncated { section: "state file (trailing bytes)" });
    }
    Ok(state)
}

/// Writes the stream container header: magic, version, pattern string.
pub fn write_container_header<W: Write>(w: &mut W, pattern: &Pattern) -> Result<(), StreamError> {
    w.write_all(&CONTAINER_MAGIC)?;
    w.write_all(&[FORMAT_VERSION])?;
    let pat = pattern.canonical();
    w.write_all(&(pat.len() as u16).to_be_bytes())?;
    w.write_all(pat.as_bytes())?;
    Ok(())
}

/// Appends one length-framed compressed APDU to a container.
pub fn append_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<(), StreamError> {
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

/// Reads a whole container: the pattern and every frame payload.
pub fn read_container<R: Read>(r: &mut R) -> Result<(Pattern, Vec<Vec<u8>>), StreamError> {
    let mut header = [0u8; 5];
    r.read_exact(&mut header)
        .map_err(|_| StreamError::BadMagic { expected: "GDPC" })?;
    if header[..4] != CONTAINER_MAGIC {
        return Err(StreamError::BadMagic { expected: "GDPC" });
    }
    if header[4] != FORMAT_VERSION {
        return Err(StreamError::BadVersion(header[4]));
    }
    let mut len_buf = [0u8; 2];
    r.read_exact(&mut len_buf)
        .map_err(|e| StreamError::CorruptFrame { index: 0, message: format!("header: {e}") })?;
    let mut pat_bytes = vec![0u8; u16::from_be_bytes(len_buf) as usize];
    r.read_exact(&mut pat_bytes)
        .map_err(|e| StreamError::CorruptFrame { index: 0, message: format!("header: {e}") })?;
    let pattern: Pattern = std::str::from_utf8(&pat_bytes)
        .map_err(|e| StreamError::CorruptFrame { index: 0, message: format!("header: {e}") })?
        .parse()?;

    let mut frames = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => {
                return Err(StreamError::CorruptFrame {
                    index: frames.len(),
                    message: format!("{e}"),
                })
            }
        }
        let mut payload = vec![0u8; u32::from_be_bytes(len_buf) as usize];
        r.read_exact(&mut payload).map_err(|e| StreamError::CorruptFrame {
            index: frames.len(),
            message: format!("{e}"),
        })?;
        frames.push(payload);
    }
    Ok((pattern, frames))
}
