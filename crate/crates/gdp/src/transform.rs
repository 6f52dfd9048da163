//! Chunk transforms: LastByte split/merge and the Hamming-code transform.
//!
//! Both map a chunk to a (basis, deviation) pair and back without loss. For
//! LastByte the split is positional. For Hamming(p), the first 2^p - 1 bits
//! of the chunk are treated as a Hamming(2^p-1, 2^p-1-p) word: syndrome
//! decoding finds the nearest codeword, the parity-stripped data bits plus
//! the chunk's final spare bit become the basis, and the single corrected
//! bit position becomes the deviation byte (0 when the word already was a
//! codeword).

// codeword loops iterate 1-indexed bit positions, where indexing reads
// better than iterator adapters
#![allow(clippy::needless_range_loop)]

use crate::bits::{BitReader, BitWriter};
use crate::pattern::Token;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("chunk length {found} does not match transform chunk size {expected}")]
    ChunkLength { expected: usize, found: usize },
    #[error("basis length {found} does not match transform basis size {expected}")]
    BasisLength { expected: usize, found: usize },
    #[error("deviation length {found} does not match transform deviation size {expected}")]
    DeviationLength { expected: usize, found: usize },
    #[error("Hamming deviation value {value} out of range for p={parity_bits}")]
    DeviationValue { parity_bits: u32, value: u8 },
}

/// The split output of a chunk transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisDeviationPair {
    pub basis: Vec<u8>,
    pub deviation: Vec<u8>,
}

/// Splits an (n+k)-byte chunk: first n bytes are the basis, the trailing k
/// bytes the deviation.
pub fn lastbyte_split(chunk: &[u8], n: usize, k: usize) -> Result<BasisDeviationPair, TransformError> {
    if chunk.len() != n + k {
        return Err(TransformError::ChunkLength {
            expected: n + k,
            found: chunk.len(),
        });
    }
    Ok(BasisDeviationPair {
        basis: chunk[..n].to_vec(),
        deviation: chunk[n..].to_vec(),
    })
}

/// Glues basis and deviation back into the original chunk.
pub fn lastbyte_merge(pair: &BasisDeviationPair) -> Vec<u8> {
    let mut chunk = Vec::with_capacity(pair.basis.len() + pair.deviation.len());
    chunk.extend_from_slice(&pair.basis);
    chunk.extend_from_slice(&pair.deviation);
    chunk
}

/// (chunk bytes, codeword bits, basis bytes) of the Hamming transform with
/// `p` parity bits.
pub fn hamming_sizes(p: u32) -> (usize, usize, usize) {
    let chunk_bytes = 1usize << (p - 3);
    let codeword_bits = (1usize << p) - 1;
    // data bits + the spare bit past the codeword span, packed into bytes
    let basis_bytes = (codeword_bits - p as usize + 1).div_ceil(8);
    (chunk_bytes, codeword_bits, basis_bytes)
}

fn is_power_of_two(x: usize) -> bool {
    x & (x - 1) == 0
}

/// Transforms a 2^(p-3)-byte chunk with the Hamming(2^p-1, 2^p-1-p) code.
pub fn hamming_split(chunk: &[u8], p: u32) -> Result<BasisDeviationPair, TransformError> {
    let (chunk_bytes, codeword_bits, _) = hamming_sizes(p);
    if chunk.len() != chunk_bytes {
        return Err(TransformError::ChunkLength {
            expected: chunk_bytes,
            found: chunk.len(),
        });
    }
    let mut r = BitReader::new(chunk);
    // codeword positions are 1-indexed; chunk bit i maps to position i+1
    let mut word = vec![false; codeword_bits + 1];
    let mut syndrome = 0usize;
    for pos in 1..=codeword_bits {
        let bit = r.read_bit().unwrap();
        word[pos] = bit;
        if bit {
            syndrome ^= pos;
        }
    }
    let spare = r.read_bit().unwrap();
    if syndrome != 0 {
        // every word is within distance 1 of a codeword; correct it
        word[syndrome] = !word[syndrome];
    }
    let mut w = BitWriter::new();
    for pos in 1..=codeword_bits {
        if !is_power_of_two(pos) {
            w.write_bit(word[pos]);
        }
    }
    w.write_bit(spare);
    Ok(BasisDeviationPair {
        basis: w.finish(),
        deviation: vec![syndrome as u8],
    })
}

/// Inverse of [`hamming_split`]: re-derives parity bits, re-applies the
/// deviation-indicated bit flip and re-appends the spare bit.
pub fn hamming_merge(pair: &BasisDeviationPair, p: u32) -> Result<Vec<u8>, TransformError> {
    let (chunk_bytes, codeword_bits, basis_bytes) = hamming_sizes(p);
    if pair.basis.len() != basis_bytes {
        return Err(TransformError::BasisLength {
            expected: basis_bytes,
            found: pair.basis.len(),
        });
    }
    if pair.deviation.len() != 1 {
        return Err(TransformError::DeviationLength {
            expected: 1,
            found: pair.deviation.len(),
        });
    }
    let flip = pair.deviation[0] as usize;
    if flip > codeword_bits {
        return Err(TransformError::DeviationValue {
            parity_bits: p,
            value: pair.deviation[0],
        });
    }
    let mut r = BitReader::new(&pair.basis);
    let mut word = vec![false; codeword_bits + 1];
    for pos in 1..=codeword_bits {
        if !is_power_of_two(pos) {
            word[pos] = r.read_bit().unwrap();
        }
    }
    let spare = r.read_bit().unwrap();
    // parity bit at position 2^i covers every position with bit i set
    for i in 0..p {
        let parity_pos = 1usize << i;
        let mut parity = false;
        for pos in 1..=codeword_bits {
            if !is_power_of_two(pos) && pos & parity_pos != 0 && word[pos] {
                parity = !parity;
            }
        }
        word[parity_pos] = parity;
    }
    if flip != 0 {
        word[flip] = !word[flip];
    }
    let mut w = BitWriter::new();
    for pos in 1..=codeword_bits {
        w.write_bit(word[pos]);
    }
    w.write_bit(spare);
    let chunk = w.finish();
    debug_assert_eq!(chunk.len(), chunk_bytes);
    Ok(chunk)
}

/// Applies the transform named by `token` to one chunk.
pub fn split_chunk(token: &Token, chunk: &[u8]) -> Result<BasisDeviationPair, TransformError> {
    match *token {
        Token::LastByte { basis, deviation } => lastbyte_split(chunk, basis, deviation),
        Token::Hamming { parity_bits } => hamming_split(chunk, parity_bits),
    }
}

/// Inverse of [`split_chunk`].
pub fn merge_chunk(token: &Token, pair: &BasisDeviationPair) -> Result<Vec<u8>, TransformError> {
    match *token {
        Token::LastByte { basis, deviation } => {
            if pair.basis.len() != basis {
                return Err(TransformError::BasisLength {
                    expected: basis,
                    found: pair.basis.len(),
                });
            }
            if pair.deviation.len() != deviation {
                return Err(TransformError::DeviationLength {
                    expected: deviation,
                    found: pair.deviation.len(),
                });
            }
            Ok(lastbyte_merge(pair))
        }
        Token::Hamming { parity_bits } => hamming_merge(pair, parity_bits),
    }
}
