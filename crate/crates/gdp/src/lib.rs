//! Pattern-based generalized-deduplication compression for streams of
//! smart-meter Load Profile readings, plus the baseline compressors,
//! synthetic fleet generator and benchmark harness used to evaluate it.
//!
//! The compressor splits each upload (APDU) into chunks according to a
//! pattern string such as `[L52 L72 L16,2 L91 L41]`, transforms every chunk
//! into a basis and a deviation, and deduplicates bases across the whole
//! stream. Shared compressor state on both ends makes each upload
//! self-contained: new bases travel with the APDU that introduces them.

pub mod baselines;
pub mod bench;
pub mod bits;
pub mod config;
pub mod dlms;
pub mod pattern;
pub mod stream;
pub mod synth;
pub mod transform;

pub use dlms::{Reading, Timestamp, READING_LEN};
pub use pattern::{Pattern, Token};
pub use stream::{compress_apdu, decompress_apdu, CompressorState};
