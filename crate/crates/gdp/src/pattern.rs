//! Pattern strings of chunk-transform tokens and their expansion over an
//! input buffer.
//!
//! A pattern is an optional list of prefix tokens followed by a bracketed,
//! non-empty body, e.g. `L40 [L52 L72 L16,2 L91 L41]`. The body is repeated
//! until the buffer is exhausted; prefix tokens are applied once at the head
//! of each buffer.

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("ambiguous token `L{0}`: three or more digits need an explicit comma (Ln,k)")]
    AmbiguousLastByte(String),
    #[error("malformed token `{0}`")]
    MalformedToken(String),
    #[error("unknown transform letter in `{0}`")]
    UnknownTransform(String),
    #[error("unsupported Hamming parity bits {0}, supported range is 4..=7")]
    UnsupportedParity(u32),
    #[error("LastByte basis length must be at least 1 in `{0}`")]
    ZeroBasis(String),
    #[error("pattern body is empty")]
    EmptyBody,
    #[error("missing `[` before pattern body")]
    MissingOpenBracket,
    #[error("missing `]` after pattern body")]
    MissingCloseBracket,
    #[error("unexpected trailing input `{0}` after `]`")]
    TrailingInput(String),
    #[error(
        "pattern does not tile the buffer: length {buffer_len} leaves remainder {remainder} \
         after {prefix_len} prefix bytes with body stride {stride}"
    )]
    Coverage {
        buffer_len: usize,
        prefix_len: usize,
        stride: usize,
        remainder: usize,
    },
}

/// One transform token of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    /// Split an (n+k)-byte chunk into an n-byte basis and k trailing
    /// deviation bytes.
    LastByte { basis: usize, deviation: usize },
    /// Hamming code with `parity_bits` parity bits over a 2^(p-3)-byte chunk.
    Hamming { parity_bits: u32 },
}

impl Token {
    pub fn chunk_len(&self) -> usize {
        match *self {
            Token::LastByte { basis, deviation } => basis + deviation,
            Token::Hamming { parity_bits } => 1 << (parity_bits - 3),
        }
    }

    /// Byte length of the basis this token produces. For Hamming, the
    /// 2^p - p payload bits (data bits plus the spare bit outside the
    /// codeword span) are packed into whole bytes.
    pub fn basis_len(&self) -> usize {
        match *self {
            Token::LastByte { basis, .. } => basis,
            Token::Hamming { parity_bits } => ((1usize << parity_bits) - parity_bits as usize).div_ceil(8),
        }
    }

    pub fn deviation_len(&self) -> usize {
        match *self {
            Token::LastByte { deviation, .. } => deviation,
            Token::Hamming { .. } => 1,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Token::LastByte { basis, deviation } => {
                if basis >= 10 || deviation >= 10 {
                    write!(f, "L{basis},{deviation}")
                } else {
                    write!(f, "L{basis}{deviation}")
                }
            }
            Token::Hamming { parity_bits } => write!(f, "H{parity_bits}"),
        }
    }
}

/// A parsed pattern: prefix tokens plus the repeating body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub prefix: Vec<Token>,
    pub body: Vec<Token>,
}

impl Pattern {
    pub fn body_only(body: Vec<Token>) -> Pattern {
        Pattern {
            prefix: Vec::new(),
            body,
        }
    }

    /// Sum of body chunk sizes.
    pub fn stride(&self) -> usize {
        self.body.iter().map(Token::chunk_len).sum()
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.iter().map(Token::chunk_len).sum()
    }

    /// Distinct basis byte-lengths produced by prefix and body tokens,
    /// ascending.
    pub fn class_lens(&self) -> Vec<usize> {
        let mut lens: Vec<usize> = self
            .prefix
            .iter()
            .chain(&self.body)
            .map(Token::basis_len)
            .collect();
        lens.sort_unstable();
        lens.dedup();
        lens
    }

    /// Canonical string rendering; parsing it back yields an equal pattern.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.prefix {
            write!(f, "{t} ")?;
        }
        write!(f, "[")?;
        for (i, t) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "]")
    }
}

fn parse_token(word: &str) -> Result<Token, PatternError> {
    let mut chars = word.chars();
    let letter = chars.next().ok_or_else(|| PatternError::MalformedToken(word.into()))?;
    let rest: &str = &word[letter.len_utf8()..];
    match letter {
        'H' => {
            let p: u32 = rest
                .parse()
                .map_err(|_| PatternError::MalformedToken(word.into()))?;
            if !(4..=7).contains(&p) {
                return Err(PatternError::UnsupportedParity(p));
            }
            Ok(Token::Hamming { parity_bits: p })
        }
        'L' => {
            let (basis, deviation) = if let Some((n, k)) = rest.split_once(',') {
                let n: usize = n
                    .parse()
                    .map_err(|_| PatternError::MalformedToken(word.into()))?;
                let k: usize = k
                    .parse()
                    .map_err(|_| PatternError::MalformedToken(word.into()))?;
                (n, k)
            } else {
                if !rest.chars().all(|c| c.is_ascii_digit()) || rest.is_empty() {
                    return Err(PatternError::MalformedToken(word.into()));
                }
                if rest.len() > 2 {
                    return Err(PatternError::AmbiguousLastByte(rest.into()));
                }
                if rest.len() < 2 {
                    return Err(PatternError::MalformedToken(word.into()));
                }
                let digits: Vec<u32> = rest.chars().map(|c| c.to_digit(10).unwrap()).collect();
                (digits[0] as usize, digits[1] as usize)
            };
            if basis == 0 {
                return Err(PatternError::ZeroBasis(word.into()));
            }
            Ok(Token::LastByte { basis, deviation })
        }
        _ => Err(PatternError::UnknownTransform(word.into())),
    }
}

impl FromStr for Pattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let open = s.find('[').ok_or(PatternError::MissingOpenBracket)?;
        let close = s.find(']').ok_or(PatternError::MissingCloseBracket)?;
        if close < open {
            return Err(PatternError::MissingOpenBracket);
        }
        let trailing = s[close + 1..].trim();
        if !trailing.is_empty() {
            return Err(PatternError::TrailingInput(trailing.into()));
        }
        let prefix = s[..open]
            .split_whitespace()
            .map(parse_token)
            .collect::<Result<Vec<_>, _>>()?;
        let body = s[open + 1..close]
            .split_whitespace()
            .map(parse_token)
            .collect::<Result<Vec<_>, _>>()?;
        if body.is_empty() {
            return Err(PatternError::EmptyBody);
        }
        Ok(Pattern { prefix, body })
    }
}

/// One chunk of a plan: where it starts and which transform covers it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedChunk {
    pub offset: usize,
    pub token: Token,
}

/// Contiguous, gap-free tiling of a buffer by pattern chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    pub chunks: Vec<PlannedChunk>,
}

impl ChunkPlan {
    pub fn total_len(&self) -> usize {
        self.chunks
            .last()
            .map(|c| c.offset + c.token.chunk_len())
            .unwrap_or(0)
    }
}

/// Expands a pattern over a buffer of `buffer_len` bytes. The body must
/// cover the remainder after the (optional) prefix exactly; partial coverage
/// is an error, no padding is applied.
pub fn plan_chunks(
    pattern: &Pattern,
    buffer_len: usize,
    include_prefix: bool,
) -> Result<ChunkPlan, PatternError> {
    let stride = pattern.stride();
    let prefix_len = if include_prefix { pattern.prefix_len() } else { 0 };
    let coverage_err = |remainder| PatternError::Coverage {
        buffer_len,
        prefix_len,
        stride,
        remainder,
    };
    if buffer_len < prefix_len {
        return Err(coverage_err(buffer_len));
    }
    let remaining = buffer_len - prefix_len;
    if remaining == 0 || !remaining.is_multiple_of(stride) {
        return Err(coverage_err(remaining % stride));
    }
    let mut chunks = Vec::with_capacity(
        pattern.prefix.len() * include_prefix as usize + remaining / stride * pattern.body.len(),
    );
    let mut offset = 0;
    if include_prefix {
        for &token in &pattern.prefix {
            chunks.push(PlannedChunk { offset, token });
            offset += token.chunk_len();
        }
    }
    while offset < buffer_len {
        for &token in &pattern.body {
            chunks.push(PlannedChunk { offset, token });
            offset += token.chunk_len();
        }
    }
    Ok(ChunkPlan { chunks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lb(n: usize, k: usize) -> Token {
        Token::LastByte {
            basis: n,
            deviation: k,
        }
    }

    #[test]
    fn parses_hamming_body() {
        let p: Pattern = "[H5 H6]".parse().unwrap();
        assert_eq!(p.prefix, vec![]);
        assert_eq!(
            p.body,
            vec![Token::Hamming { parity_bits: 5 }, Token::Hamming { parity_bits: 6 }]
        );
        assert_eq!(p.stride(), 4 + 8);
    }

    #[test]
    fn parses_mixed_lastbyte_forms() {
        let p: Pattern = "[L20 L41 L14,0 L21 L32 L41 L50 L41 L41]".parse().unwrap();
        let expected = vec![
            lb(2, 0),
            lb(4, 1),
            lb(14, 0),
            lb(2, 1),
            lb(3, 2),
            lb(4, 1),
            lb(5, 0),
            lb(4, 1),
            lb(4, 1),
        ];
        assert_eq!(p.body, expected);
        assert_eq!(p.stride(), 49);
    }

    #[test]
    fn parses_prefix_form() {
        let p: Pattern = "L40 [ L52 L72 L16,2 L91 L41 ]".parse().unwrap();
        assert_eq!(p.prefix, vec![lb(4, 0)]);
        assert_eq!(p.stride(), 49);
        assert_eq!(p.prefix_len(), 4);
        assert_eq!(p.canonical(), "L40 [L52 L72 L16,2 L91 L41]");
    }

    #[test]
    fn rejects_ambiguous_and_malformed() {
        assert_eq!(
            "[L163]".parse::<Pattern>(),
            Err(PatternError::AmbiguousLastByte("163".into()))
        );
        assert_eq!("[]".parse::<Pattern>(), Err(PatternError::EmptyBody));
        assert!(matches!(
            "[X41]".parse::<Pattern>(),
            Err(PatternError::UnknownTransform(_))
        ));
        assert_eq!(
            "[H9]".parse::<Pattern>(),
            Err(PatternError::UnsupportedParity(9))
        );
        assert!(matches!("L41".parse::<Pattern>(), Err(PatternError::MissingOpenBracket)));
        assert!(matches!(
            "[L41] L32".parse::<Pattern>(),
            Err(PatternError::TrailingInput(_))
        ));
        assert!(matches!("[L01]".parse::<Pattern>(), Err(PatternError::ZeroBasis(_))));
        assert!(matches!("[L4]".parse::<Pattern>(), Err(PatternError::MalformedToken(_))));
    }

    // Brute-force offset accumulator, kept separate from plan_chunks as the
    // oracle for the offset examples.
    fn accumulate_offsets(tokens: &[Token], reps: usize) -> Vec<usize> {
        let mut offsets = Vec::new();
        let mut pos = 0;
        for _ in 0..reps {
            for t in tokens {
                offsets.push(pos);
                pos += t.chunk_len();
            }
        }
        offsets
    }

    #[test]
    fn plans_pattern4_over_two_readings() {
        let p: Pattern = "[L52 L72 L16,2 L91 L41]".parse().unwrap();
        let plan = plan_chunks(&p, 98, false).unwrap();
        let offsets: Vec<usize> = plan.chunks.iter().map(|c| c.offset).collect();
        assert_eq!(offsets, vec![0, 7, 16, 34, 44, 49, 56, 65, 83, 93]);
        assert_eq!(offsets, accumulate_offsets(&p.body, 2));
    }

    #[test]
    fn plans_two_signal_example() {
        // two 10-byte readings of a 4+1 and a 3+2 column
        let p: Pattern = "[L41 L32]".parse().unwrap();
        let plan = plan_chunks(&p, 20, false).unwrap();
        let offsets: Vec<usize> = plan.chunks.iter().map(|c| c.offset).collect();
        assert_eq!(offsets, vec![0, 5, 10, 15]);
        assert_eq!(offsets, accumulate_offsets(&p.body, 2));
        assert!(plan_chunks(&p, 14, false).is_err());
    }

    #[test]
    fn coverage_error() {
        let p: Pattern = "[L41]".parse().unwrap();
        match plan_chunks(&p, 7, false) {
            Err(PatternError::Coverage {
                stride: 5,
                remainder: 2,
                ..
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn prefix_consumed_when_requested() {
        let p: Pattern = "L40 [L52 L72 L16,2 L91 L41]".parse().unwrap();
        let plan = plan_chunks(&p, 53, true).unwrap();
        assert_eq!(plan.chunks[0].token, lb(4, 0));
        assert_eq!(plan.chunks[1].offset, 4);
        assert_eq!(plan.total_len(), 53);
        // without the prefix, 53 bytes cannot be tiled
        assert!(plan_chunks(&p, 53, false).is_err());
        assert!(plan_chunks(&p, 49, false).is_ok());
    }

    fn arb_token() -> impl Strategy<Value = Token> {
        prop_oneof![
            (1usize..20, 0usize..20).prop_map(|(n, k)| lb(n, k)),
            (4u32..=7).prop_map(|p| Token::Hamming { parity_bits: p }),
        ]
    }

    proptest! {
        #[test]
        fn render_parse_roundtrip(
            prefix in proptest::collection::vec(arb_token(), 0..3),
            body in proptest::collection::vec(arb_token(), 1..8),
        ) {
            let p = Pattern { prefix, body };
            let reparsed: Pattern = p.canonical().parse().unwrap();
            prop_assert_eq!(reparsed, p);
        }

        #[test]
        fn tiling_is_exact(
            body in proptest::collection::vec(arb_token(), 1..6),
            reps in 1usize..5,
        ) {
            let p = Pattern::body_only(body);
            let len = p.stride() * reps;
            let plan = plan_chunks(&p, len, false).unwrap();
            // contiguous, no gaps, no overlap
            let mut pos = 0;
            for c in &plan.chunks {
                prop_assert_eq!(c.offset, pos);
                pos += c.token.chunk_len();
            }
            prop_assert_eq!(pos, len);
        }
    }
}
