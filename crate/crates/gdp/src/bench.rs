//! Benchmark harness: the evaluated pattern registry, the upload-period
//! grid, the compression-gain metric and CSV report emission.

use crate::baselines;
use crate::config::ToolConfig;
use crate::dlms::{encode_reading, DlmsError, Reading, READING_LEN};
use crate::pattern::{Pattern, PatternError, Token};
use crate::stream::{compress_apdu, CompressorState, StreamError};
use crate::synth::READINGS_PER_DAY;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Dlms(#[from] DlmsError),
    #[error("baseline: {0}")]
    Baseline(#[from] baselines::BaselineError),
    #[error("unknown pattern id `{0}`")]
    UnknownPatternId(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("stream of {0} readings is shorter than one APDU of size {1}")]
    StreamTooShort(usize, usize),
    #[error("schema is empty")]
    EmptySchema,
    #[error("field `{0}` cannot be auto-patterned: its variable bytes are not trailing in big-endian layout")]
    AutoPatternUnsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One evaluated pattern with the reasoning behind its chunk layout.
#[derive(Debug, Clone, Copy)]
pub struct PatternRegistryEntry {
    pub id: &'static str,
    pub pattern: &'static str,
    pub note: &'static str,
}

/// The evaluated patterns. All body strides equal the 49-byte reading.
pub const PATTERN_REGISTRY: [PatternRegistryEntry; 6] = [
    PatternRegistryEntry {
        id: "#1",
        pattern: "[L52 L72 L16,2 L41 L41 L41]",
        note: "type code merged with log id, two-byte log-id deviation; hour/minute as timestamp \
               deviation; two-byte A14 deviation; A23/R12/R34 as separate 4+1 chunks",
    },
    PatternRegistryEntry {
        id: "#2",
        pattern: "[L52 L54 L16,2 L41 L41 L41]",
        note: "like #1 but the day bytes join the timestamp deviation",
    },
    PatternRegistryEntry {
        id: "#3",
        pattern: "[L52 L72 L16,2 L91 L41]",
        note: "assumes constant A23 and merges it into the basis of the R12 chunk",
    },
    PatternRegistryEntry {
        id: "#4",
        pattern: "[L52 L72 L16,2 L91 L41]",
        note: "short log-id deviation, constant A23, two-byte A14 deviation; the best handcrafted \
               combination",
    },
    PatternRegistryEntry {
        id: "#5",
        pattern: "[L52 L72 L17,1 L91 L41]",
        note: "like #4 with the A14 deviation shortened to one byte",
    },
    PatternRegistryEntry {
        id: "auto",
        pattern: "[L20 L41 L72 L50 L21 L41 L32 L41 L41 L41]",
        note: "generated per field from the profile schema, no locality across fields",
    },
];

/// Looks a pattern up by registry id (`#1`..`#5`, `auto`) or parses `s` as a
/// pattern string.
pub fn resolve_pattern(s: &str) -> Result<Pattern, BenchError> {
    if let Some(entry) = PATTERN_REGISTRY.iter().find(|e| e.id == s) {
        return Ok(entry.pattern.parse()?);
    }
    if s.starts_with('#') {
        return Err(BenchError::UnknownPatternId(s.into()));
    }
    Ok(s.parse::<Pattern>()?)
}

/// Field kinds of a Load Profile schema, in encoded order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// The `02 08` style structure header.
    StructureHeader,
    /// Tagged 4-byte unsigned counter; high-variance counters get a wider
    /// deviation.
    UnsignedCounter { high_variance: bool },
    /// Tagged 12-byte date-time.
    Timestamp12,
    /// Tagged 2-byte bitmap.
    Bitmap16,
    /// Tagged 4-byte bitmap.
    Bitmap32,
    /// IEEE-754 float: exponent and mantissa interleave across bytes, so the
    /// variable bytes are not trailing and no LastByte token fits.
    Float32,
}

impl FieldKind {
    fn encoded_len(&self) -> usize {
        match self {
            FieldKind::StructureHeader => 2,
            FieldKind::UnsignedCounter { .. } => 5,
            FieldKind::Timestamp12 => 14,
            FieldKind::Bitmap16 => 3,
            FieldKind::Bitmap32 => 5,
            FieldKind::Float32 => 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
}

fn field(name: &str, kind: FieldKind) -> FieldSpec {
    FieldSpec {
        name: name.into(),
        kind,
    }
}

/// The emulated power Load Profile schema.
pub fn load_profile_schema() -> Vec<FieldSpec> {
    vec![
        field("structure", FieldKind::StructureHeader),
        field("log_id", FieldKind::UnsignedCounter { high_variance: false }),
        field("timestamp", FieldKind::Timestamp12),
        field("log_status", FieldKind::Bitmap16),
        field("data_quality", FieldKind::Bitmap32),
        field("a14", FieldKind::UnsignedCounter { high_variance: true }),
        field("a23", FieldKind::UnsignedCounter { high_variance: false }),
        field("r12", FieldKind::UnsignedCounter { high_variance: false }),
        field("r34", FieldKind::UnsignedCounter { high_variance: false }),
    ]
}

/// Generates a pattern from a schema: one chunk per encoded field, deviation
/// widths chosen by field kind, the timestamp split to isolate hour and
/// minute.
pub fn auto_pattern(schema: &[FieldSpec]) -> Result<Pattern, BenchError> {
    if schema.is_empty() {
        return Err(BenchError::EmptySchema);
    }
    let mut body = Vec::new();
    for f in schema {
        match f.kind {
            FieldKind::StructureHeader => body.push(Token::LastByte { basis: 2, deviation: 0 }),
            FieldKind::UnsignedCounter { high_variance } => body.push(if high_variance {
                Token::LastByte { basis: 3, deviation: 2 }
            } else {
                Token::LastByte { basis: 4, deviation: 1 }
            }),
            FieldKind::Timestamp12 => {
                body.push(Token::LastByte { basis: 7, deviation: 2 });
                body.push(Token::LastByte { basis: 5, deviation: 0 });
            }
            FieldKind::Bitmap16 => body.push(Token::LastByte { basis: 2, deviation: 1 }),
            FieldKind::Bitmap32 => body.push(Token::LastByte { basis: 4, deviation: 1 }),
            FieldKind::Float32 => return Err(BenchError::AutoPatternUnsupported(f.name.clone())),
        }
    }
    let pattern = Pattern::body_only(body);
    debug_assert_eq!(
        pattern.stride(),
        schema.iter().map(|f| f.kind.encoded_len()).sum::<usize>()
    );
    Ok(pattern)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorKind {
    GdPattern,
    NullData,
    DeltaArray,
    Statistical,
    Uncompressed,
}

impl CompressorKind {
    pub fn name(&self) -> &'static str {
        match self {
            CompressorKind::GdPattern => "gdp",
            CompressorKind::NullData => "null",
            CompressorKind::DeltaArray => "delta",
            CompressorKind::Statistical => "stat",
            CompressorKind::Uncompressed => "uncompressed",
        }
    }

    pub fn parse(s: &str) -> Option<CompressorKind> {
        match s {
            "gdp" => Some(CompressorKind::GdPattern),
            "null" => Some(CompressorKind::NullData),
            "delta" => Some(CompressorKind::DeltaArray),
            "stat" => Some(CompressorKind::Statistical),
            "uncompressed" => Some(CompressorKind::Uncompressed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderMode {
    /// Data buffer only.
    None,
    /// Every APDU carries a 4-byte header id; the GD pattern gains an `L40`
    /// prefix so the id deduplicates with the other 4-byte bases, while the
    /// baselines repeat it verbatim.
    Id4,
}

impl HeaderMode {
    pub fn parse(s: &str) -> Option<HeaderMode> {
        match s {
            "none" => Some(HeaderMode::None),
            "id4" => Some(HeaderMode::Id4),
            _ => None,
        }
    }
}

pub const DEFAULT_SIZES: [usize; 7] = [1, 2, 4, 12, 24, 48, 96];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub compressors: Vec<CompressorKind>,
    pub pattern: Pattern,
    pub sizes: Vec<usize>,
    pub header_mode: HeaderMode,
    pub period_minutes: u32,
    pub stat_level: u32,
}

impl BenchConfig {
    pub fn new(pattern: Pattern) -> Self {
        Self {
            compressors: vec![
                CompressorKind::GdPattern,
                CompressorKind::NullData,
                CompressorKind::DeltaArray,
                CompressorKind::Statistical,
            ],
            pattern,
            sizes: DEFAULT_SIZES.to_vec(),
            header_mode: HeaderMode::None,
            period_minutes: crate::synth::PERIOD_MINUTES,
            stat_level: ToolConfig::default().stat_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub compressor: &'static str,
    pub size: usize,
    pub mean_gain: f64,
    pub std_gain: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub gains: Vec<GainRow>,
    /// (compressor, size, uploaded bytes summed over the fleet, transient
    /// APDUs included).
    pub totals: Vec<(&'static str, usize, u64)>,
    /// Per APDU size: per household, the per-APDU gain series of the GD
    /// pattern compressor.
    pub gdp_apdu_gains: BTreeMap<usize, Vec<Vec<f64>>>,
    pub warnings: Vec<String>,
}

impl BenchReport {
    pub fn gain(&self, compressor: &str, size: usize) -> Option<f64> {
        self.gains
            .iter()
            .find(|g| g.compressor == compressor && g.size == size)
            .map(|g| g.mean_gain)
    }
}

fn header_id(household: usize) -> [u8; 4] {
    let id = 0x4c50_0000u32 + household as u32;
    id.to_be_bytes()
}

fn effective_pattern(cfg: &BenchConfig) -> Pattern {
    let mut p = cfg.pattern.clone();
    if cfg.header_mode == HeaderMode::Id4 && p.prefix.is_empty() {
        p.prefix = vec![Token::LastByte { basis: 4, deviation: 0 }];
    }
    p
}

struct HouseholdRun {
    original: Vec<u64>,
    compressed: Vec<u64>,
}

impl HouseholdRun {
    /// Stream gain; the first (transient) APDU is excluded when
    /// `skip_first` and more than one APDU exists.
    fn gain(&self, skip_first: bool) -> f64 {
        let from = (skip_first && self.original.len() > 1) as usize;
        let o: u64 = self.original[from..].iter().sum();
        let c: u64 = self.compressed[from..].iter().sum();
        1.0 - c as f64 / o as f64
    }

    fn total(&self) -> u64 {
        self.compressed.iter().sum()
    }

    fn apdu_gains(&self) -> Vec<f64> {
        self.original
            .iter()
            .zip(&self.compressed)
            .map(|(&o, &c)| 1.0 - c as f64 / o as f64)
            .collect()
    }
}

fn run_household(
    readings: &[Reading],
    household: usize,
    kind: CompressorKind,
    size: usize,
    cfg: &BenchConfig,
) -> Result<HouseholdRun, BenchError> {
    let header_len = match cfg.header_mode {
        HeaderMode::None => 0,
        HeaderMode::Id4 => 4,
    };
    let n_apdus = readings.len() / size;
    if n_apdus == 0 {
        return Err(BenchError::StreamTooShort(readings.len(), size));
    }
    let mut run = HouseholdRun {
        original: Vec::with_capacity(n_apdus),
        compressed: Vec::with_capacity(n_apdus),
    };
    let mut state = CompressorState::new(effective_pattern(cfg));
    for apdu_readings in readings.chunks_exact(size) {
        let original = (header_len + size * READING_LEN) as u64;
        let compressed = match kind {
            CompressorKind::GdPattern => {
                let mut buf = Vec::with_capacity(header_len + size * READING_LEN);
                if cfg.header_mode == HeaderMode::Id4 {
                    buf.extend_from_slice(&header_id(household));
                }
                for r in apdu_readings {
                    buf.extend_from_slice(&encode_reading(r)?);
                }
                compress_apdu(&mut state, &buf)?.len() as u64
            }
            CompressorKind::NullData => {
                (header_len + baselines::null_compress(apdu_readings, cfg.period_minutes)?.len()) as u64
            }
            CompressorKind::DeltaArray => {
                (header_len + baselines::delta_compress(apdu_readings, cfg.period_minutes)?.len()) as u64
            }
            CompressorKind::Statistical => {
                let mut buf = Vec::with_capacity(size * READING_LEN);
                for r in apdu_readings {
                    buf.extend_from_slice(&encode_reading(r)?);
                }
                (header_len + baselines::stat_compress(&buf, cfg.stat_level).len()) as u64
            }
            CompressorKind::Uncompressed => original,
        };
        run.original.push(original);
        run.compressed.push(compressed);
    }
    Ok(run)
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every (compressor, APDU size) cell over the fleet. Gains are
/// computed per household first and averaged across households; the GD
/// stream gain excludes the first transient APDU.
pub fn run_grid(streams: &[Vec<Reading>], cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if streams.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    let mut report = BenchReport::default();
    for (h, s) in streams.iter().enumerate() {
        if s.len() % READINGS_PER_DAY != 0 {
            report.warnings.push(format!(
                "household {h}: stream of {} readings is not a whole number of days",
                s.len()
            ));
        }
    }
    for &size in &cfg.sizes {
        for (h, s) in streams.iter().enumerate() {
            if s.len() % size != 0 {
                report.warnings.push(format!(
                    "household {h}: dropping trailing partial APDU of {} readings at size {size}",
                    s.len() % size
                ));
            }
        }
        for &kind in &cfg.compressors {
            let mut gains = Vec::with_capacity(streams.len());
            let mut total = 0u64;
            let mut series = Vec::new();
            for (h, readings) in streams.iter().enumerate() {
                let run = run_household(readings, h, kind, size, cfg)?;
                gains.push(run.gain(kind == CompressorKind::GdPattern));
                total += run.total();
                if kind == CompressorKind::GdPattern {
                    series.push(run.apdu_gains());
                }
            }
            let (mean_gain, std_gain) = mean_and_std(&gains);
            report.gains.push(GainRow {
                compressor: kind.name(),
                size,
                mean_gain,
                std_gain,
            });
            report.totals.push((kind.name(), size, total));
            if kind == CompressorKind::GdPattern {
                report.gdp_apdu_gains.insert(size, series);
            }
        }
    }
    Ok(report)
}

/// Compresses each stream with `readings_per_apdu`-sized APDUs and samples
/// the state size after every simulated day. Returns one series per
/// household.
pub fn track_state_growth(
    streams: &[Vec<Reading>],
    pattern: &Pattern,
    readings_per_apdu: usize,
) -> Result<Vec<Vec<usize>>, BenchError> {
    let mut out = Vec::with_capacity(streams.len());
    for readings in streams {
        let mut state = CompressorState::new(pattern.clone());
        let mut series = Vec::new();
        let mut since_day = 0usize;
        for apdu_readings in readings.chunks_exact(readings_per_apdu) {
            let mut buf = Vec::with_capacity(readings_per_apdu * READING_LEN);
            for r in apdu_readings {
                buf.extend_from_slice(&encode_reading(r)?);
            }
            compress_apdu(&mut state, &buf)?;
            since_day += readings_per_apdu;
            while since_day >= READINGS_PER_DAY {
                series.push(state.state_size_bytes());
                since_day -= READINGS_PER_DAY;
            }
        }
        out.push(series);
    }
    Ok(out)
}

pub fn write_gains_csv<W: Write>(mut w: W, report: &BenchReport) -> std::io::Result<()> {
    writeln!(w, "compressor,size,mean_gain,std")?;
    for g in &report.gains {
        writeln!(w, "{},{},{:.6},{:.6}", g.compressor, g.size, g.mean_gain, g.std_gain)?;
    }
    Ok(())
}

pub fn write_totals_csv<W: Write>(mut w: W, report: &BenchReport) -> std::io::Result<()> {
    writeln!(w, "compressor,size,total_bytes")?;
    for (name, size, total) in &report.totals {
        writeln!(w, "{name},{size},{total}")?;
    }
    Ok(())
}

pub fn write_state_growth_csv<W: Write>(
    mut w: W,
    pattern: &Pattern,
    series: &[Vec<usize>],
) -> std::io::Result<()> {
    writeln!(w, "pattern,day,mean_state_bytes")?;
    if series.is_empty() {
        return Ok(());
    }
    let days = series.iter().map(Vec::len).min().unwrap_or(0);
    let canonical = pattern.canonical();
    for day in 0..days {
        let mean =
            series.iter().map(|s| s[day] as f64).sum::<f64>() / series.len() as f64;
        writeln!(w, "\"{canonical}\",{},{:.1}", day + 1, mean)?;
    }
    Ok(())
}

pub fn write_report_dir(
    dir: &Path,
    report: &BenchReport,
    state_growth: Option<(&Pattern, &[Vec<usize>])>,
) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    write_gains_csv(std::fs::File::create(dir.join("gains.csv"))?, report)?;
    write_totals_csv(std::fs::File::create(dir.join("totals.csv"))?, report)?;
    if let Some((pattern, series)) = state_growth {
        write_state_growth_csv(
            std::fs::File::create(dir.join("state_growth.csv"))?,
            pattern,
            series,
        )?;
    }
    Ok(())
}
