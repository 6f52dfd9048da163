//! `gdp`: generate synthetic meter fleets, compress and decompress reading
//! streams, inspect compressor state and run the benchmark grid.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gdp::baselines::{self, BaselineKind};
use gdp::bench::{self, BenchConfig, CompressorKind, HeaderMode};
use gdp::config::ToolConfig;
use gdp::dlms::{
    decode_apdu, encode_apdu, read_readings_csv_path, write_readings_csv_path, Reading, READING_LEN,
};
use gdp::stream::{
    append_frame, compress_apdu, decompress_apdu, load_state, read_container, save_state,
    write_container_header, CompressorState,
};
use gdp::synth::{generate_fleet, PERIOD_MINUTES};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "gdp", version, about = "Pattern-based stream compressor for smart-meter readings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic fleet as one CSV per household.
    Gen(GenArgs),
    /// Compress a reading CSV into a container, updating the shared state.
    Compress(CompressArgs),
    /// Decompress a container back into a reading CSV.
    Decompress(DecompressArgs),
    /// Inspect persisted compressor state.
    State(StateArgs),
    /// Run the compressor grid over a generated dataset directory.
    Bench(BenchArgs),
    /// Run a single baseline compressor over a reading CSV.
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    households: usize,
    #[arg(long)]
    days: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompressArgs {
    /// Reading CSV to compress.
    #[arg(long)]
    input: PathBuf,
    /// State file, created on first use and rewritten atomically.
    #[arg(long)]
    state: PathBuf,
    /// Container to create or append to.
    #[arg(long)]
    out: PathBuf,
    /// Pattern string or registry id (`#1`..`#5`, `auto`); required when the
    /// state file does not exist yet.
    #[arg(long)]
    pattern: Option<String>,
    /// Readings per APDU; the whole input becomes one APDU when omitted.
    #[arg(long)]
    apdu_size: Option<usize>,
}

#[derive(Args)]
struct DecompressArgs {
    #[arg(long)]
    container: PathBuf,
    #[arg(long)]
    state: PathBuf,
    /// Output reading CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StateArgs {
    #[command(subcommand)]
    command: StateCommand,
}

#[derive(Subcommand)]
enum StateCommand {
    /// Print pattern, per-class basis counts and byte totals.
    Inspect {
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of reading CSVs (one per household), e.g. from `gdp gen`.
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated list: gdp,null,delta,stat,uncompressed.
    #[arg(long, default_value = "gdp,null,delta,stat")]
    compressors: String,
    /// Pattern string or registry id for the gdp compressor.
    #[arg(long, default_value = "#4")]
    pattern: String,
    /// Comma-separated APDU sizes in readings.
    #[arg(long, default_value = "1,2,4,12,24,48,96")]
    sizes: String,
    #[arg(long, default_value = "none")]
    header_mode: String,
    /// Output directory for gains.csv, totals.csv and state_growth.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// One of null, delta, stat.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    input: PathBuf,
    /// Sampling period in minutes, used by the predictors.
    #[arg(long, default_value_t = PERIOD_MINUTES)]
    period: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<ToolConfig> {
    match path {
        Some(p) => ToolConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(ToolConfig::default()),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    fs::create_dir_all(&args.out)?;
    let fleet = generate_fleet(args.households, args.days, args.seed, &cfg.gen);
    for (i, (_, stream)) in fleet.iter().enumerate() {
        let path = args.out.join(format!("household_{i:03}.csv"));
        write_readings_csv_path(&path, stream)?;
    }
    println!(
        "wrote {} households x {} days ({} readings each) to {}",
        args.households,
        args.days,
        args.days * gdp::synth::READINGS_PER_DAY,
        args.out.display()
    );
    Ok(())
}

fn run_compress(args: CompressArgs) -> Result<()> {
    let readings = read_readings_csv_path(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut state = if args.state.exists() {
        let state = load_state(&fs::read(&args.state)?)
            .with_context(|| format!("loading state {}", args.state.display()))?;
        if let Some(p) = &args.pattern {
            let requested = bench::resolve_pattern(p)?;
            if &requested != state.pattern() {
                bail!(
                    "pattern mismatch: state {} has `{}`, requested `{}`",
                    args.state.display(),
                    state.pattern().canonical(),
                    requested.canonical()
                );
            }
        }
        state
    } else {
        let p = args
            .pattern
            .as_deref()
            .context("--pattern is required when the state file does not exist")?;
        CompressorState::new(bench::resolve_pattern(p)?)
    };

    let apdu_size = args.apdu_size.unwrap_or(readings.len());
    if apdu_size == 0 || readings.is_empty() {
        bail!("nothing to compress");
    }
    if readings.len() % apdu_size != 0 {
        bail!(
            "{} readings do not split into whole APDUs of {apdu_size}",
            readings.len()
        );
    }

    let mut container = if args.out.exists() {
        let existing = fs::read(&args.out)?;
        let (pat, _) = read_container(&mut &existing[..])
            .with_context(|| format!("reading container {}", args.out.display()))?;
        if &pat != state.pattern() {
            bail!(
                "pattern mismatch: container {} has `{}`, state has `{}`",
                args.out.display(),
                pat.canonical(),
                state.pattern().canonical()
            );
        }
        existing
    } else {
        let mut buf = Vec::new();
        write_container_header(&mut buf, state.pattern())?;
        buf
    };

    let mut raw = 0usize;
    let mut compressed = 0usize;
    for apdu_readings in readings.chunks(apdu_size) {
        let buf = encode_apdu(apdu_readings)?;
        let payload = compress_apdu(&mut state, &buf.bytes)?.to_bytes();
        raw += buf.bytes.len();
        compressed += payload.len();
        append_frame(&mut container, &payload)?;
    }
    write_atomic(&args.out, &container)?;
    write_atomic(&args.state, &save_state(&state))?;
    println!(
        "compressed {} readings in {} APDUs: {raw} -> {compressed} bytes (gain {:.1}%)",
        readings.len(),
        readings.len() / apdu_size,
        100.0 * (1.0 - compressed as f64 / raw as f64)
    );
    Ok(())
}

fn run_decompress(args: DecompressArgs) -> Result<()> {
    let bytes = fs::read(&args.container)?;
    let (pattern, frames) = read_container(&mut &bytes[..])
        .with_context(|| format!("reading container {}", args.container.display()))?;
    let mut state = if args.state.exists() {
        load_state(&fs::read(&args.state)?)?
    } else {
        CompressorState::new(pattern.clone())
    };
    if state.pattern() != &pattern {
        bail!(
            "pattern mismatch: container has `{}`, state has `{}`",
            pattern.canonical(),
            state.pattern().canonical()
        );
    }
    let mut readings: Vec<Reading> = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let mut buf = decompress_apdu(&mut state, frame)
            .with_context(|| format!("decompressing frame {i}"))?;
        if !pattern.prefix.is_empty() {
            buf.drain(..pattern.prefix_len());
        }
        readings.extend(decode_apdu(&buf).with_context(|| format!("decoding frame {i}"))?);
    }
    write_readings_csv_path(&args.out, &readings)?;
    write_atomic(&args.state, &save_state(&state))?;
    println!(
        "decompressed {} frames into {} readings at {}",
        frames.len(),
        readings.len(),
        args.out.display()
    );
    Ok(())
}

fn run_state_inspect(path: &Path) -> Result<()> {
    let state = load_state(&fs::read(path)?)
        .with_context(|| format!("loading state {}", path.display()))?;
    println!("pattern: {}", state.pattern().canonical());
    println!("classes:");
    for (len, count) in state.class_sizes() {
        println!("  {len}-byte bases: {count} ({} bytes)", len * count);
    }
    println!("total bases: {}", state.total_bases());
    println!("state size: {} bytes", state.state_size_bytes());
    Ok(())
}

fn read_dataset(dir: &Path) -> Result<Vec<Vec<Reading>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading dataset directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no CSV files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| read_readings_csv_path(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let tool_cfg = load_config(&args.config)?;
    let streams = read_dataset(&args.dataset)?;
    let pattern = bench::resolve_pattern(&args.pattern)?;
    let mut cfg = BenchConfig::new(pattern.clone());
    cfg.stat_level = tool_cfg.stat_level;
    cfg.compressors = args
        .compressors
        .split(',')
        .map(|s| CompressorKind::parse(s.trim()).with_context(|| format!("unknown compressor `{s}`")))
        .collect::<Result<_>>()?;
    cfg.sizes = args
        .sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad APDU size `{s}`")))
        .collect::<Result<_>>()?;
    cfg.header_mode =
        HeaderMode::parse(&args.header_mode).with_context(|| format!("unknown header mode `{}`", args.header_mode))?;

    let report = bench::run_grid(&streams, &cfg)?;
    let growth = if cfg.compressors.contains(&CompressorKind::GdPattern) {
        Some(bench::track_state_growth(&streams, &pattern, gdp::synth::READINGS_PER_DAY)?)
    } else {
        None
    };
    bench::write_report_dir(&args.out, &report, growth.as_ref().map(|g| (&pattern, g.as_slice())))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for row in &report.gains {
        println!(
            "{:<12} size {:>3}: gain {:>6.2}% (std {:.2}pp)",
            row.compressor,
            row.size,
            100.0 * row.mean_gain,
            100.0 * row.std_gain
        );
    }
    println!("reports written to {}", args.out.display());
    Ok(())
}

fn run_baseline(args: BaselineArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let kind = BaselineKind::parse(&args.kind)
        .with_context(|| format!("unknown baseline `{}` (expected null, delta or stat)", args.kind))?;
    let readings = read_readings_csv_path(&args.input)?;
    let out = match kind {
        BaselineKind::NullData => baselines::null_compress(&readings, args.period)?,
        BaselineKind::DeltaArray => baselines::delta_compress(&readings, args.period)?,
        BaselineKind::Statistical => {
            baselines::stat_compress(&encode_apdu(&readings)?.bytes, cfg.stat_level)
        }
        BaselineKind::Uncompressed => encode_apdu(&readings)?.bytes,
    };
    fs::write(&args.out, &out)?;
    println!(
        "{}: {} readings, {} -> {} bytes",
        kind.name(),
        readings.len(),
        readings.len() * READING_LEN,
        out.len()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Compress(a) => run_compress(a),
        Command::Decompress(a) => run_decompress(a),
        Command::State(a) => match a.command {
            StateCommand::Inspect { state } => run_state_inspect(&state),
        },
        Command::Bench(a) => run_bench(a),
        Command::Baseline(a) => run_baseline(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
