//! `warpzip` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 corrupt input, 3 I/O or other failure.

mod report;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use warpzip::datagen::{generate_nested, generate_text_like, NestingSpec};
use warpzip::format::{inspect, Inspection};
use warpzip::{compress_to, decompress_file, decompress_with, Error, Mode, Params, Strategy};

use report::{BenchRow, GenReport, RoundSummary, RunReport, SCHEMA_VERSION};

#[derive(Parser, Debug)]
#[command(name = "warpzip", version, about = "Block-parallel LZ77 + Huffman compressor with warp-model decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compress a file into a container.
    Compress {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Restore the original bytes of a container.
    Decompress {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Mrr)]
        strategy: StrategyArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compress once, then time decompression with both strategies.
    Bench {
        input: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Measured decompression runs per strategy (one extra warm-up run is discarded).
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(5..))]
        runs: u32,
    },
    /// Dump file and block headers as JSON.
    Inspect { input: PathBuf },
    /// Write a stream whose back-references nest to a fixed depth.
    GenNested {
        output: PathBuf,
        #[arg(long, default_value_t = 32)]
        depth: u32,
        #[arg(long, default_value_t = 4 << 20)]
        size: usize,
        /// Block size the stream will be compressed with.
        #[arg(long, default_value_t = Params::default().block_size)]
        block_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write Zipfian pseudo-text.
    GenText {
        output: PathBuf,
        #[arg(long, default_value_t = 10 << 20)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Byte,
    Bit,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Sc,
    Mrr,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Sc => Strategy::Sc,
            StrategyArg::Mrr => Strategy::Mrr,
        }
    }
}

#[derive(Args, Debug)]
struct CodecArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Bit)]
    mode: ModeArg,
    /// Enable dependency elimination.
    #[arg(long, overrides_with = "no_de")]
    de: bool,
    #[arg(long, overrides_with = "de")]
    no_de: bool,
    #[arg(long, default_value_t = Params::default().block_size)]
    block_size: usize,
    #[arg(long, default_value_t = Params::default().window_size)]
    window: usize,
    #[arg(long, default_value_t = Params::default().lookahead)]
    lookahead: usize,
    #[arg(long, default_value_t = Params::default().sub_block_seqs)]
    sub_block_seqs: usize,
    #[arg(long, default_value_t = Params::default().cwl_max)]
    cwl: u8,
    #[arg(long, default_value_t = Params::default().min_staleness)]
    min_staleness: usize,
    /// Accepted for symmetry with the generators; compression is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl CodecArgs {
    fn params(&self) -> Result<Params, Error> {
        let p = Params {
            mode: match self.mode {
                ModeArg::Byte => Mode::Byte,
                ModeArg::Bit => Mode::Bit,
            },
            de_enabled: self.de && !self.no_de,
            block_size: self.block_size,
            window_size: self.window,
            lookahead: self.lookahead,
            sub_block_seqs: self.sub_block_seqs,
            cwl_max: self.cwl,
            min_staleness: self.min_staleness,
            ..Params::default()
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, env = "WARPZIP_WORKERS")]
    workers: Option<usize>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    stats_json: Option<PathBuf>,
    /// Do not print the report on stdout.
    #[arg(long, short)]
    quiet: bool,
}

impl RunArgs {
    fn workers(&self) -> Result<usize, Error> {
        match self.workers {
            Some(0) => Err(Error::InvalidParams("workers must be positive".into())),
            Some(n) => Ok(n),
            None => Ok(warpzip::codec::default_workers()),
        }
    }
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(PathBuf, io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Lib(e) if e.is_corrupt_input() => 2,
            Failure::Lib(Error::InvalidParams(_) | Error::InvalidDepth(_)) => 1,
            Failure::Lib(_) | Failure::Io(..) => 3,
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(path.to_path_buf(), e)
}

fn emit<T: Serialize>(value: &T, run: Option<&RunArgs>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    if let Some(path) = run.and_then(|r| r.stats_json.as_deref()) {
        std::fs::write(path, format!("{text}\n")).map_err(io_at(path))?;
    }
    if !run.is_some_and(|r| r.quiet) {
        let mut out = io::stdout().lock();
        match writeln!(out, "{text}") {
            // reader went away (`| head`); nothing left to report to
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            r => r.map_err(io_at(Path::new("<stdout>")))?,
        }
    }
    Ok(())
}

fn compress_cmd(input: &Path, output: &Path, codec: &CodecArgs, run: &RunArgs) -> Result<(), Failure> {
    let params = codec.params()?;
    let workers = run.workers()?;
    let t = Instant::now();
    let data = std::fs::read(input).map_err(io_at(input))?;
    let read_secs = t.elapsed().as_secs_f64();

    let file = File::create(output).map_err(io_at(output))?;
    let mut sink = BufWriter::new(file);
    let t = Instant::now();
    let summary = compress_to(&data, &params, workers, &mut sink)?;
    sink.flush().map_err(io_at(output))?;
    let secs = t.elapsed().as_secs_f64();

    let mut report = RunReport::new("compress", &params, workers, summary.input_len, summary.output_len);
    report.blocks = Some(summary.blocks);
    report.timings.insert("read", read_secs);
    report.timings.insert("compress", secs);
    emit(&report, Some(run))
}

fn decompress_cmd(input: &Path, output: &Path, strategy: Strategy, run: &RunArgs) -> Result<(), Failure> {
    let workers = run.workers()?;
    let compressed = std::fs::metadata(input).map_err(io_at(input))?.len();
    let src = BufReader::new(File::open(input).map_err(io_at(input))?);
    let mut sink = BufWriter::new(File::create(output).map_err(io_at(output))?);
    let t = Instant::now();
    let stats = decompress_file(src, &mut sink, strategy, workers)?;
    sink.flush().map_err(io_at(output))?;
    let secs = t.elapsed().as_secs_f64();

    let header = read_header(input)?;
    let mut report = RunReport::new("decompress", &header.params(), workers, header.total_len, compressed);
    report.strategy = Some(strategy);
    report.blocks = Some(stats.blocks.len() as u64);
    report.rounds = Some(RoundSummary::from(&stats.total));
    report.timings.insert("decompress", secs);
    emit(&report, Some(run))
}

fn read_header(path: &Path) -> Result<warpzip::format::FileHeader, Failure> {
    let src = BufReader::new(File::open(path).map_err(io_at(path))?);
    Ok(warpzip::format::FileReader::new(src)?.header().clone())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn bench_cmd(input: &Path, codec: &CodecArgs, run: &RunArgs, runs: u32) -> Result<(), Failure> {
    let params = codec.params()?;
    let workers = run.workers()?;
    let data = std::fs::read(input).map_err(io_at(input))?;

    let mut packed = Vec::with_capacity(data.len() / 2 + 64);
    let t = Instant::now();
    let summary = compress_to(&data, &params, workers, &mut packed)?;
    let compress_secs = t.elapsed().as_secs_f64();

    let mut report = RunReport::new("bench", &params, workers, summary.input_len, summary.output_len);
    report.blocks = Some(summary.blocks);
    report.timings.insert("compress", compress_secs);
    let mut mrr_stats = None;
    for strategy in [Strategy::Sc, Strategy::Mrr] {
        let mut times = Vec::with_capacity(runs as usize);
        let mut last = None;
        // first run warms caches and is discarded
        for i in 0..=runs {
            let t = Instant::now();
            let (out, stats) = decompress_with(&packed, strategy, workers)?;
            let secs = t.elapsed().as_secs_f64();
            if out != data {
                return Err(Failure::Lib(Error::CorruptStream("benchmark round trip differs from the input")));
            }
            if i > 0 {
                times.push(secs);
            }
            last = Some(stats);
        }
        let med = median(&times);
        let stats = last.expect("at least one run").total;
        report.bench.push(BenchRow {
            strategy,
            runs: times,
            median_seconds: med,
            median_throughput: if med > 0.0 { data.len() as f64 / med } else { 0.0 },
            rounds: RoundSummary::from(&stats),
        });
        if strategy == Strategy::Mrr {
            mrr_stats = Some(stats);
        }
    }
    report.rounds = mrr_stats.as_ref().map(RoundSummary::from);
    emit(&report, Some(run))
}

#[derive(Serialize)]
struct InspectReport {
    schema_version: u32,
    #[serde(flatten)]
    inspection: Inspection,
}

fn inspect_cmd(input: &Path) -> Result<(), Failure> {
    let src = BufReader::new(File::open(input).map_err(io_at(input))?);
    let inspection = inspect(src)?;
    emit(
        &InspectReport {
            schema_version: SCHEMA_VERSION,
            inspection,
        },
        None,
    )
}

fn write_generated(output: &Path, data: &[u8]) -> Result<(), Failure> {
    std::fs::write(output, data).map_err(io_at(output))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Compress { input, output, codec, run } => compress_cmd(&input, &output, &codec, &run),
        Command::Decompress {
            input,
            output,
            strategy,
            run,
        } => decompress_cmd(&input, &output, strategy.into(), &run),
        Command::Bench { input, codec, run, runs } => bench_cmd(&input, &codec, &run, runs),
        Command::Inspect { input } => inspect_cmd(&input),
        Command::GenNested {
            output,
            depth,
            size,
            block_size,
            seed,
        } => {
            let spec = NestingSpec {
                block_size,
                seed,
                ..NestingSpec::new(depth, size)
            };
            let t = Instant::now();
            let data = generate_nested(&spec)?;
            write_generated(&output, &data)?;
            emit(
                &GenReport {
                    schema_version: SCHEMA_VERSION,
                    command: "gen-nested",
                    bytes: data.len() as u64,
                    seed,
                    depth: Some(depth),
                    block_size: Some(block_size),
                    seconds: t.elapsed().as_secs_f64(),
                },
                None,
            )
        }
        Command::GenText { output, size, seed } => {
            let t = Instant::now();
            let data = generate_text_like(size, seed);
            write_generated(&output, &data)?;
            emit(
                &GenReport {
                    schema_version: SCHEMA_VERSION,
                    command: "gen-text",
                    bytes: data.len() as u64,
                    seed,
                    depth: None,
                    block_size: None,
                    seconds: t.elapsed().as_secs_f64(),
                },
                None,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("warpzip: {e}"),
                Failure::Io(path, e) => eprintln!("warpzip: {}: {e}", path.display()),
            }
            ExitCode::from(f.code())
        }
    }
}
