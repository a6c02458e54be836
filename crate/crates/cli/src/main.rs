use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use codec_probe::audio::{read_wav, write_wav, WavEncoding};
use codec_probe::codec::{builtin_codec, MODE_ENV};
use codec_probe::harness::smoke::write_smoke_corpus;
use codec_probe::harness::{
    emit_reports, run_frequency_response, run_grid, run_linearity, ExperimentConfig, HarnessError, Reports, Session,
};
use codec_probe::rvq::Model;

#[derive(Parser)]
#[command(name = "codec-probe", version, about = "Black-box analysis of audio codecs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Condition x codec x mode grid of mel distances
    Grid(RunArgs),
    /// Additivity and homogeneity probes
    Linearity(RunArgs),
    /// Stepped-sine frequency response
    Freqresp(RunArgs),
    /// Grid, linearity and frequency response in one run
    Report(RunArgs),
    /// Write the generated smoke corpus and its config
    Smoke {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a builtin codec over one WAV file, speaking the external protocol
    #[command(hide = true)]
    Codec(CodecArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CodecArgs {
    #[arg(long)]
    name: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Falls back to the mode environment variable, then "default"
    #[arg(long)]
    mode: Option<String>,
    /// Native rate; the input's rate when absent
    #[arg(long)]
    rate: Option<u32>,
    /// Saved RVQ model, for --name rvq
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq)]
enum Analysis {
    Grid,
    Linearity,
    Freqresp,
}

fn run(args: &RunArgs, analyses: &[Analysis]) -> Result<bool, HarnessError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        config.parallelism = jobs;
    }
    let session = Session::new(config)?;
    let mut reports = Reports {
        config: Some(session.config.clone()),
        bitrates: ExperimentConfig::bitrates(&session.codecs),
        ..Default::default()
    };
    let mut clean = true;
    if analyses.contains(&Analysis::Grid) {
        let grid = run_grid(&session)?;
        log::info!("grid: {} rows, {} errors", grid.reports.len(), grid.error_count());
        clean &= grid.error_count() == 0;
        reports.grid = Some(grid);
    }
    if analyses.contains(&Analysis::Linearity) {
        let lin = run_linearity(&session)?;
        clean &= lin.failures.is_empty();
        reports.linearity = Some(lin);
    }
    if analyses.contains(&Analysis::Freqresp) {
        let fr = run_frequency_response(&session)?;
        clean &= fr.failures.is_empty();
        reports.freqresp = Some(fr);
    }
    emit_reports(&reports, &args.out)?;
    Ok(clean)
}

fn run_codec(args: &CodecArgs) -> Result<(), String> {
    let input = read_wav::<f64>(&args.input).map_err(|e| e.to_string())?;
    let rvq = match &args.model {
        Some(p) => Some(Arc::new(Model::load(p).map_err(|e| e.to_string())?)),
        None => None,
    };
    let codec = builtin_codec(&args.name, args.rate.unwrap_or(input.sample_rate()), rvq).map_err(|e| e.to_string())?;
    let mode = args
        .mode
        .clone()
        .or_else(|| std::env::var(MODE_ENV).ok())
        .unwrap_or_else(|| "default".into());
    let out = codec.process(&input, &mode).map_err(|e| e.to_string())?;
    write_wav(&out, &args.output, WavEncoding::Float32).map_err(|e| e.to_string())
}

fn report_error(context: &Path, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("codec-probe: {}: {e}", context.display());
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (args, analyses): (&RunArgs, &[Analysis]) = match &cli.command {
        Command::Grid(a) => (a, &[Analysis::Grid]),
        Command::Linearity(a) => (a, &[Analysis::Linearity]),
        Command::Freqresp(a) => (a, &[Analysis::Freqresp]),
        Command::Report(a) => (a, &[Analysis::Grid, Analysis::Linearity, Analysis::Freqresp]),
        Command::Smoke { out } => {
            return match write_smoke_corpus(out) {
                Ok(cfg) => {
                    println!("{}", cfg.display());
                    ExitCode::SUCCESS
                }
                Err(e) => report_error(out, e),
            }
        }
        Command::Codec(a) => {
            return match run_codec(a) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => report_error(&a.input, e),
            }
        }
    };
    match run(args, analyses) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => report_error(&args.config, e),
    }
}
