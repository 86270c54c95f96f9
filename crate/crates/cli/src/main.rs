use clap::{Args, Parser, Subcommand, ValueEnum};
use emst::harness::generators::InstanceSpec;
use emst::harness::oracle::mst_oracle;
use emst::harness::report::Mode;
use emst::harness::runner::{calibrate, default_seed, run_estimate, DeltaSource, Input, RunConfig, SEED_ENV};
use emst::harness::selftest;
use emst::Error;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Streaming l1 EMST estimation.
#[derive(Parser)]
#[command(name = "emst", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimator and emit a JSON report.
    Estimate(EstimateArgs),
    /// Exact MST cost of an instance.
    Oracle(OracleArgs),
    /// Run the invariant suites.
    Selftest {
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
    },
    /// Median of |X| for p-stable X, closed form and Monte Carlo.
    Calibrate {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 1.5, 2.0])]
        p: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Stream file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generator spec such as `uniform:n=100,d=2,lambda=256`.
    #[arg(long)]
    gen: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "kebab-case")]
enum ModeArg {
    Exact,
    Ideal,
    #[value(alias = "exact-Z")]
    ExactZ,
    Alpha,
    Onepass,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaArg {
    Exact,
    Sketch,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Passes spent on component growth; defaults to 2.
    #[arg(long)]
    alpha: Option<u32>,
    /// Total pass budget, including the diameter pass.
    #[arg(long)]
    passes: Option<u32>,
    /// Sampled vertices per level.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Attach the exact MST and the ratio.
    #[arg(long)]
    oracle: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall-clock time; the report is then no longer reproducible.
    #[arg(long)]
    timing: bool,
    /// Component size threshold; defaults to the faithful value.
    #[arg(long)]
    threshold: Option<f64>,
    /// How Δ is obtained.
    #[arg(long, value_enum)]
    delta: Option<DeltaArg>,
    /// One-pass trials through the recursive sampler.
    #[arg(long)]
    sketch: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Also print the tree edges.
    #[arg(long)]
    edges: bool,
}

fn load(src: &Source, seed: u64) -> emst::Result<Input> {
    match (&src.input, &src.gen) {
        (Some(path), _) => Input::from_path(path),
        (None, Some(spec)) => Input::from_spec(&InstanceSpec::parse(spec, seed)?),
        (None, None) => Err(Error::Config("one of --input or --gen is required".into())),
    }
}

/// Print a line, ignoring a closed stdout.
fn emit(s: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::OutOfRange { .. }
        | Error::DimensionMismatch { .. }
        | Error::DeleteAbsent(_)
        | Error::Empty
        | Error::Io(_) => 2,
        _ => 3,
    }
}

fn estimate(a: EstimateArgs) -> emst::Result<()> {
    let seed = a.seed.unwrap_or_else(default_seed);
    let input = load(&a.source, seed)?;
    let mode = match a.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Ideal => Mode::Ideal,
        ModeArg::ExactZ => Mode::ExactZ,
        ModeArg::Alpha => Mode::Alpha,
        ModeArg::Onepass => Mode::Onepass,
    };
    let mut cfg = RunConfig::new(mode, a.epsilon, seed);
    cfg.alpha = a.alpha;
    cfg.passes = a.passes;
    cfg.samples = a.samples;
    cfg.oracle = a.oracle;
    cfg.timing = a.timing;
    cfg.size_threshold = a.threshold;
    cfg.sketch = a.sketch;
    cfg.delta_source = a.delta.map(|d| match d {
        DeltaArg::Exact => DeltaSource::Exact,
        DeltaArg::Sketch => DeltaSource::Sketch,
    });
    let json = run_estimate(&input, &cfg)?.to_json();
    match a.report {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => emit(json),
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> emst::Result<()> {
    let input = load(&a.source, a.seed.unwrap_or_else(default_seed))?;
    let mst = mst_oracle(&input.points)?;
    emit(mst.cost);
    if a.edges {
        for (u, v, w) in mst.edges {
            emit(format!("{:?} {:?} {w}", u.coords, v.coords));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Estimate(a) => estimate(a),
        Command::Oracle(a) => oracle(a),
        Command::Selftest { seed } => {
            let results = selftest::run_all(seed.unwrap_or_else(default_seed));
            for r in &results {
                emit(format!("{} {} ({})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail));
            }
            if results.iter().all(|r| r.pass) {
                Ok(())
            } else {
                return ExitCode::from(3);
            }
        }
        Command::Calibrate { p, draws, seed } => {
            let rows = calibrate(&p, draws, seed.unwrap_or_else(default_seed));
            emit(serde_json::to_string_pretty(&rows).expect("rows serialize"));
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
