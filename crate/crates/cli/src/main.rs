//! `sdpi`: contraction coefficients of discrete channels from the command line.
//!
//! Exit status: 0 success, 1 usage error, 2 invalid input, 3 verification
//! failure. Reports go to standard output, diagnostics to standard error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sdpi_core::oracle::verify_reduction;
use sdpi_core::{
    eta_f, parse_channel, post_eta, sandwich_bounds, trace_envelope, DivergenceKind, EnvelopeGrid,
    PostConfig,
};
use serde::Serialize;

/// Slack used by `verify` when comparing sampled ratios to the coefficient.
const VERIFY_SLACK: f64 = 1e-6;

#[derive(Args, Debug, Clone, Serialize)]
struct RunConfig {
    /// Channel file: {"rows": [[...], ...], "name": "..."}.
    #[arg(long = "channel")]
    channel_path: PathBuf,
    /// kl, tv, chi2 or hellinger2.
    #[arg(long = "divergence", alias = "kind", default_value = "kl", value_parser = DivergenceKind::from_str)]
    kind: DivergenceKind,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4.0)]
    window_max: f64,
    /// Divide each row by its sum before validation.
    #[arg(long)]
    normalize: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    output_format: Format,
    /// Worker threads, or "auto". Results do not depend on it.
    #[arg(long, default_value = "auto", value_parser = parse_threads)]
    #[serde(skip)]
    threads: Threads,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Threads {
    Auto,
    Count(usize),
}

fn parse_threads(s: &str) -> Result<Threads, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Threads::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Threads::Count(n)),
        _ => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
    }
}

#[derive(Parser, Debug)]
#[command(name = "sdpi", version, about = "Strong data processing coefficients of discrete channels")]
struct Invocation {
    #[command(subcommand)]
    run: Run,
}

#[derive(Subcommand, Debug)]
enum Run {
    /// Contraction coefficient of the channel.
    Compute(RunConfig),
    /// Hellinger-diameter bounds on the KL coefficient.
    Bounds(RunConfig),
    /// Vertices of the upper concave envelope of (D_in, D_out).
    Envelope(RunConfig),
    /// Sample general input pairs and check them against the coefficient.
    Verify(RunConfig),
    /// Lower estimate of the post-SDPI coefficient.
    Post(RunConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Workflow {
    Compute,
    Bounds,
    Envelope,
    Verify,
    Post,
}

impl Run {
    fn split(self) -> (Workflow, RunConfig) {
        match self {
            Run::Compute(c) => (Workflow::Compute, c),
            Run::Bounds(c) => (Workflow::Bounds, c),
            Run::Envelope(c) => (Workflow::Envelope, c),
            Run::Verify(c) => (Workflow::Verify, c),
            Run::Post(c) => (Workflow::Post, c),
        }
    }
}

enum Failure {
    Usage(String),
    Input(String),
}

impl From<sdpi_core::Error> for Failure {
    fn from(e: sdpi_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

#[derive(Serialize)]
struct Report<'a, T> {
    tool: &'static str,
    version: &'static str,
    config: Embedded<'a>,
    result: T,
}

#[derive(Serialize)]
struct Embedded<'a> {
    subcommand: Workflow,
    #[serde(flatten)]
    run: &'a RunConfig,
}

struct Output {
    text: String,
    verification_failed: bool,
}

fn json_report<T: Serialize>(subcommand: Workflow, config: &RunConfig, result: T) -> String {
    let report = Report {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: Embedded {
            subcommand,
            run: config,
        },
        result,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("reports hold finite numbers");
    text.push('\n');
    text
}

fn validate(config: &RunConfig) -> Result<(), Failure> {
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return Err(Failure::Usage(format!("--tol must be positive, got {}", config.tol)));
    }
    if config.samples == 0 {
        return Err(Failure::Usage("--samples must be at least 1".into()));
    }
    if !(config.window_max > 0.0 && config.window_max.is_finite()) {
        return Err(Failure::Usage(format!("--window-max must be positive, got {}", config.window_max)));
    }
    Ok(())
}

fn run(subcommand: Workflow, config: &RunConfig) -> Result<Output, Failure> {
    validate(config)?;
    if config.output_format == Format::Csv && subcommand != Workflow::Envelope {
        return Err(Failure::Usage("--output-format csv is only available for envelope".into()));
    }
    if subcommand == Workflow::Post && config.kind != DivergenceKind::Kl {
        return Err(Failure::Usage("post is defined for --divergence kl only".into()));
    }
    let text = std::fs::read_to_string(&config.channel_path)
        .map_err(|e| Failure::Input(format!("{}: {e}", config.channel_path.display())))?;
    let channel = parse_channel(&text, config.normalize)?;

    let mut verification_failed = false;
    let text = match subcommand {
        Workflow::Compute => json_report(subcommand, config, eta_f(&channel, config.kind, config.tol)?),
        Workflow::Bounds => json_report(subcommand, config, sandwich_bounds(&channel)),
        Workflow::Envelope => {
            let curve = trace_envelope(&channel, config.kind, config.window_max, &EnvelopeGrid::default())?;
            match config.output_format {
                Format::Json => json_report(subcommand, config, curve),
                Format::Csv => {
                    let mut out = String::from("d_in,d_out\n");
                    for v in &curve.vertices {
                        writeln!(out, "{:.16e},{:.16e}", v.d_in, v.d_out).expect("writing to a String");
                    }
                    out
                }
            }
        }
        Workflow::Verify => {
            let report = verify_reduction(&channel, config.kind, config.samples, config.seed, VERIFY_SLACK)?;
            verification_failed = !report.passed();
            json_report(subcommand, config, report)
        }
        Workflow::Post => {
            let post = PostConfig {
                tol: config.tol,
                seed: config.seed,
                ..PostConfig::default()
            };
            json_report(subcommand, config, post_eta(&channel, &post)?)
        }
    };
    Ok(Output {
        text,
        verification_failed,
    })
}

fn main() -> ExitCode {
    let invocation = match Invocation::try_parse() {
        Ok(i) => i,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (subcommand, config) = invocation.run.split();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Threads::Count(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    };

    match pool.install(|| run(subcommand, &config)) {
        Ok(out) => {
            print!("{}", out.text);
            if out.verification_failed {
                eprintln!("verification failed: sampled ratios exceed the coefficient");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
