//! `synrdp`: experiment runner.
//!
//! Exit status is 0 when every check of the requested battery passes, 1 when
//! a check fails or a computation errors, and 2 for configuration errors.

mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Format, Outcome};
use config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "synrdp", version, about = "Synonymous rate-distortion-perception experiments")]
struct Cli {
    /// TOML experiment file; the built-in three-symbol example when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Sweep output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entropy, semantic entropy and synonymous rate.
    Entropy,
    /// Lower-bound identity and decomposition on the latent model.
    SviCheck,
    /// Synset constant, mean term and divergence.
    LemmaCheck,
    /// Rate-distortion sweep.
    RdCurve,
    /// Rate-distortion-perception grid.
    RdpSurface,
    /// Encode, decode and measure a symbol stream.
    CodecRun {
        /// Newline-delimited input symbols instead of sampling the source.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Degeneration checks.
    Degenerate,
    /// Every battery above.
    All,
}

enum Failure {
    Config(String),
    Run(String),
}

fn load(cli: &Cli) -> Result<(config::Experiment, PathBuf), Failure> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text).map_err(|e| Failure::Config(e.0))?
        }
        None => ExperimentConfig::canonical(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    let exp = cfg.build(seed).map_err(|e| Failure::Config(e.0))?;
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if cli.jobs == 0 {
        return Err(Failure::Config("--jobs: must be >= 1".into()));
    }
    Ok((exp, out_dir))
}

fn read_symbols(path: &Path) -> Result<Vec<usize>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|e| Failure::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Writes `bytes` next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let (exp, out_dir) = load(cli)?;
    let jobs = cli.jobs;
    let result = match &cli.command {
        Command::Entropy => commands::entropy_cmd(&exp),
        Command::SviCheck => commands::svi_cmd(&exp),
        Command::LemmaCheck => commands::lemma_cmd(&exp),
        Command::RdCurve => commands::rd_curve_cmd(&exp, cli.format, jobs),
        Command::RdpSurface => commands::rdp_surface_cmd(&exp, cli.format, jobs),
        Command::CodecRun { input } => {
            let symbols = input.as_deref().map(read_symbols).transpose()?;
            commands::codec_cmd(&exp, symbols)
        }
        Command::Degenerate => commands::degenerate_cmd(&exp),
        Command::All => commands::all_cmd(&exp, cli.format, jobs),
    };
    let outcome = result.map_err(|e| Failure::Run(e.to_string()))?;

    fs::create_dir_all(&out_dir).map_err(|e| Failure::Run(format!("{}: {e}", out_dir.display())))?;
    for (name, bytes) in &outcome.artifacts {
        let path = out_dir.join(name);
        write_atomic(&path, bytes).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    }
    if matches!(cli.command, Command::Entropy) {
        if let Some((_, bytes)) = outcome.artifacts.first() {
            print!("{}", String::from_utf8_lossy(bytes));
        }
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for c in &outcome.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} residual={:e}", c.name, c.residual);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
