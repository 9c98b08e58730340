use std::path::PathBuf;
use std::process::ExitCode;

use cherednik::cli_io::{cmd_dump_rootsystem, cmd_eval, cmd_limits, cmd_verify, Format, Limit, Outcome, Quantity, RunConfig};
use cherednik::Error;
use clap::{Parser, Subcommand};

/// Extended affine Weyl group cocycles, Dunkl operators and certified Bethe wave functions.
#[derive(Parser, Debug)]
#[command(name = "cherednik", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `csv` or `json`; defaults to json for verify and dump-rootsystem, csv otherwise.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs a verification suite: all, algebra, cocycle, adkz, jump, eigen or weak.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Evaluates E, Eplus, psi or theta at the configured points.
    Eval { quantity: String },
    /// Deviation series of xi_infinity or steinberg_critical.
    Limits { which: String },
    /// Prints roots, lattices, multiplicity orbits and the module.
    DumpRootsystem,
}

fn run(cli: &Cli) -> Result<(Outcome, Format), Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let default = match cli.command {
        Command::Verify { .. } | Command::DumpRootsystem => Format::Json,
        _ => Format::Csv,
    };
    let format = cli.format.as_deref().map(str::parse).transpose()?.unwrap_or(default);
    let outcome = match &cli.command {
        Command::Verify { suite } => cmd_verify(&cfg, suite),
        Command::Eval { quantity } => cmd_eval(&cfg, quantity.parse::<Quantity>()?),
        Command::Limits { which } => cmd_limits(&cfg, which.parse::<Limit>()?),
        Command::DumpRootsystem => cmd_dump_rootsystem(&cfg),
    };
    Ok((outcome, format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("cherednik: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let (outcome, format) = match run(&cli) {
        Ok(x) => x,
        Err(e) => (Outcome::from_error(&e), Format::Json),
    };
    if let Some(msg) = outcome.json.get("error").and_then(|m| m.as_str()) {
        eprintln!("cherednik: {msg}");
    }
    let text = outcome.render(format);
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                eprintln!("cherednik: cannot write {}: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(outcome.code as u8)
}
