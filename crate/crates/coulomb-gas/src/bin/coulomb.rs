//! Config-driven experiment runner.
//!
//! ```text
//! coulomb <kind> --config spec.toml [--seed S] [--out DIR] [--threads T]
//! ```
//!
//! The kind argument must match the config's `model.kind`; this catches the
//! classic mistake of pointing a long sweep invocation at the wrong file.
//! Exit codes: 0 pass, 1 runtime error, 2 unconverged, 3 certified-bound
//! violation, 4 config error.

use clap::Parser;
use coulomb_gas::experiments::{execute, load_spec, with_thread_limit, Outcome};
use coulomb_gas::Error;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "coulomb",
    version,
    about = "Coulomb gas experiments: kernel checks, sampling with inequality audits, \
             ground-state certificates, fluctuation sweeps"
)]
struct Cli {
    /// Experiment kind: kernel-check | sample | ground-state | sweep | analyze
    kind: String,

    /// TOML experiment config
    #[arg(long)]
    config: String,

    /// Override the config's RNG seed
    #[arg(long)]
    seed: Option<u64>,

    /// Override the config's output directory
    #[arg(long)]
    out: Option<String>,

    /// Worker threads (default: all cores; COULOMB_THREADS also works,
    /// the flag wins)
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: &Cli) -> coulomb_gas::Result<Outcome> {
    let spec = load_spec(&cli.config, cli.seed, cli.out.as_deref())?;
    if spec.model.kind.as_str() != cli.kind {
        return Err(Error::Config(format!(
            "config describes a '{}' experiment but was invoked as '{}'",
            spec.model.kind.as_str(),
            cli.kind
        )));
    }
    let threads = cli.threads.or_else(|| {
        std::env::var("COULOMB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let outcome = with_thread_limit(threads, || execute(&spec))??;
    println!("{} dir={}", outcome.as_str(), spec.output.dir);
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
