//! One reproducible binary: `stosem <module> <subcommand>`.
//!
//! Every run resolves its parameters (flags, then environment variables
//! prefixed `STOSEM_`, then defaults), executes inside a thread pool of the
//! requested size, and — when an output directory is given — serializes the
//! fully-resolved configuration next to the outputs together with a manifest
//! of content digests. Re-running from that configuration file reproduces
//! the outputs byte for byte, at any thread count: all randomness is
//! counter-based and reductions happen in a fixed order.
//!
//! Exit codes: 0 success, 2 usage, 3 model/validation error, 4 numerical
//! failure or I/O error. Errors are emitted as JSON on stderr.

mod commands;
mod run;

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "stosem",
    version,
    about = "Numerical toolkit for stochastic semigroups"
)]
struct Cli {
    /// Base seed for all random streams.
    #[arg(long, global = true, env = "STOSEM_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads for ensemble simulations (results do not depend on it).
    #[arg(long, global = true, env = "STOSEM_THREADS", default_value_t = 1)]
    threads: usize,

    /// Output directory; without it only the report is printed.
    #[arg(long, global = true, env = "STOSEM_OUT")]
    out: Option<PathBuf>,

    /// Array output format.
    #[arg(long, global = true, env = "STOSEM_FORMAT", value_enum, default_value_t = run::Format::Csv)]
    format: run::Format,

    /// Also write a small plotting-script stub referencing the CSV outputs.
    #[arg(long, global = true)]
    emit_plot_script: bool,

    /// Replay a serialized configuration instead of giving a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<commands::Module>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let (command, resolved) = match (cli.config, cli.command) {
        (Some(path), None) => match run::RunConfig::load(&path) {
            Ok(cfg) => {
                let resolved = run::Resolved {
                    seed: cfg.seed,
                    threads: cli.threads.max(1),
                    format: cfg.format,
                    out: cli.out.clone(),
                    emit_plot_script: cli.emit_plot_script,
                };
                (cfg.command, resolved)
            }
            Err(e) => return fail(&e),
        },
        (None, Some(command)) => {
            let resolved = run::Resolved {
                seed: cli.seed,
                threads: cli.threads.max(1),
                format: cli.format,
                out: cli.out.clone(),
                emit_plot_script: cli.emit_plot_script,
            };
            (command, resolved)
        }
        (Some(_), Some(_)) => {
            eprintln!(
                "{}",
                run::error_json("usage", "give either --config or a subcommand")
            );
            return ExitCode::from(2);
        }
        (None, None) => {
            eprintln!(
                "{}",
                run::error_json("usage", "missing subcommand; see --help")
            );
            return ExitCode::from(2);
        }
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(resolved.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}", run::error_json("runtime", &e.to_string()));
            return ExitCode::from(4);
        }
    };

    let outcome = pool.install(|| commands::execute(&command, &resolved));
    match outcome {
        Ok(outputs) => match run::emit(&command, &resolved, outputs) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
        Err(e) => fail(&e),
    }
}

fn fail(e: &stosem::Error) -> ExitCode {
    eprintln!("{}", run::error_json(run::error_kind(e), &e.to_string()));
    ExitCode::from(run::error_exit_code(e))
}
