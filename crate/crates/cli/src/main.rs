use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fedwhit_cli::{run_config, Overrides};

#[derive(Parser)]
#[command(name = "fedwhit", version, about = "Exact Fedosov star products and Whitney-jet descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args)]
struct Common {
    /// Job config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Star order K, overriding the config.
    #[arg(long, global = true)]
    order: Option<u32>,
    /// Fedosov truncation N, overriding the config.
    #[arg(long, global = true)]
    truncation: Option<u32>,
    /// Directory for cached Fedosov states.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Use the literal (unsymmetrized) Poisson-connection correction.
    #[arg(long, global = true)]
    no_symmetrize: bool,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Emit::Text)]
    emit: Emit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Json,
    Text,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run every task of the config.
    Run,
    /// Check the Poisson chart (antisymmetry, Π·ω = 1, rank, Jacobi).
    Validate,
    /// Build the leafwise Poisson connection and check it.
    Connection,
    /// Solve for the Fedosov connection and check D∘D = 0.
    Fedosov,
    /// Star-product coefficients, axioms and associativity.
    Star,
    /// The quotient product on Whitney jets of the configured subset.
    WhitneyStar,
    /// Equivariance of the product under the configured group action.
    Invariance,
    /// Compare the reduced and the upstairs products along the projection.
    ReduceCheck,
    /// Solve for an equivalence between two star products.
    Equiv,
}

impl Command {
    fn kind(self) -> Option<&'static str> {
        Some(match self {
            Command::Run => return None,
            Command::Validate => "validate",
            Command::Connection => "connection",
            Command::Fedosov => "fedosov",
            Command::Star => "star",
            Command::WhitneyStar => "whitney-star",
            Command::Invariance => "invariance",
            Command::ReduceCheck => "reduce-check",
            Command::Equiv => "equiv",
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let Some(path) = &c.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let ov = Overrides { order: c.order, truncation: c.truncation, no_symmetrize: c.no_symmetrize };
    match run_config(&text, &ov, c.cache_dir.clone(), cli.command.kind()) {
        Ok(report) => {
            match c.emit {
                Emit::Text => print!("{}", report.to_text()),
                Emit::Json => print!("{}", report.to_json()),
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
