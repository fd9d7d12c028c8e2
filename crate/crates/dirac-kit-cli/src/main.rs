use clap::{Parser, Subcommand};
use dirac_kit_cli::catalog;
use dirac_kit_cli::report::Format;
use dirac_kit_cli::scenario::{self, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

/// Verify Courant algebroid, Dirac structure and shifted lagrangian identities.
#[derive(Parser, Debug)]
#[command(name = "dirac-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for all randomized sampling.
    #[arg(long, global = true, env = "DIRAC_KIT_SEED")]
    seed: Option<u64>,
    /// Number of sample points per numerical check.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Tolerance for derivative-free numerical checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Step of the central differences used for exterior derivatives.
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the checks of a scenario file.
    Verify { file: PathBuf },
    /// Run a named suite with default data.
    Catalog {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(catalog::CATALOG))]
        name: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let o = Overrides { seed: cli.seed, samples: cli.samples, tol: cli.tol, fd_step: cli.fd_step };
    let report = match &cli.command {
        Command::Verify { file } => scenario::run_scenario(file, &o),
        Command::Catalog { name } => scenario::settings(&Default::default(), &o)
            .map(|s| catalog::run(name, &s).expect("name validated by the parser")),
    };
    match report {
        Ok(r) => {
            print!("{}", r.emit(cli.format));
            if cli.format == Format::Json {
                println!();
            }
            ExitCode::from(r.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
