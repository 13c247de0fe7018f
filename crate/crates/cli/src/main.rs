use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rpencil_cli::{load_config, run, Command, Format, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "rpencil",
    version,
    about = "Poisson pencils on coadjoint orbits and Vaisman prequantization checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration; defaults are used for absent fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build and validate the Lie algebra bases and r-matrices.
    Algebra,
    /// Scan the pencil for degeneracy and check the spectral bound.
    PencilScan,
    /// Certify the prequantization examples and the CP1 obstruction.
    Vaisman,
    /// Run every command.
    All,
}

#[derive(ValueEnum, Clone, Copy)]
enum Preset {
    Cp1,
    Cp2,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let preset = cli.preset.map(|p| match p {
        Preset::Cp1 => "cp1",
        Preset::Cp2 => "cp2",
    });
    let cfg = match load_config(cli.config.as_deref(), cli.seed, cli.out.as_deref(), cli.format, preset) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let command = match cli.command {
        Cmd::Algebra => Command::Algebra,
        Cmd::PencilScan => Command::PencilScan,
        Cmd::Vaisman => Command::Vaisman,
        Cmd::All => Command::All,
    };
    let code = run(command, &cfg, &mut std::io::stdout());
    ExitCode::from(code as u8)
}
