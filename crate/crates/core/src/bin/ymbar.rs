use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ymbar::cli::{self, Command, Overrides};

#[derive(Parser)]
#[command(name = "ymbar", version, about = "Yang-Mills bar functional on flat Kähler tori")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the identity suite and write report.txt
    Verify(Common),
    /// Run the gradient flow and write trace.csv and snapshots
    Flow(Common),
    /// Describe a snapshot (or the manifest's seeded state)
    Inspect(Common),
}

#[derive(Args)]
struct Common {
    /// Manifest file (`section.key = value` lines); defaults apply without one
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory, overriding `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed, overriding `bundle.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplier on every tolerance, overriding `tolerance.scale`
    #[arg(long = "tol-scale")]
    tol_scale: Option<f64>,
}

fn run(command: Command, c: &Common) -> ymbar::Result<bool> {
    let ov = Overrides { out: c.out.clone(), seed: c.seed, tol_scale: c.tol_scale };
    let m = cli::load_manifest(c.manifest.as_deref(), command, &ov)?;
    match command {
        Command::Verify => {
            let v = cli::cmd_verify(&m)?;
            print!("{}", cli::render_report(&v.reports));
            println!("report written to {}", v.report_path.display());
            Ok(v.summary.ok())
        }
        Command::Flow => {
            let f = cli::cmd_flow(&m)?;
            print!("{}", f.summary);
            Ok(f.run.trace.is_monotone())
        }
        Command::Inspect => {
            print!("{}", cli::cmd_inspect(&m)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let (command, common) = match &args.command {
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Flow(c) => (Command::Flow, c),
        Sub::Inspect(c) => (Command::Inspect, c),
    };
    let result = run(command, common);
    if let Err(e) = &result {
        eprintln!("ymbar {command}: {e}");
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
