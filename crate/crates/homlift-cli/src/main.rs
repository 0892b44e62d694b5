use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use homlift_cli::commands::{run, Invocation};

/// Decides realizability and homotopy of morphisms of homotopy algebras
/// over a chain operad, at a finite truncation, in exact arithmetic.
#[derive(Parser)]
#[command(name = "homlift", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the structure equations and, when present, the morphism data
    Validate(RunArgs),
    /// Lift the weight-zero morphism grade by grade
    Realize(RunArgs),
    /// Decide whether the two given lifts are homotopic
    Homotopy(RunArgs),
    /// Report the obstruction-group dimensions around every stage
    Gamma(RunArgs),
    /// Dump the truncated tree basis and the label legend
    #[command(name = "bar-basis")]
    BarBasis(RunArgs),
    /// Run the built-in invariant suite
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a problem manifest
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Name of a bundled fixture instead of a manifest path
    #[arg(long)]
    fixture: Option<String>,
    /// Override the manifest's grade cutoff
    #[arg(long)]
    grade_cutoff: Option<u32>,
    /// Override the manifest's arity cutoff
    #[arg(long)]
    arity_cutoff: Option<u8>,
    /// Also write the report to this path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for the basis cache
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Also write the report to this path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let (name, args) = match &cli.command {
        Cmd::Validate(a) => ("validate", Some(a)),
        Cmd::Realize(a) => ("realize", Some(a)),
        Cmd::Homotopy(a) => ("homotopy", Some(a)),
        Cmd::Gamma(a) => ("gamma", Some(a)),
        Cmd::BarBasis(a) => ("bar-basis", Some(a)),
        Cmd::Selftest(_) => ("selftest", None),
    };
    let out_path = match &cli.command {
        Cmd::Selftest(a) => a.out.clone(),
        _ => args.and_then(|a| a.out.clone()),
    };

    let manifest_bytes = match args {
        None => String::new(),
        Some(a) => match load_manifest(a) {
            Ok(b) => b,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(1);
            }
        },
    };
    let inv = Invocation {
        command: name,
        manifest_bytes: &manifest_bytes,
        grade_override: args.and_then(|a| a.grade_cutoff),
        arity_override: args.and_then(|a| a.arity_cutoff),
        cache_dir: args.and_then(|a| a.cache_dir.as_deref()),
    };
    match run(&inv) {
        Ok((report, code)) => {
            let body = report.to_json();
            print!("{body}");
            if let Some(path) = out_path {
                if let Err(e) = std::fs::write(&path, &body) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_manifest(a: &RunArgs) -> Result<String, String> {
    match (&a.manifest, &a.fixture) {
        (Some(_), Some(_)) => Err("--manifest and --fixture are mutually exclusive".into()),
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| format!("reading manifest {}: {e}", path.display())),
        (None, Some(name)) => homlift_cli::fixture(name).map(str::to_string).ok_or_else(|| {
            let names: Vec<&str> = homlift_cli::FIXTURES.iter().map(|(n, _)| *n).collect();
            format!("unknown fixture {name:?}; bundled fixtures: {}", names.join(", "))
        }),
        (None, None) => Err("one of --manifest or --fixture is required".into()),
    }
}
