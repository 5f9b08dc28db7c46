use std::path::PathBuf;
use std::process::ExitCode;

use bdsampler::runner::{emit, load_config, run, Preset};
use bdsampler::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdsampler", version, about = "Birth-death samplers and their mean-field flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Replicate count; overrides the config.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// List the presets and the experiments they reproduce.
    Presets,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Parse { .. } | Error::Config(_) | Error::InvalidInput(_) => EXIT_VALIDATION,
        Error::SolverAbort(_) => EXIT_SOLVER,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for p in Preset::ALL {
                println!("{:<14} {}", p.name(), p.anchor());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            seed,
            replicates,
        } => {
            let result = (|| {
                let mut cfg = load_config(&config)?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                if let Some(r) = replicates {
                    cfg.replicates = r;
                }
                if let Some(o) = out {
                    cfg.output_dir = o;
                }
                cfg.validate()?;
                let rec = run(&cfg)?;
                let files = emit(&rec, &cfg.output_dir)?;
                for (k, v) in &rec.summary {
                    println!("{k} = {v}");
                }
                println!(
                    "wrote {} files to {} in {:.1} s",
                    files.len(),
                    cfg.output_dir.display(),
                    rec.wall_clock_s
                );
                Ok::<_, Error>(rec)
            })();
            match result {
                Ok(rec) if rec.has_solver_errors() => {
                    eprintln!("solver aborted; reasons are recorded in manifest.json");
                    ExitCode::from(EXIT_SOLVER)
                }
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
    }
}
