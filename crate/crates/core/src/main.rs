use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kanlab::cli::{exit_code, run_config_file, schema_json};

#[derive(Parser)]
#[command(name = "kanlab", about = "Kan-type skew product experiments", disable_version_flag = true)]
struct Args {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON config and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the config JSON schema.
    Schema,
    /// Print the tool version.
    Version,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match args.command {
        Command::Schema => println!("{}", schema_json()),
        Command::Version => println!("kanlab {}", env!("CARGO_PKG_VERSION")),
        Command::Run { config, out } => match run_config_file(&config, out.as_deref()) {
            Ok(o) => {
                println!("{}", o.output_dir.display());
                println!("artifact_hash {}", o.manifest.artifact_hash);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e) as u8);
            }
        },
    }
    ExitCode::SUCCESS
}
