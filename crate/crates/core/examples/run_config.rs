//! Drive a run from a JSON config, as the `kanlab run` binary does.
//!
//! ```text
//! cargo run --example run_config -- examples/configs/validate.json out/validate
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use kanlab::cli::{exit_code, run_config_file};

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "examples/configs/validate.json".to_owned()));
    let out = args.next().map(PathBuf::from);
    match run_config_file(&config, out.as_deref()) {
        Ok(o) => {
            for (name, hash) in &o.manifest.artifacts {
                println!("{name:<28} {}", &hash[..16]);
            }
            println!("artifact_hash {}", o.manifest.artifact_hash);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
