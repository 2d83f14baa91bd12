use clap::Parser;
use hqip_cli::{execute, Invocation};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs one named experiment of the hybrid optical simulator.
#[derive(Parser, Debug)]
#[command(name = "hqip", version)]
struct Args {
    /// epr-correlations, teleport-coherent, teleport-qubit, teleport-dv,
    /// cluster-nullifiers, cluster-gate, squeezer, cubic-gate or
    /// channel-equivalence
    experiment: String,

    /// extra `key=value` overrides
    params: Vec<String>,

    /// flat `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// `param=v1,v2,...`; one row per value
    #[arg(long, value_name = "PARAM=VALUES")]
    sweep: Option<String>,

    /// output path prefix
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut set = args.set;
    set.extend(args.params);
    let inv = Invocation { experiment: args.experiment, config_file: args.config, set, sweep: args.sweep, out: args.out };
    match execute(&inv) {
        Ok(report) => {
            for name in &report.failed {
                eprintln!("tolerance check failed: {name}");
            }
            println!("{}", report.result.display());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
