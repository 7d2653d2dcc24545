mod args;
mod stages;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CHAINFORGE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("chainforge: setup: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match &cli.command {
        Command::Gfa(a) => stages::gfa_command(&cli, a),
        Command::Optimize(a) => stages::optimize_command(&cli, a),
        Command::Pareto(a) => stages::pareto_command(&cli, a),
        Command::Validate(a) => stages::validate_command(&cli, a),
        Command::Run(a) => stages::run_command(&cli, a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chainforge: {}: {}", e.stage, e.message);
            ExitCode::from(e.code)
        }
    }
}
