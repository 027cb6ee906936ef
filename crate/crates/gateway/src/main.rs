use clap::Parser;
use hubsim_gateway::cli::{execute, init_logging, Cli};

fn main() -> std::process::ExitCode {
    init_logging();
    execute(Cli::parse())
}
