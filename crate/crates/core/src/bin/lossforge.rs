use clap::Parser;
use lossforge::cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOSSFORGE_LOG", "warn")).init();
    std::process::exit(dispatch(Cli::parse()));
}
