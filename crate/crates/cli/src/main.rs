use clap::Parser;

use cryoshield_cli::{run, RunConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = RunConfig::parse();
    if let Err(e) = run(&cfg) {
        eprintln!("error[{}]: {e}", e.category.as_str());
        std::process::exit(e.category.exit_code());
    }
}
