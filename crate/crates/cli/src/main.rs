use clap::Parser;
use photonlab_cli::{run, Cli};

fn main() {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    if let Err(e) = run(cli) {
        eprintln!("photonlab: {e}");
        std::process::exit(e.exit_code());
    }
}
