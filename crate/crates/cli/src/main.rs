use clap::Parser;
use splinemix_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("splinemix: {e}");
        std::process::exit(e.exit_code());
    }
}
