use clap::Parser;

use tullock_harness::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{e}");
        std::process::exit(e.category.exit_code());
    }
}
