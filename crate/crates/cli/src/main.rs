use clap::Parser;
use dnc_krr_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
