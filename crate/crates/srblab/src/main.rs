use clap::Parser;

fn main() {
    let cli = srblab::cli::Cli::parse();
    std::process::exit(srblab::cli::run(cli));
}
