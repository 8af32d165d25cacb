use clap::Parser;

fn main() {
    let cli = rdbox::cli::Cli::parse();
    std::process::exit(rdbox::cli::run(cli));
}
