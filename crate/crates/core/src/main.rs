use clap::Parser;

fn main() {
    let cli = fancomplex::cli::Cli::parse();
    std::process::exit(fancomplex::cli::main_with(cli));
}
