use clap::Parser;

fn main() {
    let cli = porohyst::cli::Cli::parse();
    std::process::exit(porohyst::cli::execute(cli));
}
