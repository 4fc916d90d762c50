use clap::Parser;

fn main() {
    let cli = hetnet_cli::Cli::parse();
    std::process::exit(hetnet_cli::execute(&cli));
}
