use clap::Parser;

fn main() {
    let cli = irs_isac_cli::Cli::parse();
    std::process::exit(irs_isac_cli::execute(&cli));
}
