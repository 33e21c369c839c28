use clap::Parser;

fn main() {
    let cli = parkgrid_cli::Cli::parse();
    if let Err(e) = parkgrid_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
