use clap::Parser;

fn main() {
    let cli = hdid::cli::Cli::parse();
    if let Err(e) = hdid::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
