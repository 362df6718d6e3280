use clap::Parser;

fn main() {
    let cli = rocket_ci::cli::Cli::parse();
    if let Err(e) = rocket_ci::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
