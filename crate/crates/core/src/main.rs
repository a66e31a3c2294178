use clap::Parser;

fn main() {
    let cli = iqscore::cli::Cli::parse();
    if let Err(err) = iqscore::cli::run(cli) {
        eprintln!("{}", iqscore::cli::error_line(&err));
        std::process::exit(err.exit_code());
    }
}
