use clap::Parser;
use stabbfs::cli;

fn main() {
    let args = cli::Cli::parse();
    match cli::run(&args) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
