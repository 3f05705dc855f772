use clap::Parser;
use pihqcd_bench::cli::Cli;

fn main() {
    let cli = Cli::parse();
    match cli.into_config().and_then(|cfg| pihqcd_bench::run(&cfg)) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
