use clap::Parser;
use neurorate::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NEURORATE_LOG", "info")).init();
    let cli = Cli::parse();
    let result = cli.resolve().and_then(|config| run(&cli.command, &config));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
