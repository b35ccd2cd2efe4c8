//! The whole command pipeline on a reduced configuration, driven through
//! the library rather than the binary.
//!
//!     cargo run --release --example cli_pipeline -- --out /tmp/neurorate-run

use std::path::PathBuf;

use clap::Parser;
use neurorate::cli::{run, Command, RunConfig};

const CONFIG: &str = "
[signal]
videos = 8
duration = 12.0
[topomap]
grid = 12
[dataset]
z = 4
[model]
blocks = [[8, 16]]
lstm_hidden = 16
variation_filters = 8
dense = 32
[train]
batch_size = 16
max_epochs = 20
";

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "neurorate-run")]
    out: PathBuf,
}

fn main() -> neurorate::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NEURORATE_LOG", "info")).init();
    let args = Args::parse();
    let mut config = RunConfig::from_toml(CONFIG)?;
    config.paths.out = args.out;
    let steps = [
        Command::Synth,
        Command::Brainrate,
        Command::Topomap {
            emit_png: true,
            png_window: 0,
        },
        Command::Dataset,
        Command::Train,
        Command::Eval,
        Command::Report,
    ];
    for cmd in &steps {
        let manifest = run(cmd, &config)?;
        println!("{:<10} {} artifacts", cmd.name(), manifest.artifacts.len());
    }
    print!("{}", std::fs::read_to_string(config.paths.out.join("train_summary.txt")).unwrap_or_default());
    Ok(())
}
