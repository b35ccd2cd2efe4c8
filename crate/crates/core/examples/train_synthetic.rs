//! Both training stages on a small synthetic corpus, end to end in memory.
//!
//!     cargo run --release --example train_synthetic -- --videos 12 --grid 8

use clap::Parser;
use neurorate::dataset::{build_dataset, ExperimentPlan};
use neurorate::nn::{count_parameters, Architecture};
use neurorate::signal::synth::mixture_trial;
use neurorate::signal::{synthesize, MixtureConfig, Montage};
use neurorate::spectral::{Aggregation, BandScheme};
use neurorate::topomap::TopoProjector;
use neurorate::training::{mape, train_cnn, train_full, TrainConfig};
use neurorate::windowing::WindowConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 12)]
    videos: usize,
    #[arg(long, default_value_t = 20.0)]
    duration: f64,
    #[arg(long, default_value_t = 8)]
    grid: usize,
    #[arg(long, default_value_t = 4)]
    sequence: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> neurorate::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NEURORATE_LOG", "warn")).init();
    let args = Args::parse();
    let montage = Montage::standard_32();
    let bands = BandScheme::standard();
    let mix = MixtureConfig {
        duration: args.duration,
        ..MixtureConfig::default()
    };
    let recordings = (1..=args.videos)
        .map(|t| synthesize(&mixture_trial(&mix, &bands, &montage, 1, t, args.seed)))
        .collect::<neurorate::Result<Vec<_>>>()?;

    let windows = WindowConfig::default();
    let width = windows.width(mix.sample_rate)?;
    let labels = recordings[0].channel_names();
    let projector = TopoProjector::new(&montage, labels, bands.clone(), args.grid, width, mix.sample_rate)?;
    let plan = ExperimentPlan::within_subject(args.seed);
    let data = build_dataset(&recordings, &projector, &windows, Aggregation::Mean, &plan, 0, args.sequence)?;
    println!(
        "sequences: {} train / {} validation / {} test",
        data.train.len(),
        data.validation.len(),
        data.test.len()
    );

    let arch = Architecture {
        grid: args.grid,
        bands: bands.len(),
        sequence: args.sequence,
        blocks: vec![vec![8, 16]],
        lstm_hidden: 16,
        variation_filters: 8,
        dense: 32,
        dropout: 0.5,
    };
    let cfg = TrainConfig {
        batch_size: args.batch,
        max_epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let (cnn, r1) = train_cnn(&arch, &data, &cfg)?;
    println!("{}", r1.summary().lines().filter(|l| !l.starts_with("pearson")).collect::<Vec<_>>().join("\n"));
    let (full, r2) = train_full(&cnn, &data, &cfg)?;
    println!("{}", r2.summary().lines().filter(|l| !l.starts_with("pearson")).collect::<Vec<_>>().join("\n"));
    println!("parameters: cnn {}, full {}", count_parameters(&cnn), count_parameters(&full));

    // predicting the training mean, for scale
    let y: Vec<f64> = data.test.iter().map(|r| r.target.value).collect();
    let mean = data.train.iter().map(|r| r.target.value).sum::<f64>() / data.train.len() as f64;
    println!("mean-predictor test mape: {:.4}%", mape(&y, &vec![mean; y.len()])?);
    Ok(())
}
