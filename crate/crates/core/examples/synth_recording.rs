//! Synthesise one trial, write it in the recording format and read it back.
//!
//!     cargo run --example synth_recording -- --out /tmp/p01_v01.eegr

use std::path::PathBuf;

use clap::Parser;
use neurorate::signal::synth::mixture_trial;
use neurorate::signal::{load_recording_for, save_recording, synthesize, MixtureConfig, Montage};
use neurorate::spectral::BandScheme;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "p01_v01.eegr")]
    out: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> neurorate::Result<()> {
    let args = Args::parse();
    let montage = Montage::standard_32();
    let mix = MixtureConfig {
        duration: args.duration,
        ..MixtureConfig::default()
    };
    let spec = mixture_trial(&mix, &BandScheme::standard(), &montage, 1, 1, args.seed);
    let rec = synthesize(&spec)?;
    save_recording(&rec, &args.out)?;

    let back = load_recording_for(&args.out, mix.sample_rate, &montage)?;
    // samples are stored as f32
    let err = (back.samples() - rec.samples()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "{}: {} channels x {} samples at {} Hz ({} s)",
        args.out.display(),
        back.channel_count(),
        back.sample_count(),
        back.sample_rate(),
        back.duration()
    );
    println!("round-trip max error {err:.1e} uV");
    for (name, row) in back.channel_names().iter().zip(back.samples().rows()).take(4) {
        let rms = (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt();
        println!("  {name:>4}  rms {rms:6.2} uV");
    }
    Ok(())
}
