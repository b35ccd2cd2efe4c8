//! Sequence counts per experiment plan, then a small dataset built,
//! written to disk and read back.

use neurorate::dataset::{build_dataset, load_dataset, plan_counts, ExperimentPlan};
use neurorate::signal::synth::mixture_trial;
use neurorate::signal::{synthesize, MixtureConfig, Montage};
use neurorate::spectral::{Aggregation, BandScheme};
use neurorate::topomap::TopoProjector;
use neurorate::windowing::WindowConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let windows = WindowConfig::default();
    let per_trial = windows.count(63 * 128, 128.0)?;
    println!("63 s trials: {per_trial} windows");
    println!("persons    total    train  val/test");
    for persons in [1, 3, 5, 7, 9] {
        let c = plan_counts(persons, 40, per_trial, 7)?;
        println!("{persons:>7} {:>8} {:>8} {:>9}", c.total, c.train, c.validation);
    }

    let montage = Montage::standard_32();
    let bands = BandScheme::standard();
    let mix = MixtureConfig {
        duration: 8.0,
        ..MixtureConfig::default()
    };
    let mut recordings = Vec::new();
    for p in 1..=2 {
        for t in 1..=8 {
            recordings.push(synthesize(&mixture_trial(&mix, &bands, &montage, p, t, 3))?);
        }
    }
    let projector = TopoProjector::new(&montage, recordings[0].channel_names(), bands, 16, windows.width(128.0)?, 128.0)?;
    let plan = ExperimentPlan::across_subject(2, 3);
    let data = build_dataset(&recordings, &projector, &windows, Aggregation::Mean, &plan, 0, 7)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("small.nrds");
    data.save(&path)?;
    let back = load_dataset(&path)?;
    println!(
        "across-subject, 2 persons x 8 videos: {} / {} / {} sequences, {} bytes on disk",
        back.train.len(),
        back.validation.len(),
        back.test.len(),
        std::fs::metadata(&path)?.len()
    );
    let r = &back.test[0];
    let s = back.sample(r)?;
    println!(
        "first test record: {}/{} windows {}..{} -> BR {:.4} Hz",
        r.provenance.participant,
        r.provenance.trial,
        s.start_window,
        s.start_window + s.inputs.len(),
        s.target.value
    );
    Ok(())
}
