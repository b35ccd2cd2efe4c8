//! Brain rate of pure tones and of a drifting synthetic trial.

use neurorate::signal::synth::mixture_trial;
use neurorate::signal::{synthesize, ChannelSpec, Component, MixtureConfig, Montage, SynthSpec};
use neurorate::spectral::{window_brain_rate, Aggregation, BandScheme, SpectrumAnalyzer, Taper};
use neurorate::windowing::{segment, WindowConfig};

fn main() -> neurorate::Result<()> {
    let bands = BandScheme::standard();
    let windows = WindowConfig::default();
    let analyzer = SpectrumAnalyzer::new(windows.width(128.0)?, 128.0, Taper::Rectangular)?;
    println!("band mean frequencies: {:?}", bands.mean_frequencies());

    // one tone per band, identical on three channels
    for f in [2.0, 6.0, 10.0, 20.0, 40.0] {
        let spec = SynthSpec {
            duration: 2.0,
            sample_rate: 128.0,
            channels: ["Fz", "Cz", "Pz"]
                .iter()
                .map(|l| ChannelSpec {
                    label: l.to_string(),
                    components: vec![Component::new(f, 10.0, 0.3)],
                })
                .collect(),
            noise_std: 0.0,
            seed: 0,
            participant_id: "p".into(),
            trial_id: "tone".into(),
        };
        let rec = synthesize(&spec)?;
        let w = segment(&rec, &windows)?[0];
        let br = window_brain_rate(&analyzer, &w, &bands, Aggregation::Mean)?;
        println!("tone {f:>4} Hz -> BR {:.3} Hz", br.value);
    }

    let mix = MixtureConfig {
        duration: 20.0,
        ..MixtureConfig::default()
    };
    let rec = synthesize(&mixture_trial(&mix, &bands, &Montage::standard_32(), 1, 1, 0))?;
    let ws = segment(&rec, &windows)?;
    println!("mixture trial, {} windows:", ws.len());
    for w in ws.iter().step_by(16) {
        let mean = window_brain_rate(&analyzer, w, &bands, Aggregation::Mean)?.value;
        let sum = window_brain_rate(&analyzer, w, &bands, Aggregation::Sum)?.value;
        println!("  start {:>5}  mean {mean:.4} Hz  sum {sum:.2} Hz", w.start_index);
    }
    Ok(())
}
