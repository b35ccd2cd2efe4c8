//! Analytic test-signal generation.
//!
//! Every channel is a finite sum of (optionally amplitude-modulated)
//! sinusoids plus seeded Gaussian noise, so spectra of noiseless signals are
//! known in closed form.

use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EegRecording, Montage};
use crate::error::{Error, Result};
use crate::spectral::BandScheme;

/// Slow sinusoidal amplitude envelope `1 + depth·sin(2π·frequency·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation {
    pub frequency: f64,
    pub depth: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    /// Hz
    pub frequency: f64,
    /// µV
    pub amplitude: f64,
    /// rad
    pub phase: f64,
    pub modulation: Option<Modulation>,
}

impl Component {
    pub fn new(frequency: f64, amplitude: f64, phase: f64) -> Self {
        Component {
            frequency,
            amplitude,
            phase,
            modulation: None,
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let envelope = self
            .modulation
            .map_or(1.0, |m| 1.0 + m.depth * (TAU * m.frequency * t + m.phase).sin());
        self.amplitude * envelope * (TAU * self.frequency * t + self.phase).sin()
    }

    fn highest_frequency(&self) -> f64 {
        self.frequency + self.modulation.map_or(0.0, |m| m.frequency)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub label: String,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// seconds
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    pub channels: Vec<ChannelSpec>,
    /// µV
    pub noise_std: f64,
    pub seed: u64,
    pub participant_id: String,
    pub trial_id: String,
}

impl SynthSpec {
    pub fn sample_count(&self) -> Result<usize> {
        let n = self.duration * self.sample_rate;
        if !(n.is_finite() && n >= 1.0) || (n - n.round()).abs() > 1e-9 {
            return Err(Error::NonIntegerSamples {
                what: "duration",
                value: n,
                rate: self.sample_rate,
            });
        }
        Ok(n.round() as usize)
    }

    fn validate(&self) -> Result<usize> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("sample rate {}", self.sample_rate)));
        }
        if self.channels.is_empty() {
            return Err(Error::InvalidConfig("no channels".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise std {}", self.noise_std)));
        }
        let nyquist = self.sample_rate / 2.0;
        for c in self.channels.iter().flat_map(|ch| &ch.components) {
            if c.highest_frequency() >= nyquist {
                return Err(Error::AboveNyquist {
                    frequency: c.highest_frequency(),
                    nyquist,
                });
            }
        }
        self.sample_count()
    }
}

/// Renders a [`SynthSpec`]; deterministic for a given seed.
pub fn synthesize(spec: &SynthSpec) -> Result<EegRecording> {
    let n = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(0.0))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut samples = Array2::zeros((spec.channels.len(), n));
    for (mut row, ch) in samples.rows_mut().into_iter().zip(&spec.channels) {
        for (i, v) in row.iter_mut().enumerate() {
            let t = i as f64 / spec.sample_rate;
            *v = ch.components.iter().map(|c| c.value_at(t)).sum();
        }
        if spec.noise_std > 0.0 {
            for v in row.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
    }
    EegRecording::new(
        spec.sample_rate,
        spec.channels.iter().map(|c| c.label.clone()).collect(),
        samples,
        spec.participant_id.clone(),
        spec.trial_id.clone(),
    )
}

/// Parameters of the band-mixture corpus generator.
///
/// Each trial carries one sinusoid per band and channel. Band amplitudes
/// vary smoothly over the scalp and drift slowly in time, so the brain rate
/// of a window is a smooth function of the preceding spectral maps.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub duration: f64,
    pub sample_rate: f64,
    pub noise_std: f64,
    /// Amplitude envelope frequency range in Hz.
    pub drift_frequency: (f64, f64),
    /// Amplitude envelope depth range.
    pub drift_depth: (f64, f64),
    /// Base amplitude per band in µV (delta..gamma).
    pub band_amplitude: Vec<f64>,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            duration: 63.0,
            sample_rate: 128.0,
            noise_std: 0.5,
            drift_frequency: (0.02, 0.12),
            drift_depth: (0.3, 0.9),
            band_amplitude: vec![6.0, 5.0, 4.0, 3.0, 2.0],
        }
    }
}

/// Deterministic seed for one (participant, trial) cell of a corpus.
pub fn trial_seed(seed: u64, participant: usize, trial: usize) -> u64 {
    // splitmix64 finaliser over the packed indices
    let mut z = seed ^ ((participant as u64) << 32 | trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Builds the spec of one band-mixture trial.
pub fn mixture_trial(
    config: &MixtureConfig,
    bands: &BandScheme,
    montage: &Montage,
    participant: usize,
    trial: usize,
    seed: u64,
) -> SynthSpec {
    let trial_seed = trial_seed(seed, participant, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let mut participant_rng = ChaCha8Rng::seed_from_u64(trial_seed_for_participant(seed, participant));

    struct BandField {
        frequency: f64,
        gain: f64,
        direction: [f64; 3],
        slope: f64,
        modulation: Modulation,
    }

    let fields: Vec<BandField> = bands
        .bands()
        .iter()
        .enumerate()
        .map(|(b, band)| {
            let margin = 0.15 * (band.high - band.low);
            let frequency = rng.random_range(band.low + margin..band.high - margin);
            let base = config.band_amplitude.get(b).copied().unwrap_or(1.0);
            let gain = base * participant_rng.random_range(0.7..1.3);
            BandField {
                frequency,
                gain,
                direction: random_unit(&mut rng),
                slope: rng.random_range(0.1..0.5),
                modulation: Modulation {
                    frequency: rng.random_range(config.drift_frequency.0..config.drift_frequency.1),
                    depth: rng.random_range(config.drift_depth.0..config.drift_depth.1),
                    phase: rng.random_range(0.0..TAU),
                },
            }
        })
        .collect();

    let channels = montage
        .iter()
        .map(|(label, pos)| ChannelSpec {
            label: label.to_string(),
            components: fields
                .iter()
                .map(|f| {
                    let along = f.direction[0] * pos[0] + f.direction[1] * pos[1] + f.direction[2] * pos[2];
                    Component {
                        frequency: f.frequency,
                        amplitude: f.gain * (1.0 + f.slope * along),
                        phase: rng.random_range(0.0..TAU),
                        modulation: Some(f.modulation),
                    }
                })
                .collect(),
        })
        .collect();

    SynthSpec {
        duration: config.duration,
        sample_rate: config.sample_rate,
        channels,
        noise_std: config.noise_std,
        seed: trial_seed,
        participant_id: format!("p{participant:02}"),
        trial_id: format!("v{trial:02}"),
    }
}

fn trial_seed_for_participant(seed: u64, participant: usize) -> u64 {
    trial_seed(seed.rotate_left(17), participant, usize::MAX >> 32)
}

fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    let normal = Normal::<f64>::new(0.0, 1.0).expect("unit normal");
    loop {
        let v = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
