//! Recordings, montages and synthetic test signals.

mod montage;
mod recording;
pub mod synth;

pub use montage::{load_montage, parse_montage, Montage, DEAP_CHANNELS};
pub use recording::{
    load_recording, load_recording_for, read_recording, save_recording, EegRecording,
    RECORDING_MAGIC, RECORDING_VERSION,
};
pub use synth::{synthesize, ChannelSpec, Component, MixtureConfig, Modulation, SynthSpec};
