//! Fixed-length sliding windows over a recording.

use ndarray::{s, ArrayView2};

use crate::error::{Error, Result};
use crate::signal::EegRecording;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    /// Window length in seconds.
    pub length_s: f64,
    /// Shift between consecutive windows in milliseconds.
    pub shift_ms: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            length_s: 2.0,
            shift_ms: 125.0,
        }
    }
}

impl WindowConfig {
    pub fn width(&self, rate: f64) -> Result<usize> {
        exact_samples("window length", self.length_s * rate, rate)
    }

    pub fn step(&self, rate: f64) -> Result<usize> {
        exact_samples("window shift", self.shift_ms * rate / 1000.0, rate)
    }

    /// Number of windows that fit in `samples` samples.
    pub fn count(&self, samples: usize, rate: f64) -> Result<usize> {
        let width = self.width(rate)?;
        let step = self.step(rate)?;
        if samples < width {
            return Err(Error::RecordingTooShort {
                samples,
                window: width,
            });
        }
        Ok((samples - width) / step + 1)
    }
}

fn exact_samples(what: &'static str, value: f64, rate: f64) -> Result<usize> {
    let rounded = value.round();
    if !value.is_finite() || rounded < 1.0 || (value - rounded).abs() > 1e-9 * value.abs().max(1.0) {
        return Err(Error::NonIntegerSamples { what, value, rate });
    }
    Ok(rounded as usize)
}

/// A borrowed `[channel × width]` slice of a recording.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub start_index: usize,
    pub samples: ArrayView2<'a, f64>,
    pub trial_id: &'a str,
}

impl Window<'_> {
    pub fn width(&self) -> usize {
        self.samples.ncols()
    }
}

/// Cuts `recording` into windows starting at 0 and advancing by the shift,
/// keeping only windows that lie fully inside the recording.
pub fn segment<'a>(recording: &'a EegRecording, config: &WindowConfig) -> Result<Vec<Window<'a>>> {
    let rate = recording.sample_rate();
    let width = config.width(rate)?;
    let step = config.step(rate)?;
    let count = config.count(recording.sample_count(), rate)?;
    Ok((0..count)
        .map(|i| {
            let start = i * step;
            Window {
                start_index: start,
                samples: recording.samples().slice(s![.., start..start + width]),
                trial_id: &recording.trial_id,
            }
        })
        .collect())
}
