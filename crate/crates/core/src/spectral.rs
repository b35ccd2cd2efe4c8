//! Band decomposition of window spectra and the brain rate.
//!
//! For channel `ch` and band `b`, the centroid `C[b, ch]` is the mean
//! one-sided amplitude over the band's bins, the ratio
//! `P[b, ch] = C[b, ch] / avg(ch)` divides it by the mean amplitude over all
//! in-band bins, and the brain rate weights each ratio by the band's mean
//! frequency:
//!
//! ```text
//! BR = Σ_ch Σ_b f_b · P[b, ch]        (sum mode)
//! BR = BR_sum / n_channels            (mean mode)
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::windowing::Window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    /// Inclusive lower edge, Hz.
    pub low: f64,
    /// Exclusive upper edge, Hz.
    pub high: f64,
}

impl Band {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        Band {
            name: name.into(),
            low,
            high,
        }
    }

    pub fn mean_frequency(&self) -> f64 {
        (self.low + self.high) / 2.0
    }

    /// Half-open membership test, tolerant to rounding in `f`.
    pub fn contains(&self, f: f64) -> bool {
        let tol = 1e-9 * self.high.abs().max(1.0);
        f + tol >= self.low && f + tol < self.high
    }
}

/// An ascending, non-overlapping list of frequency bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandScheme {
    bands: Vec<Band>,
}

impl BandScheme {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidConfig("band scheme is empty".into()));
        }
        for b in &bands {
            if !(b.low >= 0.0 && b.high > b.low && b.high.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "band {} has edges {}..{}",
                    b.name, b.low, b.high
                )));
            }
        }
        for pair in bands.windows(2) {
            if pair[1].low < pair[0].high {
                return Err(Error::InvalidConfig(format!(
                    "bands {} and {} overlap or are out of order",
                    pair[0].name, pair[1].name
                )));
            }
        }
        Ok(BandScheme { bands })
    }

    /// delta 0.5–4, theta 4–8, alpha 8–12, beta 12–30, gamma 30–45 Hz.
    pub fn standard() -> Self {
        BandScheme {
            bands: vec![
                Band::new("delta", 0.5, 4.0),
                Band::new("theta", 4.0, 8.0),
                Band::new("alpha", 8.0, 12.0),
                Band::new("beta", 12.0, 30.0),
                Band::new("gamma", 30.0, 45.0),
            ],
        }
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn mean_frequencies(&self) -> Vec<f64> {
        self.bands.iter().map(Band::mean_frequency).collect()
    }

    /// Index of the band containing `f`, if any.
    pub fn band_of(&self, f: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.contains(f))
    }
}

impl Default for BandScheme {
    fn default() -> Self {
        Self::standard()
    }
}

/// Tapering applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

/// One-sided amplitude spectra of every channel of a window, in µV.
///
/// Amplitudes are scaled so that a sinusoid of amplitude `a` centred on a
/// bin reads `a` in that bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    frequencies: Vec<f64>,
    /// `[channel, bin]`
    amplitudes: Array2<f64>,
}

impl PowerSpectrum {
    pub fn new(frequencies: Vec<f64>, amplitudes: Array2<f64>) -> Result<Self> {
        if amplitudes.ncols() != frequencies.len() {
            return Err(Error::Shape(format!(
                "{} frequencies for {} amplitude bins",
                frequencies.len(),
                amplitudes.ncols()
            )));
        }
        Ok(PowerSpectrum {
            frequencies,
            amplitudes,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn amplitudes(&self) -> &Array2<f64> {
        &self.amplitudes
    }

    pub fn channel(&self, ch: usize) -> ArrayView1<'_, f64> {
        self.amplitudes.row(ch)
    }

    pub fn channel_count(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn bin_spacing(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Bins (DC excluded) belonging to each band.
    fn band_bins(&self, bands: &BandScheme) -> Result<Vec<Vec<usize>>> {
        let mut bins = vec![Vec::new(); bands.len()];
        for (k, &f) in self.frequencies.iter().enumerate().skip(1) {
            if let Some(b) = bands.band_of(f) {
                bins[b].push(k);
            }
        }
        if let Some(empty) = bins.iter().position(Vec::is_empty) {
            return Err(Error::EmptyBand(bands.bands()[empty].name.clone()));
        }
        Ok(bins)
    }
}

/// Reusable transform for windows of a fixed width.
pub struct SpectrumAnalyzer {
    width: usize,
    rate: f64,
    fft: Arc<dyn Fft<f64>>,
    taper: Vec<f64>,
    gain: f64,
}

impl fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("width", &self.width)
            .field("rate", &self.rate)
            .finish_non_exhaustive()
    }
}

impl SpectrumAnalyzer {
    pub fn new(width: usize, rate: f64, taper: Taper) -> Result<Self> {
        if width < 2 {
            return Err(Error::Shape(format!("window width {width} < 2")));
        }
        let taper: Vec<f64> = match taper {
            Taper::Rectangular => vec![1.0; width],
            Taper::Hann => (0..width)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / width as f64).cos())
                .collect(),
        };
        let gain = taper.iter().sum();
        Ok(SpectrumAnalyzer {
            width,
            rate,
            fft: FftPlanner::new().plan_fft_forward(width),
            taper,
            gain,
        })
    }

    pub fn bins(&self) -> usize {
        self.width / 2 + 1
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.bins())
            .map(|k| k as f64 * self.rate / self.width as f64)
            .collect()
    }

    /// Spectrum of a `[channel × width]` block.
    pub fn analyze(&self, samples: ArrayView2<'_, f64>) -> Result<PowerSpectrum> {
        if samples.ncols() != self.width {
            return Err(Error::Shape(format!(
                "window has {} samples, analyzer expects {}",
                samples.ncols(),
                self.width
            )));
        }
        let bins = self.bins();
        let mut amplitudes = Array2::zeros((samples.nrows(), bins));
        let mut buf = vec![Complex::new(0.0, 0.0); self.width];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (row, mut out) in samples.rows().into_iter().zip(amplitudes.rows_mut()) {
            for ((slot, &x), &w) in buf.iter_mut().zip(row.iter()).zip(&self.taper) {
                *slot = Complex::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, a) in out.iter_mut().enumerate() {
                *a = one_sided_scale(k, self.width) * buf[k].norm() / self.gain;
            }
        }
        PowerSpectrum::new(self.frequencies(), amplitudes)
    }
}

/// 1 for DC and (even-width) Nyquist, 2 for every other one-sided bin.
pub fn one_sided_scale(k: usize, width: usize) -> f64 {
    if k == 0 || (width.is_multiple_of(2) && k == width / 2) {
        1.0
    } else {
        2.0
    }
}

/// Rectangular-window amplitude spectrum of a window.
pub fn power_spectrum(window: &Window<'_>, rate: f64) -> Result<PowerSpectrum> {
    SpectrumAnalyzer::new(window.width(), rate, Taper::Rectangular)?.analyze(window.samples)
}

/// Mean amplitude per band and channel, `[band, channel]`, in µV.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCentroids(pub Array2<f64>);

/// Centroid over the mean in-band amplitude, `[band, channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRatios(pub Array2<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct BandProfile {
    pub centroids: BandCentroids,
    pub ratios: BandRatios,
}

pub fn band_centroids(spec: &PowerSpectrum, bands: &BandScheme) -> Result<BandCentroids> {
    let bins = spec.band_bins(bands)?;
    let mut c = Array2::zeros((bands.len(), spec.channel_count()));
    for (ch, amps) in spec.amplitudes.rows().into_iter().enumerate() {
        for (b, idx) in bins.iter().enumerate() {
            c[[b, ch]] = idx.iter().map(|&k| amps[k]).sum::<f64>() / idx.len() as f64;
        }
    }
    Ok(BandCentroids(c))
}

/// Divides each centroid by its channel's mean amplitude over the union of
/// all band bins.
pub fn band_ratios(
    centroids: &BandCentroids,
    spec: &PowerSpectrum,
    bands: &BandScheme,
) -> Result<BandRatios> {
    let bins = spec.band_bins(bands)?;
    let union: Vec<usize> = bins.concat();
    if centroids.0.dim() != (bands.len(), spec.channel_count()) {
        return Err(Error::Shape(format!(
            "centroids {:?} do not match {} bands x {} channels",
            centroids.0.dim(),
            bands.len(),
            spec.channel_count()
        )));
    }
    let mut p = centroids.0.clone();
    for (ch, amps) in spec.amplitudes.rows().into_iter().enumerate() {
        let avg = union.iter().map(|&k| amps[k]).sum::<f64>() / union.len() as f64;
        if !(avg > 0.0 && avg.is_finite()) {
            return Err(Error::DegenerateChannel(ch.to_string()));
        }
        p.column_mut(ch).mapv_inplace(|v| v / avg);
    }
    Ok(BandRatios(p))
}

pub fn band_profile(spec: &PowerSpectrum, bands: &BandScheme) -> Result<BandProfile> {
    let centroids = band_centroids(spec, bands)?;
    let ratios = band_ratios(&centroids, spec, bands)?;
    Ok(BandProfile { centroids, ratios })
}

/// How per-channel brain-rate terms are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    #[default]
    Mean,
}

impl Aggregation {
    pub fn code(self) -> u8 {
        match self {
            Aggregation::Sum => 0,
            Aggregation::Mean => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Aggregation::Sum),
            1 => Some(Aggregation::Mean),
            _ => None,
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::InvalidConfig(format!("unknown aggregation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrainRate {
    /// Hz
    pub value: f64,
    pub mode: Aggregation,
}

pub fn brain_rate(ratios: &BandRatios, bands: &BandScheme, mode: Aggregation) -> Result<BrainRate> {
    let p = &ratios.0;
    if p.nrows() != bands.len() || p.ncols() == 0 {
        return Err(Error::Shape(format!(
            "ratio matrix {:?} for {} bands",
            p.dim(),
            bands.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateChannel("non-finite band ratio".into()));
    }
    let weights = bands.mean_frequencies();
    let total: f64 = p
        .columns()
        .into_iter()
        .map(|col| col.iter().zip(&weights).map(|(p, f)| f * p).sum::<f64>())
        .sum();
    let value = match mode {
        Aggregation::Sum => total,
        Aggregation::Mean => total / p.ncols() as f64,
    };
    Ok(BrainRate { value, mode })
}

/// Full spectral path for one window: spectrum, ratios, brain rate.
pub fn window_brain_rate(
    analyzer: &SpectrumAnalyzer,
    window: &Window<'_>,
    bands: &BandScheme,
    mode: Aggregation,
) -> Result<BrainRate> {
    let spec = analyzer.analyze(window.samples)?;
    let centroids = band_centroids(&spec, bands)?;
    let ratios = band_ratios(&centroids, &spec, bands)?;
    brain_rate(&ratios, bands, mode)
}
