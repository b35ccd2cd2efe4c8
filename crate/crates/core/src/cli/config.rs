use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{ExperimentPlan, ModelKind, DEFAULT_SEQUENCE_LENGTH};
use crate::error::{Error, Result};
use crate::nn::Architecture;
use crate::signal::{load_montage, MixtureConfig, Montage};
use crate::spectral::{Aggregation, Band, BandScheme};
use crate::training::TrainConfig;
use crate::windowing::WindowConfig;

/// Everything a run needs. An empty TOML file yields the canonical pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub paths: PathsSection,
    pub signal: SignalSection,
    pub bands: Vec<Band>,
    pub window: WindowSection,
    pub topomap: TopomapSection,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Directory of `<participant>/<trial>.eegr` files; defaults to
    /// `<out>/recordings`.
    pub recordings: Option<PathBuf>,
    /// `LABEL x y z` text file; defaults to the bundled 32-electrode layout.
    pub montage: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub sample_rate: f64,
    /// Synthetic corpus shape used by `synth`.
    pub participants: usize,
    pub videos: usize,
    pub duration: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub length_s: f64,
    pub shift_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopomapSection {
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub z: usize,
    pub aggregation: Aggregation,
    pub plan: ModelKind,
    pub persons: usize,
    /// Monte Carlo repetition to materialise.
    pub repetition: usize,
}

/// Network shape; grid, bands and sequence length come from the other
/// sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub blocks: Vec<Vec<usize>>,
    pub lstm_hidden: usize,
    pub variation_filters: usize,
    pub dense: usize,
    pub dropout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 0,
            paths: PathsSection::default(),
            signal: SignalSection::default(),
            bands: BandScheme::standard().bands().to_vec(),
            window: WindowSection::default(),
            topomap: TopomapSection::default(),
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
        }
    }
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            recordings: None,
            montage: None,
            out: PathBuf::from("out"),
        }
    }
}

impl Default for SignalSection {
    fn default() -> Self {
        let m = MixtureConfig::default();
        SignalSection {
            sample_rate: m.sample_rate,
            participants: 1,
            videos: 40,
            duration: m.duration,
            noise_std: m.noise_std,
        }
    }
}

impl Default for WindowSection {
    fn default() -> Self {
        let w = WindowConfig::default();
        WindowSection {
            length_s: w.length_s,
            shift_ms: w.shift_ms,
        }
    }
}

impl Default for TopomapSection {
    fn default() -> Self {
        TopomapSection { grid: 32 }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            z: DEFAULT_SEQUENCE_LENGTH,
            aggregation: Aggregation::default(),
            plan: ModelKind::WithinSubject,
            persons: 1,
            repetition: 0,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let a = Architecture::default();
        ModelSection {
            blocks: a.blocks,
            lstm_hidden: a.lstm_hidden,
            variation_filters: a.variation_filters,
            dense: a.dense,
            dropout: a.dropout,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn band_scheme(&self) -> Result<BandScheme> {
        BandScheme::new(self.bands.clone())
    }

    pub fn window_config(&self) -> WindowConfig {
        WindowConfig {
            length_s: self.window.length_s,
            shift_ms: self.window.shift_ms,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            grid: self.topomap.grid,
            bands: self.bands.len(),
            sequence: self.dataset.z,
            blocks: self.model.blocks.clone(),
            lstm_hidden: self.model.lstm_hidden,
            variation_filters: self.model.variation_filters,
            dense: self.model.dense,
            dropout: self.model.dropout,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn plan(&self) -> ExperimentPlan {
        let mut plan = match self.dataset.plan {
            ModelKind::WithinSubject => ExperimentPlan::within_subject(self.seed),
            ModelKind::AcrossSubject => ExperimentPlan::across_subject(self.dataset.persons, self.seed),
        };
        plan.persons = self.dataset.persons;
        plan
    }

    pub fn mixture(&self) -> MixtureConfig {
        MixtureConfig {
            duration: self.signal.duration,
            sample_rate: self.signal.sample_rate,
            noise_std: self.signal.noise_std,
            ..MixtureConfig::default()
        }
    }

    pub fn montage(&self) -> Result<Montage> {
        match &self.paths.montage {
            Some(p) => load_montage(p),
            None => Ok(Montage::standard_32()),
        }
    }

    pub fn recordings_dir(&self) -> PathBuf {
        self.paths.recordings.clone().unwrap_or_else(|| self.paths.out.join("recordings"))
    }

    /// Checks every section and that configured input paths exist.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.band_scheme()?;
        let w = self.window_config();
        w.width(self.signal.sample_rate)?;
        w.step(self.signal.sample_rate)?;
        if self.signal.participants == 0 || self.signal.videos == 0 {
            return bad("signal.participants and signal.videos must be positive".into());
        }
        if self.dataset.z == 0 {
            return bad("dataset.z must be positive".into());
        }
        if self.dataset.repetition >= self.plan().repetitions {
            return bad(format!(
                "dataset.repetition {} exceeds the plan's {} repetitions",
                self.dataset.repetition,
                self.plan().repetitions
            ));
        }
        self.plan().validate()?;
        self.architecture().validate()?;
        self.train_config().validate()?;
        for p in self.paths.recordings.iter().chain(&self.paths.montage) {
            if !p.exists() {
                return bad(format!("path {} does not exist", p.display()));
            }
        }
        Ok(())
    }
}
