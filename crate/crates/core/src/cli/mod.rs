//! The `neurorate` command line: one subcommand per pipeline stage, all
//! reading and writing files under the output directory.
//!
//! | subcommand  | reads                        | writes |
//! |-------------|------------------------------|--------|
//! | `synth`     | config                       | `recordings/<participant>/<trial>.eegr`, `montage.txt` |
//! | `brainrate` | recordings                   | `brainrate.csv` |
//! | `topomap`   | recordings                   | `topomaps/<participant>/<trial>.topo`, optional PNGs |
//! | `dataset`   | recordings                   | `dataset.nrds`, `splits.json` |
//! | `train`     | `dataset.nrds`               | `cnn.nrmd`, `full.nrmd`, epoch logs, `metrics.json` |
//! | `eval`      | dataset and models           | `eval_predictions.csv`, `eval.json` |
//! | `report`    | dataset and models           | `traces.csv`, per-video plots, MAPE summary |
//!
//! Each run also writes `manifest-<subcommand>.json`.

mod config;
pub mod plot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use indexmap::IndexMap;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{DatasetSection, ModelSection, PathsSection, RunConfig, SignalSection, TopomapSection, WindowSection};

use crate::dataset::{assemble, load_dataset, process_trial, trial_rates, Dataset, DatasetWriter};
use crate::error::{Error, Result};
use crate::nn::{load_model, save_model, Network};
use crate::signal::synth::mixture_trial;
use crate::signal::{load_recording_for, save_recording, synthesize, EegRecording, Montage};
use crate::spectral::{SpectrumAnalyzer, Taper};
use crate::topomap::{save_tensors, TopoProjector};
use crate::training::{evaluate, mape, prediction_traces, train_cnn, train_full, write_traces_csv, Evaluation};
use crate::windowing::segment;

#[derive(Debug, Parser)]
#[command(name = "neurorate", version, about = "Brain-rate pipeline: synthesis, spectral maps, datasets, training")]
pub struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory (overrides `paths.out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic band-mixture corpus.
    Synth,
    /// Brain rate of every window of every recording.
    Brainrate,
    /// Spectral head-map tensors for every recording.
    Topomap {
        /// Also render per-band grayscale PNGs of one window per trial.
        #[arg(long)]
        emit_png: bool,
        #[arg(long, default_value_t = 0)]
        png_window: usize,
    },
    /// Build the sequence dataset of the configured plan.
    Dataset,
    /// Train the CNN, then the full model.
    Train,
    /// Test-split metrics of the trained models.
    Eval,
    /// Prediction traces, plots and MAPE summaries.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Brainrate => "brainrate",
            Command::Topomap { .. } => "topomap",
            Command::Dataset => "dataset",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Report => "report",
        }
    }
}

impl Cli {
    /// Loads the config file, if any, and applies flag overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.threads {
            c.threads = t;
        }
        if let Some(o) = &self.out {
            c.paths.out = o.clone();
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub formats: IndexMap<String, u16>,
    pub seed: u64,
    pub threads: usize,
    pub config_sha256: String,
    pub config: RunConfig,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<(u64, String)> {
    use std::io::Read;
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    let mut n = 0u64;
    loop {
        let k = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
        n += k as u64;
    }
    Ok((n, hex::encode(h.finalize())))
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Validates `config`, runs one subcommand on a pool of `config.threads`
/// workers and writes its manifest.
pub fn run(command: &Command, config: &RunConfig) -> Result<Manifest> {
    stage("config", config.validate())?;
    let out = &config.paths.out;
    mkdir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let produced = pool.install(|| {
        let name = command.name();
        stage(
            name,
            match command {
                Command::Synth => synth(config),
                Command::Brainrate => brainrate(config),
                Command::Topomap { emit_png, png_window } => topomap(config, *emit_png, *png_window),
                Command::Dataset => dataset(config),
                Command::Train => train(config),
                Command::Eval => eval(config),
                Command::Report => report(config),
            },
        )
    })?;

    let mut artifacts = Vec::with_capacity(produced.len());
    for p in produced {
        let (bytes, sha256) = file_sha256(&p)?;
        let rel = p.strip_prefix(out).unwrap_or(&p);
        artifacts.push(Artifact {
            path: rel.to_string_lossy().replace('\\', "/"),
            bytes,
            sha256,
        });
    }
    let formats = [
        ("recording", crate::signal::RECORDING_VERSION),
        ("tensor", crate::topomap::TENSOR_VERSION),
        ("dataset", crate::dataset::DATASET_VERSION),
        ("model", crate::nn::MODEL_VERSION),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let manifest = Manifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        formats,
        seed: config.seed,
        threads: config.threads,
        config_sha256: sha256_hex(config.to_toml().as_bytes()),
        config: config.clone(),
        artifacts,
    };
    let path = out.join(format!("manifest-{}.json", command.name()));
    write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serialises"))?;
    info!("{}: {} artifacts, manifest {}", command.name(), manifest.artifacts.len(), path.display());
    Ok(manifest)
}

/// Recordings under the configured directory, grouped by participant in
/// sorted order.
fn recordings(config: &RunConfig) -> Result<IndexMap<String, Vec<PathBuf>>> {
    let dir = config.recordings_dir();
    let sorted = |d: &Path| -> Result<Vec<PathBuf>> {
        let mut v: Vec<PathBuf> = fs::read_dir(d)
            .map_err(|e| Error::io(d, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        v.sort();
        Ok(v)
    };
    let mut out = IndexMap::new();
    for p in sorted(&dir)?.into_iter().filter(|p| p.is_dir()) {
        let files: Vec<PathBuf> = sorted(&p)?.into_iter().filter(|f| f.extension().is_some_and(|e| e == "eegr")).collect();
        if !files.is_empty() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), files);
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("no recordings found; run `synth` or set paths.recordings"));
    }
    Ok(out)
}

fn load(config: &RunConfig, montage: &Montage, path: &Path) -> Result<EegRecording> {
    load_recording_for(path, config.signal.sample_rate, montage)
}

fn synth(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let montage = config.montage()?;
    let bands = config.band_scheme()?;
    let mix = config.mixture();
    let root = config.recordings_dir();
    let cells: Vec<(usize, usize)> = (1..=config.signal.participants)
        .flat_map(|p| (1..=config.signal.videos).map(move |t| (p, t)))
        .collect();
    let mut files = cells
        .par_iter()
        .map(|&(p, t)| {
            let rec = synthesize(&mixture_trial(&mix, &bands, &montage, p, t, config.seed))?;
            let dir = root.join(&rec.participant_id);
            mkdir(&dir)?;
            let path = dir.join(format!("{}.eegr", rec.trial_id));
            save_recording(&rec, &path)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    let mpath = config.paths.out.join("montage.txt");
    write(&mpath, montage.to_text())?;
    files.push(mpath);
    info!("synthesised {} recordings", cells.len());
    Ok(files)
}

fn brainrate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let montage = config.montage()?;
    let bands = config.band_scheme()?;
    let wc = config.window_config();
    let rate = config.signal.sample_rate;
    let analyzer = SpectrumAnalyzer::new(wc.width(rate)?, rate, Taper::Rectangular)?;
    let step = wc.step(rate)?;
    let mut text = String::new();
    for (_, files) in recordings(config)? {
        for f in files {
            let rec = load(config, &montage, &f)?;
            let t = trial_rates(&rec, &analyzer, &bands, &wc, config.dataset.aggregation)?;
            for (i, br) in t.rates.iter().enumerate() {
                let _ = writeln!(text, "{}/{},{},{}", t.participant, t.trial, i * step, br.value);
            }
        }
    }
    let path = config.paths.out.join("brainrate.csv");
    write(&path, text)?;
    Ok(vec![path])
}

fn projector(config: &RunConfig, montage: &Montage, rec: &EegRecording) -> Result<TopoProjector> {
    let rate = config.signal.sample_rate;
    TopoProjector::new(
        montage,
        rec.channel_names(),
        config.band_scheme()?,
        config.topomap.grid,
        config.window_config().width(rate)?,
        rate,
    )
}

fn topomap(config: &RunConfig, emit_png: bool, png_window: usize) -> Result<Vec<PathBuf>> {
    let montage = config.montage()?;
    let wc = config.window_config();
    let mut produced = Vec::new();
    let mut proj: Option<(Vec<String>, TopoProjector)> = None;
    for (participant, files) in recordings(config)? {
        let dir = config.paths.out.join("topomaps").join(&participant);
        mkdir(&dir)?;
        for f in files {
            let rec = load(config, &montage, &f)?;
            if proj.as_ref().is_none_or(|(names, _)| names != rec.channel_names()) {
                proj = Some((rec.channel_names().to_vec(), projector(config, &montage, &rec)?));
            }
            let p = &proj.as_ref().unwrap().1;
            let maps = segment(&rec, &wc)?.par_iter().map(|w| p.tensor(w)).collect::<Result<Vec<_>>>()?;
            let path = dir.join(format!("{}.topo", rec.trial_id));
            save_tensors(&maps, &path)?;
            produced.push(path);
            if emit_png {
                let map = maps.get(png_window).ok_or(Error::TooFewWindows {
                    needed: png_window + 1,
                    found: maps.len(),
                })?;
                let pdir = config.paths.out.join("png");
                mkdir(&pdir)?;
                for (b, band) in config.bands.iter().enumerate() {
                    let path = pdir.join(format!("{participant}_{}_w{png_window:04}_{}.png", rec.trial_id, band.name));
                    plot::save_gray(&plot::band_image(map, b, 8), &path)?;
                    produced.push(path);
                }
            }
        }
    }
    Ok(produced)
}

fn dataset(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let montage = config.montage()?;
    let wc = config.window_config();
    let all = recordings(config)?;
    let available: Vec<&String> = all.keys().collect();
    let plan = config.plan();
    let chosen = plan.participants_for(config.dataset.repetition, &available)?;
    let path = config.paths.out.join("dataset.nrds");
    let mut writer = DatasetWriter::create(&path, config.dataset.z)?;
    let mut targets = Vec::new();
    let mut proj: Option<(Vec<String>, TopoProjector)> = None;
    for participant in &chosen {
        for f in &all[participant] {
            let rec = load(config, &montage, f)?;
            if proj.as_ref().is_none_or(|(names, _)| names != rec.channel_names()) {
                proj = Some((rec.channel_names().to_vec(), projector(config, &montage, &rec)?));
            }
            let series = process_trial(&rec, &proj.as_ref().unwrap().1, &wc, config.dataset.aggregation)?;
            writer.push_trial(&series)?;
            targets.push(series.targets());
        }
    }
    let assembled = assemble(&plan, config.dataset.repetition, &targets, config.dataset.z)?;
    let c = assembled.counts();
    info!("dataset: {} sequences ({} train / {} validation / {} test)", c.total, c.train, c.validation, c.test);
    writer.finish(&assembled)?;
    let splits = config.paths.out.join("splits.json");
    write(&splits, serde_json::to_string_pretty(&assembled.splits).expect("splits serialise"))?;
    Ok(vec![path, splits])
}

fn load_data(config: &RunConfig) -> Result<Dataset> {
    load_dataset(config.paths.out.join("dataset.nrds"))
}

fn load_models(config: &RunConfig) -> Result<(Network, Network)> {
    Ok((load_model(config.paths.out.join("cnn.nrmd"))?, load_model(config.paths.out.join("full.nrmd"))?))
}

/// Deterministic outcome of `train`, free of timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub cnn_best_epoch: usize,
    pub cnn_epochs: usize,
    pub cnn_val_mse: f64,
    pub cnn_test_mse: Option<f64>,
    pub cnn_test_mape: Option<f64>,
    pub full_best_epoch: usize,
    pub full_epochs: usize,
    pub full_val_mse: f64,
    pub full_test_mse: Option<f64>,
    pub full_test_mape: Option<f64>,
    pub adam_eps: f64,
}

fn train(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_data(config)?;
    let cfg = config.train_config();
    let arch = config.architecture();
    let (mut cnn, r1) = train_cnn(&arch, &data, &cfg)?;
    let (mut full, r2) = train_full(&cnn, &data, &cfg)?;
    let out = &config.paths.out;
    let paths: Vec<PathBuf> = ["cnn.nrmd", "full.nrmd", "train_cnn.csv", "train_full.csv", "train_summary.txt", "metrics.json"]
        .iter()
        .map(|n| out.join(n))
        .collect();
    // metrics below describe the stored f32 models
    cnn.round_to_f32();
    full.round_to_f32();
    save_model(&cnn, &paths[0])?;
    save_model(&full, &paths[1])?;
    r1.write_csv(&paths[2])?;
    r2.write_csv(&paths[3])?;
    write(&paths[4], format!("{}\n{}", r1.summary(), r2.summary()))?;
    let e1 = evaluate(&cnn, &data, &data.test).ok();
    let e2 = evaluate(&full, &data, &data.test).ok();
    let metrics = TrainMetrics {
        cnn_best_epoch: r1.best_epoch,
        cnn_epochs: r1.epochs.len(),
        cnn_val_mse: r1.best().val_mse,
        cnn_test_mse: e1.as_ref().map(|e| e.mse),
        cnn_test_mape: e1.as_ref().map(|e| e.mape),
        full_best_epoch: r2.best_epoch,
        full_epochs: r2.epochs.len(),
        full_val_mse: r2.best().val_mse,
        full_test_mse: e2.as_ref().map(|e| e.mse),
        full_test_mape: e2.as_ref().map(|e| e.mape),
        adam_eps: cfg.adam.eps,
    };
    write(&paths[5], serde_json::to_string_pretty(&metrics).expect("metrics serialise"))?;
    print!("{}\n{}", r1.summary(), r2.summary());
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub model: String,
    pub samples: usize,
    pub mse: f64,
    pub mape: f64,
    pub pearson: IndexMap<String, Option<f64>>,
}

fn summarise(model: &str, e: &Evaluation) -> EvalSummary {
    EvalSummary {
        model: model.to_string(),
        samples: e.predictions.len(),
        mse: e.mse,
        mape: e.mape,
        pearson: e.per_video.iter().map(|v| (format!("{}/{}", v.participant, v.trial), v.pearson)).collect(),
    }
}

fn eval(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_data(config)?;
    let (cnn, full) = load_models(config)?;
    let mut csv = String::from("model,participant,trial,window,y,yhat\n");
    let mut summaries = Vec::new();
    for (name, net) in [("cnn", &cnn), ("cnnlstm", &full)] {
        let e = evaluate(net, &data, &data.test)?;
        for p in &e.predictions {
            let _ = writeln!(csv, "{name},{},{},{},{},{}", p.participant, p.trial, p.window, p.y, p.yhat);
        }
        println!("{name}: test mse {:.6}, mape {:.4}%", e.mse, e.mape);
        summaries.push(summarise(name, &e));
    }
    let out = &config.paths.out;
    let (a, b) = (out.join("eval_predictions.csv"), out.join("eval.json"));
    write(&a, csv)?;
    write(&b, serde_json::to_string_pretty(&summaries).expect("summary serialises"))?;
    Ok(vec![a, b])
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn report(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = load_data(config)?;
    let (cnn, full) = load_models(config)?;
    let rows = prediction_traces(&data, &data.test, &cnn, &full)?;
    let out = config.paths.out.join("report");
    mkdir(&out)?;
    let mut produced = vec![out.join("traces.csv")];
    write_traces_csv(&rows, &produced[0])?;

    let mut videos: IndexMap<&str, Vec<&crate::training::TraceRow>> = IndexMap::new();
    for r in &rows {
        videos.entry(&r.video_id).or_default().push(r);
    }
    let mut text = String::from("video,mape_cnn,mape_cnnlstm\n");
    let (mut m1, mut m2) = (Vec::new(), Vec::new());
    for (video, rs) in &videos {
        let x: Vec<f64> = rs.iter().map(|r| r.window_index as f64).collect();
        let y: Vec<f64> = rs.iter().map(|r| r.y).collect();
        let a: Vec<f64> = rs.iter().map(|r| r.yhat_cnn).collect();
        let b: Vec<f64> = rs.iter().map(|r| r.yhat_cnnlstm).collect();
        let path = out.join(format!("trace_{}.png", video.replace('/', "_")));
        plot::line_plot(&x, &[(&y, plot::BLACK), (&a, plot::BLUE), (&b, plot::RED)], &path)?;
        produced.push(path);
        let (ma, mb) = (mape(&y, &a)?, mape(&y, &b)?);
        let _ = writeln!(text, "{video},{ma},{mb}");
        m1.push(ma);
        m2.push(mb);
    }
    text.push_str("\nmodel,videos,min,q1,median,q3,max,mean\n");
    for (name, v) in [("cnn", &mut m1), ("cnnlstm", &mut m2)] {
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let _ = writeln!(
            text,
            "{name},{},{},{},{},{},{},{}",
            v.len(),
            v[0],
            quantile(v, 0.25),
            quantile(v, 0.5),
            quantile(v, 0.75),
            v[v.len() - 1],
            mean
        );
        let path = out.join(format!("mape_{name}.png"));
        plot::histogram(v, 10, &path)?;
        produced.push(path);
    }
    let summary = out.join("mape_summary.csv");
    write(&summary, text)?;
    produced.push(summary);
    Ok(produced)
}
