use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{mape, mse, pearson, predict_records, train_cnn, train_full, Optimizer, TrainConfig};
use crate::dataset::{Dataset, SequenceRecord};
use crate::error::{Error, Result};
use crate::nn::{Architecture, Network, NetworkKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean squared error of the training minibatches as seen by the
    /// optimizer, dropout on.
    pub train_loss: f64,
    pub train_mse: Option<f64>,
    pub val_mse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub participant: String,
    pub trial: String,
    /// Index of the predicted window.
    pub window: usize,
    pub y: f64,
    pub yhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoCorrelation {
    pub participant: String,
    pub trial: String,
    pub samples: usize,
    /// `None` when either series is constant.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mse: f64,
    /// Percent.
    pub mape: f64,
    pub per_video: Vec<VideoCorrelation>,
    pub predictions: Vec<Prediction>,
}

/// Inference-mode metrics over `records`.
pub fn evaluate(net: &Network, data: &Dataset, records: &[SequenceRecord]) -> Result<Evaluation> {
    let (y, yhat) = predict_records(net, data, records)?;
    let predictions: Vec<Prediction> = records
        .iter()
        .zip(&yhat)
        .map(|(r, &p)| Prediction {
            participant: r.provenance.participant.clone(),
            trial: r.provenance.trial.clone(),
            window: r.provenance.start_window + data.z,
            y: r.target.value,
            yhat: p,
        })
        .collect();
    let mut videos: IndexMap<(&str, &str), (Vec<f64>, Vec<f64>)> = IndexMap::new();
    for p in &predictions {
        let e = videos.entry((&p.participant, &p.trial)).or_default();
        e.0.push(p.y);
        e.1.push(p.yhat);
    }
    let per_video = videos
        .iter()
        .map(|((part, trial), (a, b))| VideoCorrelation {
            participant: part.to_string(),
            trial: trial.to_string(),
            samples: a.len(),
            pearson: pearson(a, b).ok(),
        })
        .collect();
    Ok(Evaluation {
        mse: mse(&y, &yhat)?,
        mape: mape(&y, &yhat)?,
        per_video,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: NetworkKind,
    pub optimizer: Optimizer,
    pub parameters: usize,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub test: Option<Evaluation>,
}

impl TrainReport {
    pub fn best(&self) -> &EpochLog {
        &self.epochs[self.best_epoch - 1]
    }

    /// Per-epoch log, one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_mse,val_mse,seconds\n");
        for e in &self.epochs {
            let tm = e.train_mse.map_or(String::new(), |v| format!("{v:.9}"));
            let _ = writeln!(s, "{},{:.9},{},{:.9},{:.3}", e.epoch, e.train_loss, tm, e.val_mse, e.seconds);
        }
        s
    }

    /// Human-readable block for the end of a run.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {:?} ({} parameters)", self.kind, self.parameters);
        match self.optimizer {
            Optimizer::Sgd { lr } => {
                let _ = writeln!(s, "optimizer: sgd lr={lr:e}");
            }
            Optimizer::Adam(a) => {
                let _ = writeln!(s, "optimizer: adam lr={:e} beta1={} beta2={} eps={:e}", a.lr, a.beta1, a.beta2, a.eps);
            }
        }
        let stop = match self.stop {
            StopReason::EarlyStopped => "early stopping",
            StopReason::MaxEpochs => "epoch limit",
        };
        let _ = writeln!(s, "epochs: {} (stopped by {stop})", self.epochs.len());
        let _ = writeln!(s, "best epoch: {} (val mse {:.6})", self.best_epoch, self.best().val_mse);
        let secs: f64 = self.epochs.iter().map(|e| e.seconds).sum();
        let _ = writeln!(s, "wall clock: {:.2}s ({:.2}s/epoch)", secs, secs / self.epochs.len() as f64);
        if let Some(t) = &self.test {
            let _ = writeln!(s, "test mse: {:.6}", t.mse);
            let _ = writeln!(s, "test mape: {:.4}%", t.mape);
            for v in &t.per_video {
                let r = v.pearson.map_or("undefined".to_string(), |r| format!("{r:.4}"));
                let _ = writeln!(s, "pearson {}/{}: {r} (n={})", v.participant, v.trial, v.samples);
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Observed brain rate next to both stages' predictions for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub video_id: String,
    pub window_index: usize,
    pub y: f64,
    pub yhat_cnn: f64,
    pub yhat_cnnlstm: f64,
}

pub fn prediction_traces(data: &Dataset, records: &[SequenceRecord], cnn: &Network, full: &Network) -> Result<Vec<TraceRow>> {
    if cnn.kind() != NetworkKind::Cnn || full.kind() != NetworkKind::Full {
        return Err(Error::InvalidConfig("traces need a cnn and a full network".into()));
    }
    let (y, a) = predict_records(cnn, data, records)?;
    let (_, b) = predict_records(full, data, records)?;
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| TraceRow {
            video_id: format!("{}/{}", r.provenance.participant, r.provenance.trial),
            window_index: r.provenance.start_window + data.z,
            y: y[i],
            yhat_cnn: a[i],
            yhat_cnnlstm: b[i],
        })
        .collect())
}

pub fn write_traces_csv(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("video_id,window_index,y,yhat_cnn,yhat_cnnlstm\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.video_id, r.window_index, r.y, r.yhat_cnn, r.yhat_cnnlstm);
    }
    let path = path.as_ref();
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub participant: String,
    pub batch_size: usize,
    pub cnn_epochs: usize,
    pub full_epochs: usize,
    pub test_mse: f64,
    pub test_mape: f64,
}

/// Both stages per participant dataset and batch size; test metrics are
/// those of the full model.
pub fn batch_size_study(
    arch: &Architecture,
    datasets: &[(String, &Dataset)],
    cfg: &TrainConfig,
    batch_sizes: &[usize],
) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for (participant, data) in datasets {
        for &batch_size in batch_sizes {
            let cfg = TrainConfig { batch_size, ..cfg.clone() };
            let (cnn, r1) = train_cnn(arch, data, &cfg)?;
            let (_, r2) = train_full(&cnn, data, &cfg)?;
            let test = r2.test.ok_or(Error::Empty("test split"))?;
            rows.push(StudyRow {
                participant: participant.clone(),
                batch_size,
                cnn_epochs: r1.epochs.len(),
                full_epochs: r2.epochs.len(),
                test_mse: test.mse,
                test_mape: test.mape,
            });
        }
    }
    Ok(rows)
}
