//! Two-stage training: the CNN regressor with plain SGD, then the full
//! sequence model with Adam on top of the inherited encoder.
//!
//! Minibatch gradients are summed over fixed chunks of samples in parallel
//! and reduced in chunk order, so results do not depend on the thread count.

mod metrics;
mod optim;
mod report;

use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SequenceRecord};
use crate::error::{Error, Result};
use crate::nn::{Architecture, Network, NetworkKind, Normalization};
use crate::signal::synth::trial_seed;

pub use metrics::{mape, mse, pearson};
pub use optim::{adam_step, sgd_step, AdamConfig, AdamState};
pub use report::{
    batch_size_study, evaluate, prediction_traces, write_traces_csv, EpochLog, Evaluation, Prediction, StopReason,
    StudyRow, TraceRow, TrainReport, VideoCorrelation,
};

/// Samples per gradient work unit.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Stage-1 learning rate.
    pub sgd_lr: f64,
    /// Stage-2 optimizer.
    pub adam: AdamConfig,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Keep the inherited encoder fixed in stage 2 instead of fine-tuning it.
    pub freeze_encoder: bool,
    /// Also measure inference-mode MSE on the training split after every epoch.
    pub monitor_train: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            sgd_lr: 1e-3,
            adam: AdamConfig::default(),
            patience: 6,
            max_epochs: 100,
            seed: 0,
            freeze_encoder: false,
            monitor_train: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.sgd_lr > 0.0 && self.adam.lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) || self.adam.eps <= 0.0 {
            return bad("adam betas must lie in [0, 1) and eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(AdamConfig),
}

/// Validation-loss early stopping with strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_epoch: usize,
    pub best_loss: f64,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_epoch: 0,
            best_loss: f64::INFINITY,
            epoch: 0,
        }
    }

    /// Records the next epoch's loss (epochs count from 1). Returns whether
    /// it improved on the best so far.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.epoch += 1;
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = self.epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.epoch >= self.best_epoch + self.patience
    }
}

/// Replays a validation trace: `(epoch training stops after, best epoch)`,
/// or `None` when the trace ends first.
pub fn stopping_epoch(trace: &[f64], patience: usize) -> Option<(usize, usize)> {
    let mut es = EarlyStopping::new(patience);
    for &loss in trace {
        es.observe(loss);
        if es.should_stop() {
            return Some((es.epoch, es.best_epoch));
        }
    }
    None
}

/// Band and target statistics over the maps and targets reachable from
/// the training split.
pub fn fit_normalization(data: &Dataset) -> Result<Normalization> {
    let mut used = vec![false; data.trials.len()];
    for r in &data.train {
        if let Some(i) = data
            .trials
            .iter()
            .position(|t| t.participant == r.provenance.participant && t.trial == r.provenance.trial)
        {
            used[i] = true;
        }
    }
    let maps = data.trials.iter().zip(&used).filter(|(_, &u)| u).flat_map(|(t, _)| &t.maps);
    Normalization::fit(maps, data.train.iter().map(|r| r.target.value))
}

/// Runs one stage in place and leaves `net` at its best validation epoch.
///
/// The optimized loss is the minibatch MSE measured in units of the
/// target standard deviation; reported losses are in Hz².
pub fn train_network(net: &mut Network, data: &Dataset, optimizer: Optimizer, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if data.validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let n = net.params().len();
    let sigma2 = net.normalization().target_std.powi(2);
    let frozen = (net.kind() == NetworkKind::Full && cfg.freeze_encoder).then(|| net.encoder_range());
    let mut adam = AdamState::new(if matches!(optimizer, Optimizer::Adam(_)) { n } else { 0 });
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = net.params().to_vec();
    let mut epochs = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut sq_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / (batch.len() as f64 * sigma2);
            let base = b * cfg.batch_size;
            let parts = batch
                .par_chunks(GRAD_CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut g = vec![0.0; n];
                    let mut sq = 0.0;
                    for (k, &i) in chunk.iter().enumerate() {
                        let rec = &data.train[i];
                        let sample = data.sample(rec)?;
                        let seed = trial_seed(cfg.seed, epoch, base + c * GRAD_CHUNK + k);
                        let y = rec.target.value;
                        let yhat = net.accumulate_gradient(net.params(), sample.inputs, y, Some(seed), scale, &mut g)?;
                        sq += (yhat - y) * (yhat - y);
                    }
                    Ok((g, sq))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; n];
            for (g, sq) in parts {
                sq_sum += sq;
                for (a, v) in grad.iter_mut().zip(g) {
                    *a += v;
                }
            }
            if let Some(r) = &frozen {
                grad[r.clone()].fill(0.0);
            }
            if !grad.iter().all(|v| v.is_finite()) || !sq_sum.is_finite() {
                return Err(Error::Diverged { epoch, loss: sq_sum });
            }
            match optimizer {
                Optimizer::Sgd { lr } => sgd_step(net.params_mut(), &grad, lr)?,
                Optimizer::Adam(a) => adam_step(net.params_mut(), &grad, &mut adam, &a)?,
            }
        }
        let train_loss = sq_sum / data.train.len() as f64;
        let val_mse = split_mse(net, data, &data.validation)?;
        if !val_mse.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_mse });
        }
        let train_mse = if cfg.monitor_train { Some(split_mse(net, data, &data.train)?) } else { None };
        let log = EpochLog {
            epoch,
            train_loss,
            train_mse,
            val_mse,
            seconds: started.elapsed().as_secs_f64(),
        };
        info!(
            "{:?} epoch {epoch}: train {train_loss:.6} val {val_mse:.6} ({:.2}s)",
            net.kind(),
            log.seconds
        );
        epochs.push(log);
        if stopper.observe(val_mse) {
            best.copy_from_slice(net.params());
        }
        if stopper.should_stop() {
            stop = StopReason::EarlyStopped;
            break;
        }
    }
    net.params_mut().copy_from_slice(&best);
    debug!("restored epoch {} (val {:.6})", stopper.best_epoch, stopper.best_loss);
    Ok(TrainReport {
        kind: net.kind(),
        optimizer,
        parameters: n,
        epochs,
        best_epoch: stopper.best_epoch,
        stop,
        test: None,
    })
}

/// Inference-mode MSE in Hz² over `records`.
pub fn split_mse(net: &Network, data: &Dataset, records: &[SequenceRecord]) -> Result<f64> {
    let (y, yhat) = predict_records(net, data, records)?;
    mse(&y, &yhat)
}

pub(crate) fn predict_records(net: &Network, data: &Dataset, records: &[SequenceRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let yhat = records
        .par_iter()
        .map(|r| net.predict(data.sample(r)?.inputs))
        .collect::<Result<Vec<_>>>()?;
    Ok((records.iter().map(|r| r.target.value).collect(), yhat))
}

/// Stage 1: a CNN regressor from a fresh seeded initialisation, with
/// normalization fitted on the training split.
pub fn train_cnn(arch: &Architecture, data: &Dataset, cfg: &TrainConfig) -> Result<(Network, TrainReport)> {
    let mut net = Network::cnn(arch.clone(), cfg.seed)?;
    net.set_normalization(fit_normalization(data)?)?;
    let mut report = train_network(&mut net, data, Optimizer::Sgd { lr: cfg.sgd_lr }, cfg)?;
    if !data.test.is_empty() {
        report.test = Some(evaluate(&net, data, &data.test)?);
    }
    Ok((net, report))
}

/// Stage 2: the full model with the encoder and normalization of `cnn`.
pub fn train_full(cnn: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<(Network, TrainReport)> {
    let mut net = Network::full(cnn.architecture().clone(), cfg.seed.wrapping_add(1))?;
    net.load_encoder_from(cnn)?;
    let mut report = train_network(&mut net, data, Optimizer::Adam(cfg.adam), cfg)?;
    if !data.test.is_empty() {
        report.test = Some(evaluate(&net, data, &data.test)?);
    }
    Ok((net, report))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::{assemble, ExperimentPlan, TrialSeries};
    use crate::spectral::{Aggregation, BrainRate};
    use crate::topomap::TopoMap;
    use ndarray::Array3;
    use rand::Rng;

    /// Random maps whose next-window target is a smooth function of the
    /// current map, so the mapping is learnable.
    pub(crate) fn toy_dataset(arch: &Architecture, videos: usize, windows: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials: Vec<TrialSeries> = (0..videos)
            .map(|v| {
                let maps: Vec<TopoMap> = (0..windows)
                    .map(|w| TopoMap {
                        data: Array3::from_shape_fn((arch.grid, arch.grid, arch.bands), |_| rng.random_range(0.0..1.0)),
                        trial_id: format!("v{v:02}"),
                        window_start: w,
                    })
                    .collect();
                let rates = (0..windows)
                    .map(|w| {
                        let prev = &maps[w.saturating_sub(1)].data;
                        let value = 10.0 + 2.0 * prev.mean().unwrap() as f64 + prev[[0, 0, 0]] as f64;
                        BrainRate { value, mode: Aggregation::Mean }
                    })
                    .collect();
                TrialSeries {
                    participant: "p01".into(),
                    trial: format!("v{v:02}"),
                    maps,
                    rates,
                }
            })
            .collect();
        let targets: Vec<_> = trials.iter().map(|t| t.targets()).collect();
        let assembled = assemble(&ExperimentPlan::within_subject(seed), 0, &targets, arch.sequence).unwrap();
        Dataset::new(arch.sequence, trials, &assembled).unwrap()
    }

    #[test]
    fn early_stopping_trace() {
        assert_eq!(stopping_epoch(&[5.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0], 6), Some((8, 2)));
        assert_eq!(stopping_epoch(&[5.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0], 6), None);
        // a strict improvement resets the counter
        assert_eq!(stopping_epoch(&[3.0, 3.0, 2.9, 3.0, 3.0], 2), Some((5, 3)));
        assert_eq!(stopping_epoch(&[1.0, 1.0], 1), Some((2, 1)));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.adam.beta2 = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn training_is_deterministic_across_thread_counts() {
        let arch = Architecture::toy();
        let data = toy_dataset(&arch, 4, 12, 3);
        let cfg = TrainConfig {
            batch_size: 5,
            max_epochs: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let (cnn, r1) = train_cnn(&arch, &data, &cfg).unwrap();
                let (full, r2) = train_full(&cnn, &data, &cfg).unwrap();
                (full.params().to_vec(), r1.epochs[0].train_loss, r2.epochs[0].train_loss)
            })
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert_eq!(a.2.to_bits(), b.2.to_bits());
        assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn best_epoch_is_restored_and_run_is_bounded() {
        let arch = Architecture::toy();
        let data = toy_dataset(&arch, 4, 12, 4);
        let cfg = TrainConfig {
            batch_size: 4,
            max_epochs: 30,
            patience: 2,
            seed: 1,
            ..TrainConfig::default()
        };
        let (net, report) = train_cnn(&arch, &data, &cfg).unwrap();
        assert!(report.epochs.len() <= report.best_epoch + cfg.patience);
        let best = report.epochs[report.best_epoch - 1].val_mse;
        assert!(report.epochs.iter().all(|e| e.val_mse >= best));
        assert_eq!(split_mse(&net, &data, &data.validation).unwrap().to_bits(), best.to_bits());
    }

    #[test]
    fn frozen_encoder_stays_put() {
        let arch = Architecture::toy();
        let data = toy_dataset(&arch, 4, 12, 5);
        let cfg = TrainConfig {
            batch_size: 8,
            max_epochs: 2,
            freeze_encoder: true,
            ..TrainConfig::default()
        };
        let (cnn, _) = train_cnn(&arch, &data, &cfg).unwrap();
        let (full, _) = train_full(&cnn, &data, &cfg).unwrap();
        let r = full.encoder_range();
        assert_eq!(&full.params()[r.clone()], &cnn.params()[r.clone()]);

        let tuned = TrainConfig { freeze_encoder: false, ..cfg };
        let (full, _) = train_full(&cnn, &data, &tuned).unwrap();
        assert_ne!(&full.params()[r.clone()], &cnn.params()[r]);
    }

    #[test]
    fn stage_one_fits_the_training_set() {
        let arch = Architecture::toy();
        let data = toy_dataset(&arch, 4, 12, 6);
        let cfg = TrainConfig {
            batch_size: 4,
            max_epochs: 60,
            patience: 60,
            monitor_train: true,
            ..TrainConfig::default()
        };
        let (_, report) = train_cnn(&arch, &data, &cfg).unwrap();
        let first = report.epochs[0].train_mse.unwrap();
        let last = report.epochs.last().unwrap().train_mse.unwrap();
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn divergence_is_reported() {
        let arch = Architecture::toy();
        let data = toy_dataset(&arch, 4, 12, 7);
        let cfg = TrainConfig {
            sgd_lr: 1e12,
            max_epochs: 5,
            ..TrainConfig::default()
        };
        assert!(matches!(train_cnn(&arch, &data, &cfg), Err(Error::Diverged { .. })));
    }
}
