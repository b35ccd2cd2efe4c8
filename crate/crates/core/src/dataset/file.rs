//! `NRDS` dataset files.
//!
//! ```text
//! "NRDS" u16 version  u16 z  u16 grid  u16 bands  u8 aggregation
//! u32 trials  u64 train  u64 validation  u64 test
//! per trial:  participant\0 trial\0  TOPO block of its window maps  f64 rate per window
//! per record: u8 split (0 train, 1 validation, 2 test)  u32 trial  u32 start window  f32 target
//! ```
//!
//! Each trial's maps are stored once; a record names its trial block and
//! first window, and its `z` inputs are the maps that follow.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{Assembled, Provenance, SequenceRecord, SequenceSample, TrialSeries};
use crate::codec::*;
use crate::error::{Error, Result};
use crate::spectral::{Aggregation, BrainRate};
use crate::topomap::{read_tensor_body, read_tensor_header, write_tensor_body, write_tensor_header, TopoMap};

pub const DATASET_MAGIC: &[u8; 4] = b"NRDS";
pub const DATASET_VERSION: u16 = 1;

const SPLITS: usize = 3;

/// Trial maps plus train/validation/test sequence records over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub z: usize,
    pub mode: Aggregation,
    pub trials: Vec<TrialSeries>,
    pub train: Vec<SequenceRecord>,
    pub validation: Vec<SequenceRecord>,
    pub test: Vec<SequenceRecord>,
    index: HashMap<(String, String), usize>,
}

impl Dataset {
    pub fn new(z: usize, trials: Vec<TrialSeries>, assembled: &Assembled) -> Result<Self> {
        let mode = shared_mode(&trials)?;
        let dataset = Dataset {
            z,
            mode,
            index: index_of(&trials)?,
            trials,
            train: assembled.train.clone(),
            validation: assembled.validation.clone(),
            test: assembled.test.clone(),
        };
        for rec in dataset.records() {
            dataset.sample(rec)?;
        }
        Ok(dataset)
    }

    pub fn grid(&self) -> usize {
        self.trials.iter().flat_map(|t| t.maps.first()).next().map_or(0, |m| m.grid())
    }

    pub fn bands(&self) -> usize {
        self.trials.iter().flat_map(|t| t.maps.first()).next().map_or(0, |m| m.bands())
    }

    pub fn records(&self) -> impl Iterator<Item = &SequenceRecord> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    pub fn trial(&self, participant: &str, trial: &str) -> Option<&TrialSeries> {
        self.index
            .get(&(participant.to_string(), trial.to_string()))
            .map(|&i| &self.trials[i])
    }

    /// Resolves a record to its input maps.
    pub fn sample(&self, record: &SequenceRecord) -> Result<SequenceSample<'_>> {
        let p = &record.provenance;
        let t = self
            .trial(&p.participant, &p.trial)
            .ok_or_else(|| Error::Format(format!("no trial {}/{}", p.participant, p.trial)))?;
        if p.start_window + self.z >= t.maps.len() {
            return Err(Error::TooFewWindows {
                needed: p.start_window + self.z + 1,
                found: t.maps.len(),
            });
        }
        Ok(SequenceSample {
            inputs: &t.maps[p.start_window..p.start_window + self.z],
            target: record.target,
            start_window: p.start_window,
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = |e| Error::Format(format!("write: {e}"));
        let counts = [self.train.len(), self.validation.len(), self.test.len()];
        write_header(w, self.z, self.grid(), self.bands(), self.mode, self.trials.len(), counts).map_err(io)?;
        for t in &self.trials {
            write_trial(w, t).map_err(io)?;
        }
        for (split, records) in [&self.train, &self.validation, &self.test].into_iter().enumerate() {
            write_records(w, split, records, &self.index)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn shared_mode(trials: &[TrialSeries]) -> Result<Aggregation> {
    let mut modes = trials.iter().flat_map(|t| &t.rates).map(|r| r.mode);
    let first = modes.next().unwrap_or_default();
    match modes.find(|&m| m != first) {
        Some(other) => Err(Error::MixedAggregation(first.to_string(), other.to_string())),
        None => Ok(first),
    }
}

fn index_of(trials: &[TrialSeries]) -> Result<HashMap<(String, String), usize>> {
    let mut index = HashMap::with_capacity(trials.len());
    for (i, t) in trials.iter().enumerate() {
        if index.insert((t.participant.clone(), t.trial.clone()), i).is_some() {
            return Err(Error::DuplicateLabel(format!("{}/{}", t.participant, t.trial)));
        }
    }
    Ok(index)
}

fn write_header<W: Write>(
    w: &mut W,
    z: usize,
    grid: usize,
    bands: usize,
    mode: Aggregation,
    trials: usize,
    counts: [usize; SPLITS],
) -> std::io::Result<()> {
    w.write_all(DATASET_MAGIC)?;
    put_u16(w, DATASET_VERSION)?;
    put_u16(w, z as u16)?;
    put_u16(w, grid as u16)?;
    put_u16(w, bands as u16)?;
    w.write_all(&[mode.code()])?;
    put_u32(w, trials as u32)?;
    for c in counts {
        put_u64(w, c as u64)?;
    }
    Ok(())
}

fn write_trial<W: Write>(w: &mut W, t: &TrialSeries) -> std::io::Result<()> {
    put_cstr(w, &t.participant)?;
    put_cstr(w, &t.trial)?;
    let (grid, bands) = t.maps.first().map_or((0, 0), |m| (m.grid(), m.bands()));
    write_tensor_header(w, grid, bands, t.maps.len())?;
    for m in &t.maps {
        write_tensor_body(w, m)?;
    }
    for r in &t.rates {
        put_f64(w, r.value)?;
    }
    Ok(())
}

fn write_records<W: Write>(
    w: &mut W,
    split: usize,
    records: &[SequenceRecord],
    index: &HashMap<(String, String), usize>,
) -> Result<()> {
    for rec in records {
        let p = &rec.provenance;
        let &trial = index
            .get(&(p.participant.clone(), p.trial.clone()))
            .ok_or_else(|| Error::Format(format!("record refers to unknown trial {}/{}", p.participant, p.trial)))?;
        let io = |e| Error::Format(format!("write: {e}"));
        w.write_all(&[split as u8]).map_err(io)?;
        put_u32(w, trial as u32).map_err(io)?;
        put_u32(w, p.start_window as u32).map_err(io)?;
        put_f32(w, rec.target.value as f32).map_err(io)?;
    }
    Ok(())
}

/// Streams trial blocks to disk as they are produced, so only one trial's
/// maps need to be in memory at a time. Counts are patched into the header
/// by [`DatasetWriter::finish`].
pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<File>,
    z: usize,
    shape: Option<(usize, usize)>,
    mode: Option<Aggregation>,
    index: HashMap<(String, String), usize>,
}

impl DatasetWriter {
    pub fn create(path: impl AsRef<Path>, z: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        write_header(&mut out, z, 0, 0, Aggregation::default(), 0, [0; SPLITS]).map_err(|e| Error::io(&path, e))?;
        Ok(DatasetWriter {
            path,
            out,
            z,
            shape: None,
            mode: None,
            index: HashMap::new(),
        })
    }

    pub fn push_trial(&mut self, trial: &TrialSeries) -> Result<()> {
        for m in &trial.maps {
            let shape = (m.grid(), m.bands());
            if *self.shape.get_or_insert(shape) != shape || m.data.dim().1 != shape.0 {
                return Err(Error::Shape(format!("map shape {:?} in trial {}", m.data.dim(), trial.trial)));
            }
        }
        if trial.maps.len() != trial.rates.len() {
            return Err(Error::Shape(format!(
                "trial {} has {} maps and {} rates",
                trial.trial,
                trial.maps.len(),
                trial.rates.len()
            )));
        }
        for r in &trial.rates {
            let mode = *self.mode.get_or_insert(r.mode);
            if mode != r.mode {
                return Err(Error::MixedAggregation(mode.to_string(), r.mode.to_string()));
            }
        }
        let key = (trial.participant.clone(), trial.trial.clone());
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateLabel(format!("{}/{}", key.0, key.1)));
        }
        self.index.insert(key, self.index.len());
        write_trial(&mut self.out, trial).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self, assembled: &Assembled) -> Result<()> {
        let splits = [&assembled.train, &assembled.validation, &assembled.test];
        for rec in splits.iter().flat_map(|s| s.iter()) {
            if self.mode.is_some_and(|m| m != rec.target.mode) {
                return Err(Error::MixedAggregation(
                    self.mode.unwrap_or_default().to_string(),
                    rec.target.mode.to_string(),
                ));
            }
        }
        for (split, records) in splits.into_iter().enumerate() {
            write_records(&mut self.out, split, records, &self.index)?;
        }
        let (grid, bands) = self.shape.unwrap_or((0, 0));
        let counts = splits.map(|s| s.len());
        let path = self.path;
        let io = |e| Error::io(&path, e);
        let mut file = self.out.into_inner().map_err(|e| io(e.into_error()))?;
        file.seek(SeekFrom::Start(0)).map_err(io)?;
        write_header(
            &mut file,
            self.z,
            grid,
            bands,
            self.mode.unwrap_or_default(),
            self.index.len(),
            counts,
        )
        .map_err(io)?;
        file.sync_all().map_err(io)
    }
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Dataset> {
    let fmt = |e: std::io::Error| Error::Format(format!("dataset: {e}"));
    let magic = get_array::<4, _>(r).map_err(fmt)?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format(format!("bad dataset magic {magic:?}")));
    }
    let version = get_u16(r).map_err(fmt)?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let z = get_u16(r).map_err(fmt)? as usize;
    let grid = get_u16(r).map_err(fmt)? as usize;
    let bands = get_u16(r).map_err(fmt)? as usize;
    let code = get_array::<1, _>(r).map_err(fmt)?[0];
    let mode = Aggregation::from_code(code).ok_or_else(|| Error::Format(format!("aggregation code {code}")))?;
    let trial_count = get_u32(r).map_err(fmt)? as usize;
    let mut counts = [0usize; SPLITS];
    for c in &mut counts {
        *c = get_u64(r).map_err(fmt)? as usize;
    }

    let mut trials = Vec::with_capacity(trial_count);
    for _ in 0..trial_count {
        let participant = get_cstr(r, 4096).map_err(fmt)?;
        let trial = get_cstr(r, 4096).map_err(fmt)?;
        let (g, b, n) = read_tensor_header(r)?;
        if n > 0 && (g, b) != (grid, bands) {
            return Err(Error::Format(format!("trial {trial} has {g}x{g}x{b} maps, header says {grid}x{grid}x{bands}")));
        }
        let mut maps = Vec::with_capacity(n);
        for w in 0..n {
            maps.push(TopoMap {
                data: read_tensor_body(r, g, b)?,
                trial_id: trial.clone(),
                window_start: w,
            });
        }
        let rates = (0..n)
            .map(|_| Ok(BrainRate { value: get_f64(r).map_err(fmt)?, mode }))
            .collect::<Result<Vec<_>>>()?;
        trials.push(TrialSeries {
            participant,
            trial,
            maps,
            rates,
        });
    }

    let mut splits: [Vec<SequenceRecord>; SPLITS] = Default::default();
    for (split, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let tag = get_array::<1, _>(r).map_err(fmt)?[0] as usize;
            let trial = get_u32(r).map_err(fmt)? as usize;
            let start = get_u32(r).map_err(fmt)? as usize;
            let target = get_f32(r).map_err(fmt)? as f64;
            let t = trials
                .get(trial)
                .ok_or_else(|| Error::Format(format!("record refers to trial {trial} of {trial_count}")))?;
            if tag != split {
                return Err(Error::Format(format!("record tagged split {tag} in section {split}")));
            }
            splits[split].push(SequenceRecord {
                provenance: Provenance {
                    participant: t.participant.clone(),
                    trial: t.trial.clone(),
                    start_window: start,
                },
                target: BrainRate { value: target, mode },
            });
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(fmt)? != 0 {
        return Err(Error::Format("trailing bytes after dataset".into()));
    }

    let [train, validation, test] = splits;
    let dataset = Dataset {
        z,
        mode,
        index: index_of(&trials)?,
        trials,
        train,
        validation,
        test,
    };
    for rec in dataset.records() {
        dataset.sample(rec)?;
    }
    Ok(dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(&mut BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{assemble, ExperimentPlan};
    use ndarray::Array3;

    fn series(participant: &str, trial: &str, windows: usize, seed: f32) -> TrialSeries {
        TrialSeries {
            participant: participant.into(),
            trial: trial.into(),
            maps: (0..windows)
                .map(|w| TopoMap {
                    data: Array3::from_shape_fn((4, 4, 2), |(r, c, b)| seed + (w * 100 + r * 10 + c) as f32 + b as f32 * 0.5),
                    trial_id: trial.into(),
                    window_start: w,
                })
                .collect(),
            rates: (0..windows)
                .map(|w| BrainRate {
                    value: seed as f64 + w as f64 * 0.25,
                    mode: Aggregation::Mean,
                })
                .collect(),
        }
    }

    fn small() -> (Vec<TrialSeries>, Assembled) {
        let trials: Vec<_> = (0..4).map(|v| series("p00", &format!("v{v}"), 10, v as f32)).collect();
        let targets: Vec<_> = trials.iter().map(|t| t.targets()).collect();
        let a = assemble(&ExperimentPlan::within_subject(5), 0, &targets, 3).unwrap();
        (trials, a)
    }

    #[test]
    fn round_trip_through_memory_and_disk() {
        let (trials, a) = small();
        let ds = Dataset::new(3, trials.clone(), &a).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let back = read_dataset(&mut buf.as_slice()).unwrap();
        assert_eq!(back.train, ds.train);
        assert_eq!(back.test, ds.test);
        assert_eq!(back.trials.len(), 4);
        for (x, y) in back.trials.iter().zip(&ds.trials) {
            assert_eq!(x.rates, y.rates);
            for (m, n) in x.maps.iter().zip(&y.maps) {
                assert_eq!(m.data, n.data);
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.nrds");
        let mut w = DatasetWriter::create(&path, 3).unwrap();
        for t in &trials {
            w.push_trial(t).unwrap();
        }
        w.finish(&a).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), buf);
        let loaded = load_dataset(&path).unwrap();
        let s = loaded.sample(&loaded.test[0]).unwrap();
        assert_eq!(s.inputs.len(), 3);
        assert_eq!(s.target, loaded.test[0].target);
    }

    #[test]
    fn sample_inputs_precede_target_window() {
        let (trials, a) = small();
        let ds = Dataset::new(3, trials, &a).unwrap();
        for rec in ds.records() {
            let s = ds.sample(rec).unwrap();
            let t = ds.trial(&rec.provenance.participant, &rec.provenance.trial).unwrap();
            let start = rec.provenance.start_window;
            assert_eq!(s.inputs[0].data, t.maps[start].data);
            assert_eq!(rec.target.value, t.rates[start + 3].value as f32 as f64);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (trials, a) = small();
        let mut buf = Vec::new();
        Dataset::new(3, trials, &a).unwrap().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_dataset(&mut bad.as_slice()), Err(Error::Format(_))));
        assert!(read_dataset(&mut &buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_dataset(&mut long.as_slice()).is_err());
    }

    #[test]
    fn writer_rejects_mixed_modes() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = DatasetWriter::create(dir.path().join("x"), 3).unwrap();
        w.push_trial(&series("p", "a", 5, 0.0)).unwrap();
        let mut other = series("p", "b", 5, 0.0);
        other.rates[2].mode = Aggregation::Sum;
        assert!(matches!(w.push_trial(&other), Err(Error::MixedAggregation(..))));
    }
}
