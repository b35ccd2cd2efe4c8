//! Self-supervised sequence samples, video-level splits and experiment
//! assembly.
//!
//! A sequence is `z` consecutive [`TopoMap`]s of one trial; its target is the
//! brain rate of the window that immediately follows it.

mod file;

use indexmap::IndexMap;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::synth::trial_seed;
use crate::signal::EegRecording;
use crate::spectral::{window_brain_rate, Aggregation, BandScheme, BrainRate, SpectrumAnalyzer};
use crate::topomap::{TopoMap, TopoProjector};
use crate::windowing::{segment, WindowConfig};

pub use file::{load_dataset, read_dataset, Dataset, DatasetWriter, DATASET_MAGIC, DATASET_VERSION};

pub const DEFAULT_SEQUENCE_LENGTH: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub participant: String,
    pub trial: String,
    /// Index of the first input window within the trial.
    pub start_window: usize,
}

/// `z` consecutive maps and the brain rate of window `start + z`.
#[derive(Debug, Clone, Copy)]
pub struct SequenceSample<'a> {
    pub inputs: &'a [TopoMap],
    pub target: BrainRate,
    pub start_window: usize,
}

/// Owned description of a sequence: where it comes from and what it predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub provenance: Provenance,
    pub target: BrainRate,
}

/// Number of sequences of length `z` in `windows` windows.
pub fn sequence_count(windows: usize, z: usize) -> Result<usize> {
    if z < 1 {
        return Err(Error::InvalidConfig("sequence length must be at least 1".into()));
    }
    if windows < z + 1 {
        return Err(Error::TooFewWindows {
            needed: z + 1,
            found: windows,
        });
    }
    Ok(windows - z)
}

/// One sample per start index; `maps` and `rates` are per-window and aligned.
pub fn build_sequences<'a>(maps: &'a [TopoMap], rates: &[BrainRate], z: usize) -> Result<Vec<SequenceSample<'a>>> {
    if maps.len() != rates.len() {
        return Err(Error::Shape(format!("{} maps but {} rates", maps.len(), rates.len())));
    }
    let n = sequence_count(maps.len(), z)?;
    check_single_mode(rates.iter())?;
    Ok((0..n)
        .map(|s| SequenceSample {
            inputs: &maps[s..s + z],
            target: rates[s + z],
            start_window: s,
        })
        .collect())
}

fn check_single_mode<'a>(mut rates: impl Iterator<Item = &'a BrainRate>) -> Result<Option<Aggregation>> {
    let Some(first) = rates.next().map(|r| r.mode) else {
        return Ok(None);
    };
    for r in rates {
        if r.mode != first {
            return Err(Error::MixedAggregation(first.to_string(), r.mode.to_string()));
        }
    }
    Ok(Some(first))
}

/// Per-window brain rates of one trial, without maps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTargets {
    pub participant: String,
    pub trial: String,
    pub rates: Vec<BrainRate>,
}

/// Per-window maps and brain rates of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSeries {
    pub participant: String,
    pub trial: String,
    pub maps: Vec<TopoMap>,
    pub rates: Vec<BrainRate>,
}

impl TrialSeries {
    pub fn sequences(&self, z: usize) -> Result<Vec<SequenceSample<'_>>> {
        build_sequences(&self.maps, &self.rates, z)
    }

    pub fn targets(&self) -> TrialTargets {
        TrialTargets {
            participant: self.participant.clone(),
            trial: self.trial.clone(),
            rates: self.rates.clone(),
        }
    }
}

/// Brain rate of every window of `recording`.
pub fn trial_rates(
    recording: &EegRecording,
    analyzer: &SpectrumAnalyzer,
    bands: &BandScheme,
    windows: &WindowConfig,
    mode: Aggregation,
) -> Result<TrialTargets> {
    let rates = segment(recording, windows)?
        .par_iter()
        .map(|w| window_brain_rate(analyzer, w, bands, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialTargets {
        participant: recording.participant_id.clone(),
        trial: recording.trial_id.clone(),
        rates,
    })
}

/// Maps and brain rates of every window of `recording`.
pub fn process_trial(
    recording: &EegRecording,
    projector: &TopoProjector,
    windows: &WindowConfig,
    mode: Aggregation,
) -> Result<TrialSeries> {
    let pairs = segment(recording, windows)?
        .par_iter()
        .map(|w| {
            let map = projector.tensor(w)?;
            let rate = window_brain_rate(projector.analyzer(), w, projector.bands(), mode)?;
            Ok((map, rate))
        })
        .collect::<Result<Vec<_>>>()?;
    let (maps, rates) = pairs.into_iter().unzip();
    Ok(TrialSeries {
        participant: recording.participant_id.clone(),
        trial: recording.trial_id.clone(),
        maps,
        rates,
    })
}

/// Disjoint train/validation/test video sets of one participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Sizes of a 70/15/15 split of `videos` whole videos.
pub fn split_sizes(videos: usize) -> Result<(usize, usize, usize)> {
    if videos < 3 {
        return Err(Error::InvalidConfig(format!("need at least 3 videos to split, got {videos}")));
    }
    let held_out = ((videos as f64 * 0.15).round() as usize).max(1);
    Ok((videos - 2 * held_out, held_out, held_out))
}

/// Shuffles whole videos and cuts them 70/15/15 (28/6/6 for 40 videos).
pub fn split_videos<S: AsRef<str>>(video_ids: &[S], seed: u64) -> Result<VideoSplit> {
    let (train, val, _) = split_sizes(video_ids.len())?;
    let mut ids: Vec<String> = video_ids.iter().map(|s| s.as_ref().to_string()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != ids.len() {
        return Err(Error::InvalidConfig("duplicate video ids".into()));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = ids.split_off(train + val);
    let validation = ids.split_off(train);
    Ok(VideoSplit {
        train: ids,
        validation,
        test,
    })
}

/// Per-participant video splits for one experiment repetition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub participants: IndexMap<String, VideoSplit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    WithinSubject,
    AcrossSubject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: ModelKind,
    pub persons: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn within_subject(seed: u64) -> Self {
        ExperimentPlan {
            kind: ModelKind::WithinSubject,
            persons: 1,
            repetitions: 2,
            seed,
        }
    }

    pub fn across_subject(persons: usize, seed: u64) -> Self {
        ExperimentPlan {
            kind: ModelKind::AcrossSubject,
            persons,
            repetitions: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.persons == 0 || self.repetitions == 0 {
            return Err(Error::InvalidConfig("plan needs at least one person and one repetition".into()));
        }
        if self.kind == ModelKind::WithinSubject && self.persons != 1 {
            return Err(Error::InvalidConfig("within-subject plans use exactly one person".into()));
        }
        Ok(())
    }

    /// Participants drawn for Monte Carlo repetition `repetition`, in the
    /// order they appear in `available`.
    pub fn participants_for<S: AsRef<str>>(&self, repetition: usize, available: &[S]) -> Result<Vec<String>> {
        self.validate()?;
        if self.persons > available.len() {
            return Err(Error::NotEnoughParticipants {
                requested: self.persons,
                available: available.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(self.seed, repetition, self.persons));
        let mut picked = index::sample(&mut rng, available.len(), self.persons).into_vec();
        picked.sort_unstable();
        Ok(picked.into_iter().map(|i| available[i].as_ref().to_string()).collect())
    }
}

/// Expected sequence counts of a plan whose participants all watched
/// `videos` videos of `windows` windows each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub total: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

pub fn plan_counts(persons: usize, videos: usize, windows: usize, z: usize) -> Result<SplitCounts> {
    let per_video = sequence_count(windows, z)?;
    let (train, validation, test) = split_sizes(videos)?;
    let scale = per_video * persons;
    Ok(SplitCounts {
        total: videos * scale,
        train: train * scale,
        validation: validation * scale,
        test: test * scale,
    })
}

/// Train/validation/test sequences of one repetition of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub repetition: usize,
    pub splits: SplitPlan,
    pub train: Vec<SequenceRecord>,
    pub validation: Vec<SequenceRecord>,
    pub test: Vec<SequenceRecord>,
}

impl Assembled {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts {
            total: self.train.len() + self.validation.len() + self.test.len(),
            train: self.train.len(),
            validation: self.validation.len(),
            test: self.test.len(),
        }
    }

    /// Sequences of the test set whose (participant, video) also occurs in
    /// the training set.
    pub fn leaked(&self) -> Vec<&SequenceRecord> {
        let seen: std::collections::HashSet<(&str, &str)> = self
            .train
            .iter()
            .map(|r| (r.provenance.participant.as_str(), r.provenance.trial.as_str()))
            .collect();
        self.test
            .iter()
            .chain(&self.validation)
            .filter(|r| seen.contains(&(r.provenance.participant.as_str(), r.provenance.trial.as_str())))
            .collect()
    }
}

/// Builds one repetition of `plan` from per-trial brain rates.
///
/// Participants are drawn at random for the repetition, each participant's
/// videos are split independently, and the per-participant sets are
/// concatenated in temporal order. Targets are rounded to `f32`, the
/// precision they are stored with.
pub fn assemble(plan: &ExperimentPlan, repetition: usize, trials: &[TrialTargets], z: usize) -> Result<Assembled> {
    check_single_mode(trials.iter().flat_map(|t| &t.rates))?;
    let mut by_participant: IndexMap<&str, Vec<&TrialTargets>> = IndexMap::new();
    for t in trials {
        by_participant.entry(t.participant.as_str()).or_default().push(t);
    }
    let available: Vec<&str> = by_participant.keys().copied().collect();
    let chosen = plan.participants_for(repetition, &available)?;

    let mut out = Assembled {
        repetition,
        splits: SplitPlan {
            seed: plan.seed,
            participants: IndexMap::new(),
        },
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (k, participant) in chosen.iter().enumerate() {
        let own = &by_participant[participant.as_str()];
        let videos: Vec<&str> = own.iter().map(|t| t.trial.as_str()).collect();
        let split = split_videos(&videos, trial_seed(plan.seed ^ 0x5EED, repetition, k))?;
        for t in own {
            let bucket = if split.train.contains(&t.trial) {
                &mut out.train
            } else if split.validation.contains(&t.trial) {
                &mut out.validation
            } else {
                &mut out.test
            };
            let n = sequence_count(t.rates.len(), z)?;
            bucket.extend((0..n).map(|s| SequenceRecord {
                provenance: Provenance {
                    participant: t.participant.clone(),
                    trial: t.trial.clone(),
                    start_window: s,
                },
                target: BrainRate {
                    value: t.rates[s + z].value as f32 as f64,
                    mode: t.rates[s + z].mode,
                },
            }));
        }
        out.splits.participants.insert(participant.clone(), split);
    }
    Ok(out)
}

/// Processes `recordings` and assembles one repetition of `plan` in memory.
/// Trials of participants the plan does not draw are dropped.
pub fn build_dataset(
    recordings: &[EegRecording],
    projector: &TopoProjector,
    windows: &WindowConfig,
    mode: Aggregation,
    plan: &ExperimentPlan,
    repetition: usize,
    z: usize,
) -> Result<Dataset> {
    let series = recordings
        .iter()
        .map(|r| process_trial(r, projector, windows, mode))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<TrialTargets> = series.iter().map(TrialSeries::targets).collect();
    let assembled = assemble(plan, repetition, &targets, z)?;
    let chosen = &assembled.splits.participants;
    let kept = series.into_iter().filter(|t| chosen.contains_key(&t.participant)).collect();
    Dataset::new(z, kept, &assembled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use proptest::prelude::*;

    fn rate(v: f64) -> BrainRate {
        BrainRate {
            value: v,
            mode: Aggregation::Mean,
        }
    }

    fn maps(n: usize) -> Vec<TopoMap> {
        (0..n)
            .map(|i| TopoMap {
                data: Array3::from_elem((2, 2, 1), i as f32),
                trial_id: "v".into(),
                window_start: i * 16,
            })
            .collect()
    }

    fn catalog(persons: usize, videos: usize, windows: usize) -> Vec<TrialTargets> {
        (0..persons)
            .flat_map(|p| {
                (0..videos).map(move |v| TrialTargets {
                    participant: format!("p{p:02}"),
                    trial: format!("v{v:02}"),
                    rates: (0..windows).map(|w| rate(10.0 + w as f64)).collect(),
                })
            })
            .collect()
    }

    #[test]
    fn full_video_gives_482_sequences() {
        assert_eq!(sequence_count(489, 7).unwrap(), 482);
        let m = maps(489);
        let r: Vec<_> = (0..489).map(|i| rate(i as f64)).collect();
        let seqs = build_sequences(&m, &r, 7).unwrap();
        assert_eq!(seqs.len(), 482);
        for s in &seqs {
            assert_eq!(s.inputs.len(), 7);
            assert_eq!(s.inputs[0].data[[0, 0, 0]] as usize, s.start_window);
            assert_eq!(s.target.value as usize, s.start_window + 7);
        }
    }

    #[test]
    fn eight_windows_make_one_sequence_and_seven_none() {
        let r: Vec<_> = (0..8).map(|i| rate(i as f64)).collect();
        let m = maps(8);
        let seqs = build_sequences(&m, &r, 7).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].target.value, 7.0);
        assert!(matches!(
            build_sequences(&m[..7], &r[..7], 7),
            Err(Error::TooFewWindows { needed: 8, found: 7 })
        ));
        assert!(build_sequences(&m, &r, 0).is_err());
    }

    #[test]
    fn mixed_modes_are_rejected() {
        let m = maps(9);
        let mut r: Vec<_> = (0..9).map(|i| rate(i as f64)).collect();
        r[4].mode = Aggregation::Sum;
        assert!(matches!(build_sequences(&m, &r, 7), Err(Error::MixedAggregation(..))));
    }

    #[test]
    fn forty_videos_split_28_6_6() {
        let ids: Vec<String> = (0..40).map(|i| format!("v{i:02}")).collect();
        let s = split_videos(&ids, 3).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (28, 6, 6));
        let mut all: Vec<_> = s.train.iter().chain(&s.validation).chain(&s.test).cloned().collect();
        all.sort();
        assert_eq!(all, ids);
        assert_eq!(s, split_videos(&ids, 3).unwrap());
        assert_ne!(s, split_videos(&ids, 4).unwrap());
        assert!(split_videos(&ids[..2], 0).is_err());
    }

    #[test]
    fn single_participant_counts() {
        let c = plan_counts(1, 40, 489, 7).unwrap();
        assert_eq!((c.total, c.train, c.validation, c.test), (19280, 13496, 2892, 2892));
        let a = assemble(&ExperimentPlan::within_subject(1), 0, &catalog(1, 40, 489), 7).unwrap();
        assert_eq!(a.counts(), c);
        assert!(a.leaked().is_empty());
    }

    #[test]
    fn repetitions_resample_participants() {
        let cat = catalog(9, 3, 10);
        let plan = ExperimentPlan::across_subject(3, 42);
        let a = assemble(&plan, 0, &cat, 7).unwrap();
        let b = assemble(&plan, 1, &cat, 7).unwrap();
        assert_eq!(a.counts(), b.counts());
        let pa: Vec<_> = a.splits.participants.keys().collect();
        let pb: Vec<_> = b.splits.participants.keys().collect();
        assert_ne!(pa, pb);
        assert_eq!(a, assemble(&plan, 0, &cat, 7).unwrap());
    }

    #[test]
    fn too_many_persons() {
        let plan = ExperimentPlan::across_subject(5, 0);
        assert!(matches!(
            assemble(&plan, 0, &catalog(3, 3, 9), 7),
            Err(Error::NotEnoughParticipants { requested: 5, available: 3 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn counts_follow_the_product_law(persons in 1usize..5, videos in 3usize..12, windows in 8usize..30, seed: u64) {
            let z = 7;
            let plan = if persons == 1 {
                ExperimentPlan::within_subject(seed)
            } else {
                ExperimentPlan::across_subject(persons, seed)
            };
            let a = assemble(&plan, 0, &catalog(persons + 1, videos, windows), z).unwrap();
            prop_assert_eq!(a.counts(), plan_counts(persons, videos, windows, z).unwrap());
            prop_assert_eq!(a.counts().total, videos * (windows - z) * persons);
            prop_assert!(a.leaked().is_empty());
        }
    }
}
