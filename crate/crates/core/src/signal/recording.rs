use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::Montage;
use crate::codec::*;
use crate::error::{Error, Result};

pub const RECORDING_MAGIC: &[u8; 4] = b"EEGR";
pub const RECORDING_VERSION: u16 = 1;

const MAX_LABEL_BYTES: usize = 64;

/// A multi-channel EEG trial in microvolts, `samples[[channel, time]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    sample_rate: f64,
    channel_names: Vec<String>,
    samples: Array2<f64>,
    pub participant_id: String,
    pub trial_id: String,
}

impl EegRecording {
    pub fn new(
        sample_rate: f64,
        channel_names: Vec<String>,
        samples: Array2<f64>,
        participant_id: impl Into<String>,
        trial_id: impl Into<String>,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::MalformedHeader(format!("sample rate {sample_rate} must be positive")));
        }
        if samples.nrows() != channel_names.len() {
            return Err(Error::Shape(format!(
                "{} channel names for {} sample rows",
                channel_names.len(),
                samples.nrows()
            )));
        }
        if samples.ncols() == 0 {
            return Err(Error::MalformedHeader("recording has no samples".into()));
        }
        let mut seen = HashSet::new();
        for name in &channel_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateLabel(name.clone()));
            }
        }
        Ok(EegRecording {
            sample_rate,
            channel_names,
            samples,
            participant_id: participant_id.into(),
            trial_id: trial_id.into(),
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn channel_count(&self) -> usize {
        self.samples.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration(&self) -> f64 {
        self.sample_count() as f64 / self.sample_rate
    }

    /// Checks that every channel has a position in `montage`.
    pub fn check_montage(&self, montage: &Montage) -> Result<()> {
        match self.channel_names.iter().find(|c| !montage.contains(c)) {
            Some(c) => Err(Error::UnknownChannel(c.clone())),
            None => Ok(()),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(RECORDING_MAGIC)?;
        put_u16(w, RECORDING_VERSION)?;
        put_f64(w, self.sample_rate)?;
        put_u32(w, self.channel_count() as u32)?;
        put_u64(w, self.sample_count() as u64)?;
        for name in &self.channel_names {
            put_cstr(w, name)?;
        }
        put_f32_slice(w, self.samples.iter().map(|&v| v as f32))
    }
}

/// Writes a recording in the `EEGR` binary format.
pub fn save_recording(recording: &EegRecording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    recording
        .write_to(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads an `EEGR` file and validates it against the bundled 32-channel
/// montage. Participant and trial ids are taken from the parent directory
/// name and the file stem.
pub fn load_recording(path: impl AsRef<Path>, expected_rate: f64) -> Result<EegRecording> {
    load_recording_for(path, expected_rate, &Montage::standard_32())
}

/// Like [`load_recording`], validating channel labels against `montage`.
pub fn load_recording_for(
    path: impl AsRef<Path>,
    expected_rate: f64,
    montage: &Montage,
) -> Result<EegRecording> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let trial_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let participant_id = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rec = read_recording(&mut BufReader::new(file), participant_id, trial_id)?;
    if rec.sample_rate != expected_rate {
        return Err(Error::RateMismatch {
            expected: expected_rate,
            found: rec.sample_rate,
        });
    }
    rec.check_montage(montage)?;
    Ok(rec)
}

/// Decodes an `EEGR` stream without montage or rate checks.
pub fn read_recording<R: Read>(
    r: &mut R,
    participant_id: impl Into<String>,
    trial_id: impl Into<String>,
) -> Result<EegRecording> {
    let header = |e: std::io::Error| Error::MalformedHeader(e.to_string());
    let magic = get_array::<4, _>(r).map_err(header)?;
    if &magic != RECORDING_MAGIC {
        return Err(Error::MalformedHeader(format!("bad magic {magic:?}")));
    }
    let version = get_u16(r).map_err(header)?;
    if version != RECORDING_VERSION {
        return Err(Error::MalformedHeader(format!("unsupported version {version}")));
    }
    let rate = get_f64(r).map_err(header)?;
    let channels = get_u32(r).map_err(header)? as usize;
    let samples = get_u64(r).map_err(header)? as usize;
    if channels == 0 || samples == 0 {
        return Err(Error::MalformedHeader(format!(
            "{channels} channels x {samples} samples"
        )));
    }
    let mut names = Vec::with_capacity(channels);
    for _ in 0..channels {
        names.push(get_cstr(r, MAX_LABEL_BYTES).map_err(header)?);
    }

    let mut data = Vec::with_capacity(channels * samples);
    let mut row = vec![0u8; samples * 4];
    for name in &names {
        let got = read_fully(r, &mut row).map_err(header)?;
        if got != row.len() {
            return Err(Error::RowLength {
                channel: name.clone(),
                expected: samples,
                found: got / 4,
            });
        }
        data.extend(
            row.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64),
        );
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(header)? != 0 {
        return Err(Error::MalformedHeader("trailing bytes after sample block".into()));
    }
    let samples = Array2::from_shape_vec((channels, samples), data).expect("sized above");
    EegRecording::new(rate, names, samples, participant_id, trial_id)
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn tiny() -> EegRecording {
        let samples = Array2::from_shape_fn((2, 5), |(c, t)| c as f64 * 10.0 + t as f64 * 0.5);
        EegRecording::new(128.0, vec!["Cz".into(), "Pz".into()], samples, "p1", "t1").unwrap()
    }

    fn encode(rec: &EegRecording) -> Vec<u8> {
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bytes = encode(&tiny());
        let back = read_recording(&mut bytes.as_slice(), "p1", "t1").unwrap();
        assert_eq!(back, tiny());
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn empty_stream_is_a_header_error() {
        let err = read_recording(&mut [].as_slice(), "", "").unwrap_err();
        assert!(matches!(err, Error::MalformedHeader(_)));
    }

    #[test]
    fn short_row_is_reported() {
        let mut bytes = encode(&tiny());
        bytes.truncate(bytes.len() - 8);
        let err = read_recording(&mut bytes.as_slice(), "", "").unwrap_err();
        assert!(
            matches!(err, Error::RowLength { ref channel, expected: 5, found: 3 } if channel == "Pz"),
            "{err}"
        );
    }

    #[test]
    fn duplicate_channels_are_rejected() {
        let s = Array2::zeros((2, 3));
        let err = EegRecording::new(128.0, vec!["Cz".into(), "Cz".into()], s, "", "").unwrap_err();
        assert!(matches!(err, Error::DuplicateLabel(_)));
    }

    #[test]
    fn unknown_channel_fails_montage_check() {
        let s = Array2::zeros((1, 3));
        let rec = EegRecording::new(128.0, vec!["Xx9".into()], s, "", "").unwrap();
        let err = rec.check_montage(&Montage::standard_32()).unwrap_err();
        assert!(matches!(err, Error::UnknownChannel(l) if l == "Xx9"));
    }
}
