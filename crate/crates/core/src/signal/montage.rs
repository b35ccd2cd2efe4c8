use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

const STANDARD_32: &str = include_str!("../../assets/standard_1020_32.txt");

/// The 32 channels recorded in the DEAP corpus, in its channel order.
pub const DEAP_CHANNELS: [&str; 32] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1", "Oz",
    "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4", "P8",
    "PO4", "O2",
];

/// Electrode positions on the unit sphere, head-centred.
///
/// `+z` passes through the vertex (Cz), `+x` through the nasion and `+y`
/// through the left ear. Iteration order is the order the electrodes were
/// declared in.
#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    electrodes: IndexMap<String, [f64; 3]>,
}

impl Montage {
    /// Builds a montage from `(label, coordinate)` pairs, normalising each
    /// coordinate onto the unit sphere.
    pub fn new<I, S>(electrodes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, [f64; 3])>,
        S: Into<String>,
    {
        let mut map = IndexMap::new();
        for (label, [x, y, z]) in electrodes {
            let label = label.into();
            let norm = (x * x + y * y + z * z).sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::ZeroCoordinate(label));
            }
            if map.contains_key(&label) {
                return Err(Error::DuplicateLabel(label));
            }
            map.insert(label, [x / norm, y / norm, z / norm]);
        }
        Ok(Montage { electrodes: map })
    }

    /// The bundled 10-20 layout of the 32 DEAP channels.
    pub fn standard_32() -> Self {
        parse_montage(STANDARD_32).expect("bundled montage asset is valid")
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<[f64; 3]> {
        self.electrodes.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.electrodes.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.electrodes.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, [f64; 3])> {
        self.electrodes.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Restricts the montage to `labels`, in that order.
    pub fn subset<S: AsRef<str>>(&self, labels: &[S]) -> Result<Montage> {
        let mut out = IndexMap::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            let pos = self
                .position(label)
                .ok_or_else(|| Error::UnknownChannel(label.to_string()))?;
            if out.insert(label.to_string(), pos).is_some() {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
        }
        Ok(Montage { electrodes: out })
    }

    /// Serialises to the plain-text `LABEL x y z` format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (label, [x, y, z]) in self.iter() {
            s.push_str(&format!("{label} {x:.12} {y:.12} {z:.12}\n"));
        }
        s
    }
}

/// Reads a montage file: one `LABEL x y z` line per electrode.
///
/// Blank lines and lines starting with `#` are skipped.
pub fn load_montage(path: impl AsRef<Path>) -> Result<Montage> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_montage(&text)
}

pub fn parse_montage(text: &str) -> Result<Montage> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::MontageParse {
                line: i + 1,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut xyz = [0.0; 3];
        for (slot, field) in xyz.iter_mut().zip(&fields[1..]) {
            *slot = field.parse().map_err(|_| Error::MontageParse {
                line: i + 1,
                message: format!("not a number: {field:?}"),
            })?;
        }
        rows.push((fields[0].to_string(), xyz));
    }
    Montage::new(rows)
}
