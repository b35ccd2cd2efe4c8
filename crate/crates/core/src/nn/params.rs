use std::ops::Range;

use serde::{Deserialize, Serialize};

/// A named, shaped range of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamGroup {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered list of every trainable tensor of a network.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    groups: Vec<ParamGroup>,
    len: usize,
}

impl ParamLayout {
    pub(crate) fn push(&mut self, name: impl Into<String>, shape: &[usize]) -> Slot {
        let g = ParamGroup {
            name: name.into(),
            shape: shape.to_vec(),
            offset: self.len,
        };
        let slot = Slot {
            offset: g.offset,
            len: g.len(),
        };
        self.len += g.len();
        self.groups.push(g);
        slot
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Total number of trainable scalars.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Slot {
    pub offset: usize,
    pub len: usize,
}

impl Slot {
    pub fn range(self) -> Range<usize> {
        self.offset..self.offset + self.len
    }

    pub fn of(self, p: &[f64]) -> &[f64] {
        &p[self.range()]
    }

    pub fn of_mut(self, p: &mut [f64]) -> &mut [f64] {
        &mut p[self.range()]
    }
}
