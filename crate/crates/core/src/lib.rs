//! Self-supervised brain-rate modelling from multi-channel EEG.
//!
//! ```text
//! EegRecording ──segment──▶ Window ──spectrum──▶ band centroids ──▶ TopoMap (grid × grid × bands)
//!                               │                                        │
//!                               └──▶ band ratios ──▶ BrainRate           │
//!                                                        │               │
//!                       SequenceSample: z consecutive maps ─▶ rate of window z+1
//!                                                        │
//!                     CnnRegressor (stage 1, SGD) ─▶ FullModel (stage 2, Adam)
//! ```
//!
//! Every stage is a plain function over owned or borrowed values; see the
//! crate's `examples/` directory for one runnable program per stage.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod nn;
pub mod signal;
pub mod spectral;
pub mod topomap;
pub mod training;
pub mod windowing;

mod codec;

pub use error::{Error, Result};
