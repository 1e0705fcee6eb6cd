//! Event classification for single-channel bladder pressure (Pves) traces.
//!
//! The pipeline runs: load and resample traces ([`trace_io`]), five-level
//! Db2 wavelet decomposition with spline re-interpolation ([`dwt`]),
//! 55 features per 0.8 s segment ([`features`]), median-aggregated events
//! and trace-level splits ([`events`]), from-scratch MLPs ([`nn`]) composed
//! into two-stage, cascaded and single-stage classifiers ([`pipeline`]), and
//! metrics plus permutation importance ([`eval`]). [`synth`] generates
//! seeded annotated traces for desk-scale runs.

pub mod cli;
pub mod dwt;
pub mod error;
pub mod eval;
pub mod events;
pub mod features;
pub mod nn;
pub mod pipeline;
pub mod spline;
pub mod synth;
mod table;
pub mod trace_io;

pub use error::{Error, Result};
pub use trace_io::{Annotation, EventLabel, Trace};
