//! Continuous arousal and valence prediction from eye behaviour.
//!
//! The pipeline runs frame-level tracker output through per-frame eye
//! descriptors, 8-second windowed functionals and a pupil wavelet block,
//! mutual-information feature selection with an annotation-delay sweep,
//! and a two-layer bidirectional LSTM scored by concordance.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod lld;
pub mod model;
pub mod selection;
pub mod wavelet;

pub use error::{Error, Result};
