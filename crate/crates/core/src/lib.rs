//! Neural IIR filter fields for HRTF modeling.
//!
//! A coordinate network maps a sound-source direction to the parameters of a cascade of
//! parametric IIR filters (a low shelf, `K` peaking filters and a high shelf per ear). The
//! network is trained by back-propagating a log-spectral loss through the frequency-sampled
//! cascade response. Magnitude and FIR output heads, nearest-neighbour and VBAP baselines,
//! and per-subject adaptation (embedding concatenation, FiLM, BitFit, LoRA) are included.

pub mod cli;
pub mod dataset;
pub mod dsp;
mod error;
pub mod field;
pub mod grad;
pub mod train;

pub use error::{Error, Result};
