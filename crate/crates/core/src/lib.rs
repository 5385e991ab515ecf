//! Desk-scale simulator for RIS-assisted RF hand-gesture sensing.
//!
//! The crate covers the whole chain from hardware layout to classification:
//!
//! - [`geometry`]: feed placement, spillover/illumination efficiency, edge taper
//!   and the exhaustive placement sweep.
//! - [`codebook`]: steering phase profiles, 1-bit quantization, group states
//!   and far-field radiation patterns.
//! - [`channel`]: unit-cell reflection table, per-element channel kernel,
//!   the group/state gain matrix and the received signal.
//! - [`sequencer`]: time-allocation matrices, their per-frame realizations and
//!   coherence-minimizing optimization.
//! - [`sensing`]: gesture scenes, S21 run synthesis, noise augmentation,
//!   dataset storage/import and scene reconstruction.
//! - [`classifier`]: the frame-average dense network and the two-channel
//!   convolutional network, trained from scratch.
//! - [`plot`]: deterministic SVG renderings with CSV twins.

pub mod channel;
pub mod checksum;
pub mod classifier;
pub mod codebook;
mod error;
pub mod geometry;
pub mod plot;
pub mod rng;
pub mod sensing;
pub mod sequencer;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength (m) at frequency `f` (Hz).
pub fn wavelength(f: f64) -> f64 {
    SPEED_OF_LIGHT / f
}
