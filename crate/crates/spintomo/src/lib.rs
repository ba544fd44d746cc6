//! End-to-end toolkit for microwire magnetic-gradient spin tomography.
//!
//! The crate covers the full chain from device geometry to quantitative
//! analysis:
//!
//! - [`fieldmap`]: Biot-Savart fields of straight-filament wire
//!   assemblies, Larmor shifts, gradient Jacobians, and the three-arm
//!   U-structure builder.
//! - [`sequencer`]: phase-encoded gradient-echo signal synthesis on 1-3
//!   dimensional pulse-duration grids, with current-fluctuation and
//!   readout noise and effective-duration bookkeeping.
//! - [`recon`]: spectral-power images by FFT, aliasing-zoom planning and
//!   unfolding for undersampled acquisition, L1 sparse reconstruction,
//!   and peak extraction.
//! - [`analysis`]: spectrograms, band-integrated SNR, Gaussian decay
//!   fits, peak-width constants, spatial resolution, and 3D localization
//!   of spins from measured frequencies.
//! - [`io`]: file formats for signal grids, spectral images, and peak
//!   lists.

pub mod analysis;
pub mod fieldmap;
pub mod io;
pub mod recon;
pub mod sequencer;
pub mod vec3;

pub use vec3::Vec3;
