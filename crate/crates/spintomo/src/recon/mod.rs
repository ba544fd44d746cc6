//! Spectral reconstruction: FFT power images, aliasing-zoom planning and
//! unfolding, L1 sparse reconstruction, and peak extraction.

mod alias;
mod fft;
mod l1;
mod peaks;

pub use alias::{
    alias_map, plan_zoom, plan_zoom_with_factors, unfold, verify_plan, AliasMapping, ZoomAxis,
    ZoomPlan,
};
pub use fft::{fftn_unitary, Direction};
pub use l1::{l1_reconstruct, L1Options, L1Report};
pub use peaks::{peak_extract, Peak};

use ndarray::{ArrayD, Axis, IxDyn, Slice};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequencer::{AxisInfo, Quadrature, SignalGrid};

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("shape or axis mismatch: {0}")]
    ShapeMismatch(String),
    #[error("expected quadratures x and y, got {0:?} and {1:?}")]
    QuadratureMismatch(Quadrature, Quadrature),
    #[error("invalid frequency band: {0}")]
    InvalidBand(String),
    #[error("zoom plan does not match image: {0}")]
    PlanMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("sample index {index} out of bounds for grid of {size} points")]
    IndexOutOfBounds { index: usize, size: usize },
}

/// How a spectral image was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Fft,
    L1,
}

/// Frequency labeling of one image axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqAxis {
    pub channel: String,
    pub df_hz: f64,
    pub offset_hz: f64,
    /// Set when the axis was unfolded from a mirrored alias band.
    pub flipped: bool,
}

impl FreqAxis {
    pub fn frequency(&self, bin: f64) -> f64 {
        self.offset_hz + self.df_hz * bin
    }
}

/// N-dimensional non-negative spectral power with frequency axes.
#[derive(Debug, Clone)]
pub struct SpectralImage {
    pub power: ArrayD<f64>,
    pub axes: Vec<FreqAxis>,
    pub provenance: Provenance,
}

impl SpectralImage {
    pub fn validate(&self) -> Result<(), ReconError> {
        if self.axes.len() != self.power.ndim() {
            return Err(ReconError::ShapeMismatch(
                "axis count must equal power rank".into(),
            ));
        }
        if self.power.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ReconError::InvalidParam(
                "spectral power must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Combines the two quadrature grids into the complex signal
/// `s = (x - 1/2) + i (y - 1/2)`.
pub fn complex_combine(
    grid_x: &SignalGrid,
    grid_y: &SignalGrid,
) -> Result<ArrayD<Complex64>, ReconError> {
    if grid_x.quadrature != Quadrature::X || grid_y.quadrature != Quadrature::Y {
        return Err(ReconError::QuadratureMismatch(
            grid_x.quadrature,
            grid_y.quadrature,
        ));
    }
    if grid_x.data.shape() != grid_y.data.shape() || grid_x.axes != grid_y.axes {
        return Err(ReconError::ShapeMismatch(
            "quadrature grids must share shape and axes".into(),
        ));
    }
    let mut out = ArrayD::from_elem(IxDyn(grid_x.data.shape()), Complex64::default());
    ndarray::Zip::from(&mut out)
        .and(&grid_x.data)
        .and(&grid_y.data)
        .for_each(|o, x, y| *o = Complex64::new(x - 0.5, y - 0.5));
    Ok(out)
}

fn freq_axes_of(axes: &[AxisInfo], shape: &[usize]) -> Result<Vec<FreqAxis>, ReconError> {
    axes.iter()
        .zip(shape)
        .map(|(axis, n)| {
            if !(axis.dt_eff_s > 0.0) {
                return Err(ReconError::InvalidParam(format!(
                    "non-positive time step on channel {:?}",
                    axis.channel
                )));
            }
            Ok(FreqAxis {
                channel: axis.channel.clone(),
                df_hz: 1.0 / (*n as f64 * axis.dt_eff_s),
                offset_hz: 0.0,
                flipped: false,
            })
        })
        .collect()
}

/// Spectral power of a complex signal: mean subtraction, unitary N-D
/// DFT, `|F|^2`. Frequency steps are `1/(n_k dt_k)`.
pub fn spectral_image(
    signal: &ArrayD<Complex64>,
    axes: &[AxisInfo],
) -> Result<SpectralImage, ReconError> {
    if signal.ndim() != axes.len() {
        return Err(ReconError::ShapeMismatch(format!(
            "{} axes for rank-{} signal",
            axes.len(),
            signal.ndim()
        )));
    }
    let freq_axes = freq_axes_of(axes, signal.shape())?;
    let mean = signal.iter().sum::<Complex64>() / signal.len() as f64;
    let mut work = signal.mapv(|v| v - mean);
    fftn_unitary(&mut work, Direction::Forward);
    Ok(SpectralImage {
        power: work.mapv(|c| c.norm_sqr()),
        axes: freq_axes,
        provenance: Provenance::Fft,
    })
}

/// Spectral power of a single-quadrature (real) grid, folded onto
/// non-negative frequencies.
///
/// The full power spectrum of a real signal is conjugate-symmetric, so
/// every axis is folded to `[0, f_nyq]` (`n/2 + 1` bins) by summing each
/// bin with its mirror; each tone then appears exactly once, at the
/// per-axis `|f|` of Eq-of-folding geometry, and total power is
/// conserved.
pub fn spectral_image_real(grid: &SignalGrid) -> Result<SpectralImage, ReconError> {
    let n = grid.data.len() as f64;
    let mean = grid.data.iter().sum::<f64>() / n;
    let mut work = grid.data.mapv(|v| Complex64::new(v - mean, 0.0));
    fftn_unitary(&mut work, Direction::Forward);
    let mut power = work.mapv(|c| c.norm_sqr());
    for axis in 0..power.ndim() {
        power = fold_axis(&power, axis);
    }
    let freq_axes = freq_axes_of(&grid.axes, grid.data.shape())?;
    Ok(SpectralImage {
        power,
        axes: freq_axes,
        provenance: Provenance::Fft,
    })
}

/// Folds one axis of a power array onto `[0, n/2]`, summing mirror bins.
fn fold_axis(power: &ArrayD<f64>, axis: usize) -> ArrayD<f64> {
    let n = power.len_of(Axis(axis));
    let half = n / 2 + 1;
    let mut out = power
        .slice_axis(Axis(axis), Slice::from(0..half))
        .to_owned();
    for j in 1..half {
        let mirror = n - j;
        if mirror != j {
            let src = power.index_axis(Axis(axis), mirror);
            let mut dst = out.index_axis_mut(Axis(axis), j);
            dst += &src;
        }
    }
    out
}

#[cfg(test)]
mod tests;
