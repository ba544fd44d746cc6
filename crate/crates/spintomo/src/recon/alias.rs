//! Bandpass-undersampling (aliasing zoom) planning and unfolding.
//!
//! Undersampling a band-limited signal aliases its band to
//! `f_obs = |f - 2N f_nyq|` with `N` the integer minimizing the right
//! side. When the whole band sits inside one monotone half-period of
//! that map it lands contiguously near f = 0 and can be relabeled back
//! to true frequencies after the transform, trading acquisition points
//! for none of the band's structure.

use ndarray::{Axis, Slice};
use serde::{Deserialize, Serialize};

use super::{ReconError, SpectralImage};
use crate::sequencer::noise;

/// Result of folding one frequency through the alias map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AliasMapping {
    pub f_obs_hz: f64,
    pub alias_index: u64,
    /// True when the frequency sits left of the nearest even multiple of
    /// the Nyquist frequency, so the band appears mirrored.
    pub flipped: bool,
}

/// Folds `f` into `[0, f_nyq]`: `f_obs = |f - 2N f_nyq|` with `N`
/// minimizing the value, ties broken toward smaller `N`.
pub fn alias_map(f_hz: f64, f_nyq_hz: f64) -> AliasMapping {
    assert!(f_hz >= 0.0 && f_nyq_hz > 0.0);
    let ratio = f_hz / (2.0 * f_nyq_hz);
    let n = (ratio - 0.5).ceil().max(0.0);
    let folded = f_hz - 2.0 * n * f_nyq_hz;
    AliasMapping {
        f_obs_hz: folded.abs(),
        alias_index: n as u64,
        flipped: folded < 0.0,
    }
}

/// Undersampling plan for one grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomAxis {
    pub nyquist_hz: f64,
    pub alias_index: u64,
    pub flipped: bool,
    pub undersample_factor: usize,
    pub band_hz: (f64, f64),
    /// False when no factor > 1 satisfied the constraints and the axis
    /// fell back to full sampling.
    pub zoomed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomPlan {
    pub axes: Vec<ZoomAxis>,
}

impl ZoomPlan {
    pub fn factors(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.undersample_factor).collect()
    }
}

/// Checks whether `[lo, hi]` sits inside one monotone half-period of the
/// alias map at `f_nyq`; returns the alias index and flip parity, with
/// ties between the two parities broken toward smaller N.
fn fit_band(lo: f64, hi: f64, f_nyq: f64) -> Option<(u64, bool)> {
    if hi - lo > f_nyq {
        return None;
    }
    // Unflipped: [2N f_nyq, (2N+1) f_nyq] covers the band.
    let n_up = (lo / (2.0 * f_nyq)).floor();
    let up_ok = hi <= (2.0 * n_up + 1.0) * f_nyq;
    // Flipped: [(2N-1) f_nyq, 2N f_nyq] covers the band.
    let n_down = (hi / (2.0 * f_nyq)).ceil();
    let down_ok = n_down >= 1.0 && lo >= (2.0 * n_down - 1.0) * f_nyq;
    match (up_ok, down_ok) {
        (true, true) => {
            if n_up <= n_down {
                Some((n_up as u64, false))
            } else {
                Some((n_down as u64, true))
            }
        }
        (true, false) => Some((n_up as u64, false)),
        (false, true) => Some((n_down as u64, true)),
        (false, false) => None,
    }
}

fn plan_axis(
    band: (f64, f64),
    dt: f64,
    factor: Option<usize>,
) -> Result<ZoomAxis, ReconError> {
    let (lo, hi) = band;
    if !(dt > 0.0) {
        return Err(ReconError::InvalidParam("non-positive sample step".into()));
    }
    let f_nyq_full = 1.0 / (2.0 * dt);
    if !(0.0 <= lo && lo < hi) {
        return Err(ReconError::InvalidBand(format!(
            "band [{lo}, {hi}] must satisfy 0 <= lo < hi"
        )));
    }
    if hi > f_nyq_full * (1.0 + 1e-12) {
        return Err(ReconError::InvalidBand(format!(
            "band tops out at {hi} Hz above the full-sampling Nyquist {f_nyq_full} Hz"
        )));
    }

    match factor {
        Some(m) => {
            if m == 0 {
                return Err(ReconError::InvalidParam(
                    "undersampling factor must be >= 1".into(),
                ));
            }
            let f_nyq = f_nyq_full / m as f64;
            let (alias_index, flipped) = fit_band(lo, hi, f_nyq).ok_or_else(|| {
                ReconError::InvalidBand(format!(
                    "band [{lo}, {hi}] does not alias monotonically at factor {m}"
                ))
            })?;
            Ok(ZoomAxis {
                nyquist_hz: f_nyq,
                alias_index,
                flipped,
                undersample_factor: m,
                band_hz: band,
                zoomed: m > 1,
            })
        }
        None => {
            let m_max = (f_nyq_full / (hi - lo)).floor() as usize;
            for m in (2..=m_max.max(1)).rev() {
                let f_nyq = f_nyq_full / m as f64;
                if let Some((alias_index, flipped)) = fit_band(lo, hi, f_nyq) {
                    return Ok(ZoomAxis {
                        nyquist_hz: f_nyq,
                        alias_index,
                        flipped,
                        undersample_factor: m,
                        band_hz: band,
                        zoomed: true,
                    });
                }
            }
            // No usable factor: fall back to full sampling.
            Ok(ZoomAxis {
                nyquist_hz: f_nyq_full,
                alias_index: 0,
                flipped: false,
                undersample_factor: 1,
                band_hz: band,
                zoomed: false,
            })
        }
    }
}

/// Plans the largest per-axis undersampling factor whose alias map keeps
/// the band monotone and wide enough (`f_nyq >= bandwidth`). Axes where
/// no factor > 1 works come back with `zoomed: false`.
pub fn plan_zoom(bands: &[(f64, f64)], fullsample_dt: &[f64]) -> Result<ZoomPlan, ReconError> {
    if bands.len() != fullsample_dt.len() {
        return Err(ReconError::ShapeMismatch(
            "one band per sampling axis required".into(),
        ));
    }
    let axes = bands
        .iter()
        .zip(fullsample_dt)
        .map(|(band, dt)| plan_axis(*band, *dt, None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ZoomPlan { axes })
}

/// Plans a zoom with caller-chosen per-axis factors, validating that the
/// bands alias monotonically at those factors.
pub fn plan_zoom_with_factors(
    bands: &[(f64, f64)],
    fullsample_dt: &[f64],
    factors: &[usize],
) -> Result<ZoomPlan, ReconError> {
    if bands.len() != fullsample_dt.len() || bands.len() != factors.len() {
        return Err(ReconError::ShapeMismatch(
            "bands, steps, and factors must have equal length".into(),
        ));
    }
    let axes = bands
        .iter()
        .zip(fullsample_dt)
        .zip(factors)
        .map(|((band, dt), m)| plan_axis(*band, *dt, Some(*m)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ZoomPlan { axes })
}

/// Verifies a plan against [`alias_map`] on random in-band frequencies;
/// returns the number of disagreements.
pub fn verify_plan(plan: &ZoomPlan, samples_per_axis: usize, seed: u64) -> usize {
    let mut mismatches = 0;
    for (axis_idx, axis) in plan.axes.iter().enumerate() {
        let (lo, hi) = axis.band_hz;
        for i in 0..samples_per_axis {
            let u = noise::uniform(seed, &[noise::tag::AUX, axis_idx as u64, i as u64]);
            let f = lo + u * (hi - lo);
            let mapping = alias_map(f, axis.nyquist_hz);
            if mapping.alias_index != axis.alias_index
                || (mapping.flipped != axis.flipped && mapping.f_obs_hz > 1e-9)
            {
                mismatches += 1;
            }
        }
    }
    mismatches
}

/// Relabels an aliased spectral image to true frequencies:
/// `f_true = 2N f_nyq ± f_obs` per axis according to flip parity,
/// reversing flipped axes so frequencies ascend. Power values are
/// untouched.
pub fn unfold(image: &SpectralImage, plan: &ZoomPlan) -> Result<SpectralImage, ReconError> {
    if image.axes.len() != plan.axes.len() {
        return Err(ReconError::PlanMismatch(format!(
            "plan has {} axes, image {}",
            plan.axes.len(),
            image.axes.len()
        )));
    }
    let mut power = image.power.clone();
    let mut axes = Vec::with_capacity(image.axes.len());
    for (k, (img_axis, zoom_axis)) in image.axes.iter().zip(&plan.axes).enumerate() {
        let count = power.len_of(Axis(k));
        let top = img_axis.offset_hz + img_axis.df_hz * (count - 1) as f64;
        if top > zoom_axis.nyquist_hz * (1.0 + 1e-9) + img_axis.df_hz {
            return Err(ReconError::PlanMismatch(format!(
                "axis {k} spans {top} Hz, beyond the plan Nyquist {} Hz",
                zoom_axis.nyquist_hz
            )));
        }
        let base = 2.0 * zoom_axis.alias_index as f64 * zoom_axis.nyquist_hz;
        if zoom_axis.flipped {
            power = power.slice_axis(Axis(k), Slice::from(..).step_by(-1)).to_owned();
            axes.push(super::FreqAxis {
                channel: img_axis.channel.clone(),
                df_hz: img_axis.df_hz,
                offset_hz: base - top,
                flipped: true,
            });
        } else {
            axes.push(super::FreqAxis {
                channel: img_axis.channel.clone(),
                df_hz: img_axis.df_hz,
                offset_hz: base + img_axis.offset_hz,
                flipped: false,
            });
        }
    }
    Ok(SpectralImage {
        power,
        axes,
        provenance: image.provenance,
    })
}
