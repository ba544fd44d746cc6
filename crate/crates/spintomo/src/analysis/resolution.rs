//! Peak-width constant and spatial resolution.
//!
//! The frequency resolution of a decaying echo signal is `df = k / T2`
//! (FWHM of the spectral peak). For the one-sided Gaussian-envelope
//! cosine model only the t > 0 half of the envelope is observed, which
//! makes the constant k awkward analytically; it is measured here
//! numerically and comes out at sqrt(2)/pi.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use super::AnalysisError;
use crate::recon::{fftn_unitary, Direction};

/// Which part of the Gaussian envelope the model signal carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeSupport {
    /// Only t >= 0, as in a real pulse-duration sweep.
    OneSided,
    /// Symmetric around t = 0 (reference variant).
    TwoSided,
}

#[derive(Debug, Clone)]
pub struct FwhmResult {
    /// Least-squares constant in `width = k / T2`.
    pub k: f64,
    /// Measured FWHM per T2 value, in Hz.
    pub widths_hz: Vec<f64>,
    /// Per-T2 constant `width * T2`.
    pub per_t2_k: Vec<f64>,
}

/// FWHM of the carrier peak by linear interpolation at half maximum.
fn fwhm_of_power(power: &[f64], df: f64) -> Result<f64, AnalysisError> {
    let (peak_bin, peak) = power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| AnalysisError::PeakUnresolved("empty spectrum".into()))?;
    let half = peak / 2.0;

    let mut left = None;
    for j in (0..peak_bin).rev() {
        if power[j] < half {
            let frac = (half - power[j]) / (power[j + 1] - power[j]);
            left = Some(j as f64 + frac);
            break;
        }
    }
    let mut right = None;
    for j in peak_bin + 1..power.len() {
        if power[j] < half {
            let frac = (power[j - 1] - half) / (power[j - 1] - power[j]);
            right = Some((j - 1) as f64 + frac);
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) if r > l => Ok((r - l) * df),
        _ => Err(AnalysisError::PeakUnresolved(
            "half-maximum crossings not found; frequency resolution too coarse".into(),
        )),
    }
}

/// Measures spectral FWHM of `cos(2 pi f t) exp(-t^2 / (2 T2^2))` for
/// each T2, sampled on `n_samples` points spanning `t_max`.
pub fn fwhm_widths(
    t2_values: &[f64],
    t_max: f64,
    n_samples: usize,
    carrier_hz: f64,
    support: EnvelopeSupport,
) -> Result<Vec<f64>, AnalysisError> {
    if t2_values.is_empty() || n_samples < 16 || !(t_max > 0.0) {
        return Err(AnalysisError::InvalidParam(
            "need T2 values, t_max > 0, and a reasonable sample count".into(),
        ));
    }
    let dt = t_max / (n_samples - 1) as f64;
    let df = 1.0 / (n_samples as f64 * dt);
    let mut widths = Vec::with_capacity(t2_values.len());
    for t2 in t2_values {
        if !(t_max > 10.0 * t2) {
            return Err(AnalysisError::InvalidParam(format!(
                "t_max = {t_max} must be much longer than T2 = {t2}"
            )));
        }
        let signal: Vec<f64> = (0..n_samples)
            .map(|j| {
                let t = match support {
                    EnvelopeSupport::OneSided => dt * j as f64,
                    EnvelopeSupport::TwoSided => dt * j as f64 - t_max / 2.0,
                };
                (2.0 * std::f64::consts::PI * carrier_hz * t).cos()
                    * (-0.5 * (t / t2).powi(2)).exp()
            })
            .collect();
        let mean = signal.iter().sum::<f64>() / n_samples as f64;
        let mut buf = ArrayD::from_shape_vec(
            IxDyn(&[n_samples]),
            signal
                .iter()
                .map(|v| Complex64::new(v - mean, 0.0))
                .collect(),
        )
        .expect("shape matches");
        fftn_unitary(&mut buf, Direction::Forward);
        let power: Vec<f64> = (0..n_samples / 2).map(|k| buf[IxDyn(&[k])].norm_sqr()).collect();
        widths.push(fwhm_of_power(&power, df)?);
    }
    Ok(widths)
}

/// Runs the one-sided peak-width measurement over a T2 list and fits the
/// proportionality constant `width = k / T2`.
pub fn fwhm_constant(
    t2_values: &[f64],
    t_max: f64,
    n_samples: usize,
    carrier_hz: f64,
) -> Result<FwhmResult, AnalysisError> {
    let widths_hz = fwhm_widths(t2_values, t_max, n_samples, carrier_hz, EnvelopeSupport::OneSided)?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut per_t2_k = Vec::with_capacity(widths_hz.len());
    for (w, t2) in widths_hz.iter().zip(t2_values) {
        num += w / t2;
        den += 1.0 / (t2 * t2);
        per_t2_k.push(w * t2);
    }
    Ok(FwhmResult {
        k: num / den,
        widths_hz,
        per_t2_k,
    })
}

/// Spatial resolution in nm from the coherence time and the gradient
/// sensitivity: `df = sqrt(2) / (pi T2)` divided by kHz-per-nm.
pub fn spatial_resolution(t2_s: f64, sensitivity_khz_per_nm: f64) -> f64 {
    assert!(t2_s > 0.0 && sensitivity_khz_per_nm > 0.0);
    let df_khz = std::f64::consts::SQRT_2 / (std::f64::consts::PI * t2_s) / 1e3;
    df_khz / sensitivity_khz_per_nm
}

/// Coherence time implied by a spatial resolution at a given sensitivity;
/// inverse of [`spatial_resolution`].
pub fn implied_t2(resolution_nm: f64, sensitivity_khz_per_nm: f64) -> f64 {
    assert!(resolution_nm > 0.0 && sensitivity_khz_per_nm > 0.0);
    let df_hz = resolution_nm * sensitivity_khz_per_nm * 1e3;
    std::f64::consts::SQRT_2 / (std::f64::consts::PI * df_hz)
}
