//! Quantitative analysis chain: spectrograms, band-integrated SNR,
//! Gaussian decay fits, peak-width constants, spatial resolution, and 3D
//! localization of spins from measured frequencies.

mod fit;
mod localize;
mod resolution;

pub use fit::{fit_gaussian_decay, DecayFit};
pub use localize::{localize, Localization};
pub use resolution::{
    fwhm_constant, fwhm_widths, implied_t2, spatial_resolution, EnvelopeSupport, FwhmResult,
};

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::recon::{fftn_unitary, Direction};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("window of {window} samples does not fit a signal of {signal}")]
    WindowTooLong { window: usize, signal: usize },
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("noise band has zero power; add noise or use raw band power")]
    ZeroNoisePower,
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("no positive data to fit")]
    NoPositiveData,
    #[error("fit did not converge")]
    FitDiverged,
    #[error("spectral peak unresolved: {0}")]
    PeakUnresolved(String),
    #[error(transparent)]
    Field(#[from] crate::fieldmap::FieldError),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Windowed power spectrum of a 1D signal: rows are time windows,
/// columns non-negative frequency bins.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub power: Array2<f64>,
    pub window_length: usize,
    pub hop: usize,
    pub dt: f64,
}

impl Spectrogram {
    /// Frequency bin spacing in Hz.
    pub fn df(&self) -> f64 {
        1.0 / (self.window_length as f64 * self.dt)
    }

    /// Center time of each window in seconds.
    pub fn window_times(&self) -> Vec<f64> {
        (0..self.power.nrows())
            .map(|i| (i * self.hop) as f64 * self.dt + 0.5 * self.window_length as f64 * self.dt)
            .collect()
    }

    pub fn max_frequency(&self) -> f64 {
        (self.power.ncols() - 1) as f64 * self.df()
    }
}

/// Sliding rectangular-window power spectrum. Each window is
/// mean-subtracted and transformed on its own; mirror bins are folded
/// onto the non-negative half.
pub fn spectrogram(
    signal: &[f64],
    dt: f64,
    window_length: usize,
    hop: usize,
) -> Result<Spectrogram, AnalysisError> {
    if window_length < 2 || hop == 0 || !(dt > 0.0) {
        return Err(AnalysisError::InvalidParam(
            "window_length >= 2, hop >= 1, dt > 0 required".into(),
        ));
    }
    if window_length > signal.len() {
        return Err(AnalysisError::WindowTooLong {
            window: window_length,
            signal: signal.len(),
        });
    }
    let n_windows = (signal.len() - window_length) / hop + 1;
    let half = window_length / 2 + 1;
    let mut power = Array2::zeros((n_windows, half));
    let mut buf = ndarray::ArrayD::from_elem(ndarray::IxDyn(&[window_length]), Complex64::default());
    for w in 0..n_windows {
        let slice = &signal[w * hop..w * hop + window_length];
        let mean = slice.iter().sum::<f64>() / window_length as f64;
        for (b, v) in buf.iter_mut().zip(slice) {
            *b = Complex64::new(v - mean, 0.0);
        }
        fftn_unitary(&mut buf, Direction::Forward);
        for k in 0..half {
            let mirror = window_length - k;
            let mut p = buf[ndarray::IxDyn(&[k])].norm_sqr();
            if k != 0 && mirror != k && mirror < window_length {
                p += buf[ndarray::IxDyn(&[mirror])].norm_sqr();
            }
            power[(w, k)] = p;
        }
    }
    Ok(Spectrogram {
        power,
        window_length,
        hop,
        dt,
    })
}

/// Band-integrated signal-to-noise trace over the spectrogram windows.
#[derive(Debug, Clone)]
pub struct SnrCurve {
    pub times: Vec<f64>,
    pub snr: Vec<f64>,
    pub signal_band: (f64, f64),
    pub noise_band: (f64, f64),
}

fn band_bins(spec: &Spectrogram, band: (f64, f64)) -> Result<Vec<usize>, AnalysisError> {
    let (lo, hi) = band;
    if !(0.0 <= lo && lo < hi) {
        return Err(AnalysisError::InvalidBand(format!(
            "band [{lo}, {hi}] must satisfy 0 <= lo < hi"
        )));
    }
    if hi > spec.max_frequency() * (1.0 + 1e-12) {
        return Err(AnalysisError::InvalidBand(format!(
            "band [{lo}, {hi}] exceeds the spectral range {}",
            spec.max_frequency()
        )));
    }
    let df = spec.df();
    let bins: Vec<usize> = (0..spec.power.ncols())
        .filter(|k| {
            let f = *k as f64 * df;
            f >= lo && f <= hi
        })
        .collect();
    if bins.is_empty() {
        return Err(AnalysisError::InvalidBand(format!(
            "band [{lo}, {hi}] selects no bins at df = {df}"
        )));
    }
    Ok(bins)
}

/// Per-window SNR: signal-band power minus the background estimated from
/// the noise band (rescaled by the bin-count ratio), referenced to that
/// background.
pub fn band_snr(
    spec: &Spectrogram,
    signal_band: (f64, f64),
    noise_band: (f64, f64),
) -> Result<SnrCurve, AnalysisError> {
    let sig_bins = band_bins(spec, signal_band)?;
    let noise_bins = band_bins(spec, noise_band)?;
    if signal_band.1 > noise_band.0 && noise_band.1 > signal_band.0 {
        return Err(AnalysisError::InvalidBand(
            "signal and noise bands overlap".into(),
        ));
    }
    let rho = sig_bins.len() as f64 / noise_bins.len() as f64;
    let mut snr = Vec::with_capacity(spec.power.nrows());
    for w in 0..spec.power.nrows() {
        let row = spec.power.row(w);
        let sig: f64 = sig_bins.iter().map(|k| row[*k]).sum();
        let noise = rho * noise_bins.iter().map(|k| row[*k]).sum::<f64>();
        // Noise power at the FFT roundoff floor means noiseless input.
        if noise <= 1e-24 * row.sum() {
            return Err(AnalysisError::ZeroNoisePower);
        }
        snr.push((sig - noise) / noise);
    }
    Ok(SnrCurve {
        times: spec.window_times(),
        snr,
        signal_band,
        noise_band,
    })
}
