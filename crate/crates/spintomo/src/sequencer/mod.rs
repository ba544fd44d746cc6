//! Gradient-echo signal synthesis.
//!
//! A spin at position `x` accumulates phase `sum_k omega_k(x) * t_k` over
//! the per-channel gradient pulses of one echo sequence; sweeping the
//! pulse durations over an equidistant grid yields an N-dimensional
//! oscillatory dataset whose Fourier transform images the ensemble. The
//! synthesizer reproduces this including current-fluctuation noise (via
//! effective pulse durations), Gaussian decoherence envelopes, and
//! additive readout noise.

pub mod noise;

use indexmap::IndexMap;
use ndarray::{ArrayD, IxDyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fieldmap::{channel_shift, FieldError, QuantizationAxis, WireAssembly};
use crate::vec3::Vec3;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("current trace is empty")]
    EmptyTrace,
    #[error("reference current must be positive, got {0}")]
    InvalidReferenceCurrent(f64),
    #[error("spin {spin} has no coherence time for channel {channel:?}")]
    MissingCoherenceTime { spin: usize, channel: String },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),
    #[error("undersampling by {factor} leaves axis {axis} with fewer than 2 points")]
    AxisTooShort { axis: usize, factor: usize },
}

/// Trailing pi/2-pulse phase; selects the cosine or sine component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    Y,
}

/// One point spin: position, amplitude weight, and per-gradient-channel
/// coherence times T2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spin {
    pub position: Vec3,
    pub weight: f64,
    pub coherence_times: IndexMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpinEnsemble {
    pub spins: Vec<Spin>,
}

impl SpinEnsemble {
    pub fn validate(&self) -> Result<(), SequenceError> {
        if self.spins.is_empty() {
            return Err(SequenceError::InvalidSpec("ensemble has no spins".into()));
        }
        for (i, s) in self.spins.iter().enumerate() {
            if !(s.weight > 0.0) {
                return Err(SequenceError::InvalidSpec(format!(
                    "spin {i} has non-positive weight"
                )));
            }
            if s.coherence_times.values().any(|t| !(*t > 0.0)) {
                return Err(SequenceError::InvalidSpec(format!(
                    "spin {i} has non-positive coherence time"
                )));
            }
        }
        Ok(())
    }
}

/// Gradient current pulse model: trapezoidal pulses at `reference_current`
/// with relative shot-to-shot scale fluctuations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurrentPulseModel {
    /// Reference (plateau) current I0 in amperes.
    pub reference_current: f64,
    /// Relative std of the per-pulse current scale factor.
    pub shot_to_shot_sigma: f64,
    /// Linear rise/fall time in seconds; 0 gives rectangular pulses.
    pub ramp_time: f64,
    /// Sample rate of the simulated current trace in Hz.
    pub sample_rate: f64,
}

impl Default for CurrentPulseModel {
    fn default() -> Self {
        CurrentPulseModel {
            reference_current: 0.080,
            shot_to_shot_sigma: 0.0,
            ramp_time: 0.0,
            sample_rate: 100e6,
        }
    }
}

impl CurrentPulseModel {
    pub fn validate(&self) -> Result<(), SequenceError> {
        if !(self.reference_current > 0.0) {
            return Err(SequenceError::InvalidReferenceCurrent(
                self.reference_current,
            ));
        }
        if self.shot_to_shot_sigma < 0.0 || self.ramp_time < 0.0 || !(self.sample_rate > 0.0) {
            return Err(SequenceError::InvalidSpec(
                "pulse model parameters out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Equidistant pulse-duration axis: `offset + step * i` for `i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationAxis {
    pub offset: f64,
    pub step: f64,
    pub count: usize,
}

impl DurationAxis {
    pub fn new(offset: f64, step: f64, count: usize) -> Result<Self, SequenceError> {
        let axis = DurationAxis {
            offset,
            step,
            count,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        if !(self.step > 0.0) || self.offset < 0.0 || self.count == 0 {
            return Err(SequenceError::InvalidSpec(format!(
                "duration axis must have positive step, non-negative offset, \
                 and at least one point: {self:?}"
            )));
        }
        Ok(())
    }

    /// Builds an axis from explicit samples, validating that they are
    /// strictly increasing and equidistant.
    pub fn from_values(values: &[f64]) -> Result<Self, SequenceError> {
        if values.len() < 2 {
            return Err(SequenceError::InvalidSpec(
                "duration array needs at least 2 samples".into(),
            ));
        }
        let step = values[1] - values[0];
        for w in values.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - step).abs() > 1e-9 * step.abs() {
                return Err(SequenceError::InvalidSpec(
                    "duration array must be strictly increasing and equidistant".into(),
                ));
            }
        }
        DurationAxis::new(values[0], step, values.len())
    }

    pub fn value(&self, i: usize) -> f64 {
        self.offset + self.step * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

/// Description of one gradient-echo acquisition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSpec {
    /// Gradient channels in pulse order (1-3 entries).
    pub channels: Vec<String>,
    /// Nominal pulse-duration grid, one axis per channel.
    pub durations: Vec<DurationAxis>,
    /// Which trailing-pulse phases to record.
    pub quadratures: Vec<Quadrature>,
    /// Std of additive Gaussian noise on the echo expectation.
    pub readout_noise_sigma: f64,
    pub seed: u64,
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<(), SequenceError> {
        if self.channels.is_empty() || self.channels.len() > 3 {
            return Err(SequenceError::InvalidSpec(
                "sequence needs 1-3 gradient channels".into(),
            ));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].contains(c) {
                return Err(SequenceError::InvalidSpec(format!(
                    "duplicate channel {c:?}"
                )));
            }
        }
        if self.durations.len() != self.channels.len() {
            return Err(SequenceError::InvalidSpec(
                "one duration axis per channel required".into(),
            ));
        }
        for axis in &self.durations {
            axis.validate()?;
        }
        if self.quadratures.is_empty() {
            return Err(SequenceError::InvalidSpec(
                "at least one quadrature required".into(),
            ));
        }
        if self.quadratures.len() > 2
            || (self.quadratures.len() == 2 && self.quadratures[0] == self.quadratures[1])
        {
            return Err(SequenceError::InvalidSpec(
                "quadratures must be distinct".into(),
            ));
        }
        if self.readout_noise_sigma < 0.0 {
            return Err(SequenceError::InvalidSpec(
                "readout noise sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        self.durations.iter().map(|a| a.count).collect()
    }
}

/// Per-axis bookkeeping of a [`SignalGrid`]: the owning channel, the
/// nominal duration step, and the axis offset, all in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisInfo {
    pub channel: String,
    pub dt_eff_s: f64,
    pub offset_s: f64,
}

/// Noise bookkeeping carried with a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub seed: u64,
    pub readout_noise_sigma: f64,
    pub shot_to_shot_sigma: f64,
}

/// N-dimensional echo-signal dataset for one quadrature.
///
/// The stored axes use the nominal duration steps; when current noise or
/// ramps are enabled the per-point realized effective durations are kept
/// in `t_eff` (same shape plus a trailing per-channel axis).
#[derive(Debug, Clone)]
pub struct SignalGrid {
    pub data: ArrayD<f64>,
    pub axes: Vec<AxisInfo>,
    pub quadrature: Quadrature,
    pub meta: GridMeta,
    pub t_eff: Option<ArrayD<f64>>,
}

impl SignalGrid {
    /// Checks rank/axis consistency and the 6-sigma amplitude bound
    /// around the noiseless [0, 1] signal range (never clipped, only
    /// checked).
    pub fn validate(&self) -> Result<(), SequenceError> {
        if self.axes.len() != self.data.ndim() {
            return Err(SequenceError::InvalidSpec(
                "axis count must equal data rank".into(),
            ));
        }
        let slack = (6.0 * self.meta.readout_noise_sigma).min(0.5);
        let (lo, hi) = (-slack, 1.0 + slack);
        if self.data.iter().any(|v| !v.is_finite() || *v < lo || *v > hi) {
            return Err(SequenceError::InvalidSpec(format!(
                "signal values outside [{lo}, {hi}]"
            )));
        }
        if let Some(t) = &self.t_eff {
            if t.ndim() != self.data.ndim() + 1 {
                return Err(SequenceError::InvalidSpec(
                    "t_eff sidecar must have one trailing channel axis".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Effective pulse duration: the trapezoidal integral of the sampled
/// current trace divided by the reference current.
pub fn effective_time(
    trace: &[f64],
    sample_rate: f64,
    reference_current: f64,
) -> Result<f64, SequenceError> {
    if trace.is_empty() {
        return Err(SequenceError::EmptyTrace);
    }
    if !(reference_current > 0.0) {
        return Err(SequenceError::InvalidReferenceCurrent(reference_current));
    }
    if trace.len() == 1 {
        return Ok(0.0);
    }
    let dt = 1.0 / sample_rate;
    let interior: f64 = trace[1..trace.len() - 1].iter().sum();
    let integral = dt * (interior + 0.5 * (trace[0] + trace[trace.len() - 1]));
    Ok(integral / reference_current)
}

/// Accumulated phase of one spin: `sum_k omega_k * t_eff_k`.
pub fn spin_phase(channel_frequencies: &[f64], effective_durations: &[f64]) -> f64 {
    assert_eq!(channel_frequencies.len(), effective_durations.len());
    channel_frequencies
        .iter()
        .zip(effective_durations)
        .map(|(w, t)| w * t)
        .sum()
}

/// Weighted echo expectation of the ensemble:
/// `(1 + sum_i w_i env_i cos(phi_i) / sum_i w_i) / 2` for quadrature x,
/// with sine for quadrature y. Weight normalization keeps the noiseless
/// value in [0, 1].
pub fn echo_expectation(
    phases: &[f64],
    weights: &[f64],
    envelopes: &[f64],
    quadrature: Quadrature,
) -> f64 {
    assert_eq!(phases.len(), weights.len());
    assert_eq!(phases.len(), envelopes.len());
    let total_weight: f64 = weights.iter().sum();
    let osc: f64 = phases
        .iter()
        .zip(weights)
        .zip(envelopes)
        .map(|((phi, w), env)| {
            w * env
                * match quadrature {
                    Quadrature::X => phi.cos(),
                    Quadrature::Y => phi.sin(),
                }
        })
        .sum();
    (1.0 + osc / total_weight) / 2.0
}

/// Gaussian decoherence envelope `exp(-1/2 sum_k (t_k / T2_k)^2)` over
/// the active channels.
pub fn decoherence_envelope(
    spin: &Spin,
    channels: &[String],
    durations: &[f64],
) -> Result<f64, SequenceError> {
    assert_eq!(channels.len(), durations.len());
    let mut exponent = 0.0;
    for (channel, t) in channels.iter().zip(durations) {
        let t2 = spin.coherence_times.get(channel).ok_or_else(|| {
            SequenceError::MissingCoherenceTime {
                spin: usize::MAX,
                channel: channel.clone(),
            }
        })?;
        exponent += (t / t2).powi(2);
    }
    Ok((-0.5 * exponent).exp())
}

/// Coarsens the acquisition grid: per-channel duration steps multiply by
/// `factors` and point counts shrink by ceil division.
pub fn undersample_grid(
    spec: &SequenceSpec,
    factors: &[usize],
) -> Result<SequenceSpec, SequenceError> {
    if factors.len() != spec.durations.len() {
        return Err(SequenceError::ChannelMismatch(format!(
            "{} undersampling factors for {} axes",
            factors.len(),
            spec.durations.len()
        )));
    }
    if factors.iter().any(|f| *f == 0) {
        return Err(SequenceError::InvalidSpec(
            "undersampling factors must be >= 1".into(),
        ));
    }
    let mut durations = Vec::with_capacity(spec.durations.len());
    for (axis_idx, (axis, factor)) in spec.durations.iter().zip(factors).enumerate() {
        let count = axis.count.div_ceil(*factor);
        if count < 2 {
            return Err(SequenceError::AxisTooShort {
                axis: axis_idx,
                factor: *factor,
            });
        }
        durations.push(DurationAxis {
            offset: axis.offset,
            step: axis.step * *factor as f64,
            count,
        });
    }
    Ok(SequenceSpec {
        durations,
        ..spec.clone()
    })
}

/// Samples the trapezoidal current trace of one pulse and integrates it
/// into an effective duration.
fn simulate_pulse_t_eff(
    nominal: f64,
    scale: f64,
    model: &CurrentPulseModel,
) -> Result<f64, SequenceError> {
    if nominal == 0.0 {
        return Ok(0.0);
    }
    let n = ((nominal * model.sample_rate).ceil() as usize + 1).max(2);
    let dt = nominal / (n - 1) as f64;
    let peak = scale * model.reference_current;
    let trace: Vec<f64> = (0..n)
        .map(|i| {
            let tau = i as f64 * dt;
            let profile = if model.ramp_time == 0.0 {
                1.0
            } else {
                (tau.min(nominal - tau) / model.ramp_time).min(1.0)
            };
            peak * profile
        })
        .collect();
    effective_time(&trace, 1.0 / dt, model.reference_current)
}

/// Synthesizes one [`SignalGrid`] per requested quadrature.
///
/// Per grid point: draw one current scale factor per channel, integrate
/// the pulse trace into effective durations, accumulate per-spin phases
/// at the spin's per-channel frequencies `omega_k(x)` (channel `k`
/// energized alone at the reference current), apply the Gaussian
/// envelope at the nominal durations, and add readout noise. Current
/// draws are keyed by `(seed, point, channel)` and shared between the
/// two quadratures; readout noise is keyed per quadrature.
pub fn synthesize(
    asm: &WireAssembly,
    qaxis: &QuantizationAxis,
    ensemble: &SpinEnsemble,
    pulse_model: &CurrentPulseModel,
    spec: &SequenceSpec,
) -> Result<Vec<SignalGrid>, SequenceError> {
    spec.validate()?;
    ensemble.validate()?;
    pulse_model.validate()?;
    for channel in &spec.channels {
        asm.channel(channel)?;
    }

    let n_channels = spec.channels.len();
    let shape = spec.shape();
    let n_points: usize = shape.iter().product();

    // Per-spin per-channel frequencies and coherence times, fixed over
    // the grid.
    let mut freqs = Vec::with_capacity(ensemble.spins.len());
    for (spin_idx, spin) in ensemble.spins.iter().enumerate() {
        let mut per_channel = Vec::with_capacity(n_channels);
        for channel in &spec.channels {
            per_channel.push(channel_shift(
                asm,
                channel,
                pulse_model.reference_current,
                qaxis,
                spin.position,
            )?);
            if !spin.coherence_times.contains_key(channel) {
                return Err(SequenceError::MissingCoherenceTime {
                    spin: spin_idx,
                    channel: channel.clone(),
                });
            }
        }
        freqs.push(per_channel);
    }
    let weights: Vec<f64> = ensemble.spins.iter().map(|s| s.weight).collect();

    let exact_durations = pulse_model.shot_to_shot_sigma == 0.0 && pulse_model.ramp_time == 0.0;

    let unravel = |linear: usize| -> Vec<usize> {
        let mut idx = vec![0; n_channels];
        let mut rest = linear;
        for dim in (0..n_channels).rev() {
            idx[dim] = rest % shape[dim];
            rest /= shape[dim];
        }
        idx
    };
    let nominal_at = |idx: &[usize]| -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(k, i)| spec.durations[k].value(*i))
            .collect()
    };

    // Realized effective durations, shared between the quadratures.
    let mut t_eff_flat = vec![0.0; n_points * n_channels];
    t_eff_flat
        .par_chunks_mut(n_channels)
        .enumerate()
        .try_for_each(|(linear, t_eff_row)| -> Result<(), SequenceError> {
            let nominal = nominal_at(&unravel(linear));
            for k in 0..n_channels {
                t_eff_row[k] = if exact_durations {
                    nominal[k]
                } else {
                    let z = noise::standard_normal(
                        spec.seed,
                        &[noise::tag::CURRENT_SCALE, linear as u64, k as u64],
                    );
                    let scale = 1.0 + pulse_model.shot_to_shot_sigma * z;
                    simulate_pulse_t_eff(nominal[k], scale, pulse_model)?
                };
            }
            Ok(())
        })?;

    let mut quad_data: Vec<Vec<f64>> = Vec::with_capacity(spec.quadratures.len());
    for (q_idx, quadrature) in spec.quadratures.iter().enumerate() {
        let mut out = vec![0.0; n_points];
        out.par_iter_mut()
            .enumerate()
            .try_for_each(|(linear, value)| -> Result<(), SequenceError> {
                let t_eff = &t_eff_flat[linear * n_channels..(linear + 1) * n_channels];
                let nominal = nominal_at(&unravel(linear));
                let mut phases = Vec::with_capacity(ensemble.spins.len());
                let mut envelopes = Vec::with_capacity(ensemble.spins.len());
                for (spin, per_channel) in ensemble.spins.iter().zip(&freqs) {
                    phases.push(spin_phase(per_channel, t_eff));
                    envelopes.push(decoherence_envelope(spin, &spec.channels, &nominal)?);
                }
                let mut v = echo_expectation(&phases, &weights, &envelopes, *quadrature);
                if spec.readout_noise_sigma > 0.0 {
                    v += spec.readout_noise_sigma
                        * noise::standard_normal(
                            spec.seed,
                            &[noise::tag::READOUT, q_idx as u64, linear as u64],
                        );
                }
                *value = v;
                Ok(())
            })?;
        quad_data.push(out);
    }

    let axes: Vec<AxisInfo> = spec
        .channels
        .iter()
        .zip(&spec.durations)
        .map(|(channel, axis)| AxisInfo {
            channel: channel.clone(),
            dt_eff_s: axis.step,
            offset_s: axis.offset,
        })
        .collect();
    let meta = GridMeta {
        seed: spec.seed,
        readout_noise_sigma: spec.readout_noise_sigma,
        shot_to_shot_sigma: pulse_model.shot_to_shot_sigma,
    };

    let mut t_eff_shape = shape.clone();
    t_eff_shape.push(n_channels);
    let t_eff_array = ArrayD::from_shape_vec(IxDyn(&t_eff_shape), t_eff_flat)
        .expect("t_eff buffer matches shape");

    Ok(quad_data
        .into_iter()
        .zip(&spec.quadratures)
        .map(|(data, quadrature)| SignalGrid {
            data: ArrayD::from_shape_vec(IxDyn(&shape), data).expect("buffer matches shape"),
            axes: axes.clone(),
            quadrature: *quadrature,
            meta,
            t_eff: Some(t_eff_array.clone()),
        })
        .collect())
}
