//! Magnetostatic engine: Biot-Savart fields of straight-filament wire
//! assemblies, current-induced Larmor shifts, and frequency Jacobians.
//!
//! A physical wire of finite width is modelled as a group of parallel
//! filaments, each carrying a fraction of the channel current. Fields are
//! evaluated with the exact analytic expression for a finite straight
//! segment, so superposition and scaling hold to machine precision.
//!
//! # Units
//!
//! SI throughout: positions in meters, currents in amperes, fields in
//! tesla, angular frequencies in rad/s. Sensitivities are reported in
//! kHz/nm (1 kHz/nm = 1e12 Hz/m).

mod u_structure;

pub use u_structure::{
    build_u_structure, paper_device, PaperDevice, UStructure, PAPER_DRIVE_CURRENT_A,
    PAPER_NV_DEPTH_M,
};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::Vec3;

/// Vacuum permeability in H/m (CODATA 2018).
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Electron-spin gyromagnetic ratio of the NV center in Hz/T.
///
/// Standard NV value; other spin species go through
/// [`QuantizationAxis::new`] with their own ratio.
pub const NV_GYROMAGNETIC_RATIO_HZ_PER_T: f64 = 28.025e9;

/// Observation points closer than this to a filament line are treated as
/// on-filament. Far below any physical coordinate in play.
pub const SINGULARITY_GUARD_M: f64 = 1e-12;

/// Per-channel drive currents in amperes, keyed by channel label.
pub type ChannelCurrents = IndexMap<String, f64>;

/// Convenience constructor for [`ChannelCurrents`] from label/ampere pairs.
pub fn channel_currents(pairs: &[(&str, f64)]) -> ChannelCurrents {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("observation point lies on a filament (channel {channel:?}, segment {segment})")]
    Singularity { channel: String, segment: usize },
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("wire segment has zero length")]
    ZeroLengthSegment,
    #[error("current_fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("quantization axis must have nonzero norm")]
    ZeroAxis,
    #[error("gyromagnetic ratio must be positive, got {0}")]
    InvalidGyromagneticRatio(f64),
    #[error("channel {0:?} has no segments")]
    EmptyChannel(String),
}

/// Marker error for the single-segment kernel: the point sits on the
/// filament itself, where the field diverges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("observation point lies on the current filament")]
pub struct OnFilament;

/// One straight current filament.
///
/// `current_fraction` is the share of the owning channel's current this
/// filament carries; filaments subdividing one physical wire sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireSegment {
    pub start: Vec3,
    pub end: Vec3,
    pub current_fraction: f64,
}

impl WireSegment {
    pub fn new(start: Vec3, end: Vec3, current_fraction: f64) -> Result<Self, FieldError> {
        let seg = WireSegment {
            start,
            end,
            current_fraction,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if (self.end - self.start).norm() == 0.0 {
            return Err(FieldError::ZeroLengthSegment);
        }
        if !(self.current_fraction > 0.0 && self.current_fraction <= 1.0) {
            return Err(FieldError::InvalidFraction(self.current_fraction));
        }
        Ok(())
    }
}

/// Named channels of straight filaments plus the subdivision metadata the
/// builder used. Serializes as
/// `{ "channels": { "I1": [...] }, "width": w, "subdivisions": n }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireAssembly {
    pub channels: IndexMap<String, Vec<WireSegment>>,
    #[serde(rename = "width")]
    pub wire_width: f64,
    pub subdivisions: usize,
}

impl WireAssembly {
    pub fn new(
        channels: IndexMap<String, Vec<WireSegment>>,
        wire_width: f64,
        subdivisions: usize,
    ) -> Result<Self, FieldError> {
        let asm = WireAssembly {
            channels,
            wire_width,
            subdivisions,
        };
        asm.validate()?;
        Ok(asm)
    }

    /// Checks the type invariants; used after deserialization.
    pub fn validate(&self) -> Result<(), FieldError> {
        for (label, segments) in &self.channels {
            if segments.is_empty() {
                return Err(FieldError::EmptyChannel(label.clone()));
            }
            for seg in segments {
                seg.validate()?;
            }
        }
        Ok(())
    }

    pub fn channel(&self, label: &str) -> Result<&[WireSegment], FieldError> {
        self.channels
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| FieldError::UnknownChannel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }
}

/// Spin quantization axis and gyromagnetic ratio for the linear Zeeman
/// model `omega = 2*pi*gamma*(B . axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationAxis {
    axis: Vec3,
    gyromagnetic_ratio_hz_per_t: f64,
}

impl QuantizationAxis {
    /// Normalizes `axis`; errors on a zero vector or non-positive ratio.
    pub fn new(axis: Vec3, gyromagnetic_ratio_hz_per_t: f64) -> Result<Self, FieldError> {
        let axis = axis.normalized().ok_or(FieldError::ZeroAxis)?;
        if !(gyromagnetic_ratio_hz_per_t > 0.0) {
            return Err(FieldError::InvalidGyromagneticRatio(
                gyromagnetic_ratio_hz_per_t,
            ));
        }
        Ok(QuantizationAxis {
            axis,
            gyromagnetic_ratio_hz_per_t,
        })
    }

    /// NV electron spin along the given direction.
    pub fn nv(axis: Vec3) -> Result<Self, FieldError> {
        Self::new(axis, NV_GYROMAGNETIC_RATIO_HZ_PER_T)
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn gyromagnetic_ratio_hz_per_t(&self) -> f64 {
        self.gyromagnetic_ratio_hz_per_t
    }
}

/// Gradient of the per-channel Larmor shift at one point: one row of
/// `d(omega_k)/dx` (rad/s per meter) per energized channel.
#[derive(Debug, Clone)]
pub struct FrequencyJacobian {
    pub rows: IndexMap<String, Vec3>,
    pub point: Vec3,
    pub currents: ChannelCurrents,
}

impl FrequencyJacobian {
    pub fn row(&self, channel: &str) -> Result<Vec3, FieldError> {
        self.rows
            .get(channel)
            .copied()
            .ok_or_else(|| FieldError::UnknownChannel(channel.to_string()))
    }
}

/// Analytic Biot-Savart field of one finite straight filament.
///
/// Uses the perpendicular-distance form
/// `B = mu0*I/(4*pi*d) * (s1/|r1| - s2/|r2|) * phi_hat`
/// with `r1 = point - start`, `r2 = point - end`, `s_i` their projections
/// on the wire direction and `d` the perpendicular distance. For points
/// abeam of the segment the two sine terms add, so the expression stays
/// accurate even for segments much longer than the standoff. The filament
/// carries `current * current_fraction`; direction follows the right-hand
/// rule about start->end.
pub fn segment_field(
    seg: &WireSegment,
    current: f64,
    point: Vec3,
) -> Result<Vec3, OnFilament> {
    debug_assert!(current.is_finite());
    let axis = seg.end - seg.start;
    let len_sq = axis.norm_sq();

    let r1 = point - seg.start;
    let r2 = point - seg.end;

    // Perpendicular distance and projection parameter along the segment.
    let t = r1.dot(axis) / len_sq;
    let perp = r1 - axis * t;
    let d = perp.norm();
    if d < SINGULARITY_GUARD_M {
        if (0.0..=1.0).contains(&t) {
            return Err(OnFilament);
        }
        // Collinear but outside the segment: dl x r vanishes identically.
        return Ok(Vec3::ZERO);
    }

    let u = axis / len_sq.sqrt();
    let s1 = r1.dot(u);
    let s2 = r2.dot(u);
    let geom = (s1 / r1.norm() - s2 / r2.norm()) / d;
    let scale = MU0 / (4.0 * std::f64::consts::PI) * current * seg.current_fraction * geom;
    Ok(u.cross(perp / d) * scale)
}

/// Superposed field of every filament of every energized channel.
///
/// Channels with zero current are skipped. Every channel named in
/// `currents` must exist in the assembly.
pub fn assembly_field(
    asm: &WireAssembly,
    currents: &ChannelCurrents,
    point: Vec3,
) -> Result<Vec3, FieldError> {
    let mut total = Vec3::ZERO;
    for (label, current) in currents {
        let segments = asm.channel(label)?;
        if *current == 0.0 {
            continue;
        }
        for (idx, seg) in segments.iter().enumerate() {
            total += segment_field(seg, *current, point).map_err(|OnFilament| {
                FieldError::Singularity {
                    channel: label.clone(),
                    segment: idx,
                }
            })?;
        }
    }
    Ok(total)
}

/// Field at many points, parallelized; per-point results are deterministic
/// and independent of evaluation order.
pub fn assembly_field_many(
    asm: &WireAssembly,
    currents: &ChannelCurrents,
    points: &[Vec3],
) -> Result<Vec<Vec3>, FieldError> {
    points
        .par_iter()
        .map(|&p| assembly_field(asm, currents, p))
        .collect()
}

/// Current-induced Larmor shift in rad/s under the linear Zeeman model:
/// `omega = 2*pi*gamma*(B . axis)`. Sign is preserved.
pub fn larmor_shift(b: Vec3, qaxis: &QuantizationAxis) -> f64 {
    2.0 * std::f64::consts::PI * qaxis.gyromagnetic_ratio_hz_per_t * b.dot(qaxis.axis)
}

/// Larmor shift of a single channel energized alone at `current`.
pub fn channel_shift(
    asm: &WireAssembly,
    channel: &str,
    current: f64,
    qaxis: &QuantizationAxis,
    point: Vec3,
) -> Result<f64, FieldError> {
    let segments = asm.channel(channel)?;
    let mut b = Vec3::ZERO;
    for (idx, seg) in segments.iter().enumerate() {
        b += segment_field(seg, current, point).map_err(|OnFilament| FieldError::Singularity {
            channel: channel.to_string(),
            segment: idx,
        })?;
    }
    Ok(larmor_shift(b, qaxis))
}

/// Central-difference gradient of the per-channel Larmor shift.
///
/// Each channel in `currents` is energized alone and differentiated along
/// x, y, z with step `step` (meters). Keep `step` well below the distance
/// to the nearest wire; 1 nm is a good default at micrometer standoff.
pub fn frequency_jacobian(
    asm: &WireAssembly,
    currents: &ChannelCurrents,
    qaxis: &QuantizationAxis,
    point: Vec3,
    step: f64,
) -> Result<FrequencyJacobian, FieldError> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let axes = [
        Vec3::new(step, 0.0, 0.0),
        Vec3::new(0.0, step, 0.0),
        Vec3::new(0.0, 0.0, step),
    ];
    let mut rows = IndexMap::new();
    for (label, current) in currents {
        let mut row = [0.0; 3];
        for (i, h) in axes.iter().enumerate() {
            let plus = channel_shift(asm, label, *current, qaxis, point + *h)?;
            let minus = channel_shift(asm, label, *current, qaxis, point - *h)?;
            row[i] = (plus - minus) / (2.0 * step);
        }
        rows.insert(label.clone(), Vec3::from_array(row));
    }
    Ok(FrequencyJacobian {
        rows,
        point,
        currents: currents.clone(),
    })
}

/// Gradient magnitude of one channel's Larmor shift in kHz/nm:
/// `|row| / 2pi` converted from Hz/m (1 kHz/nm = 1e12 Hz/m).
pub fn sensitivity(jac: &FrequencyJacobian, channel: &str) -> Result<f64, FieldError> {
    let row = jac.row(channel)?;
    Ok(row.norm() / (2.0 * std::f64::consts::PI) / 1e12)
}

/// Inverse of the [`sensitivity`] unit conversion, for round-trip checks.
pub fn khz_per_nm_to_rad_s_per_m(khz_per_nm: f64) -> f64 {
    khz_per_nm * 1e12 * 2.0 * std::f64::consts::PI
}

#[cfg(test)]
mod tests;
