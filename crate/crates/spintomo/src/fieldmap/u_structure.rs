//! Builder for the three-arm U microwire geometry.
//!
//! The structure lies in the plane `z = plane_z`. Two parallel side arms
//! run along +y from the corners `A = (-L/2, 0)` and `B = (+L/2, 0)`; the
//! top arm joins the corners along x. Every drive current terminates at
//! the common vertex `A`:
//!
//! ```text
//!   feed I1                     feed I3
//!      |                           |
//!      | arm I1            arm I3 |
//!      |                           |
//!      A --------------------------B --- feed I2
//!      |          top arm (I2)
//!   return (all channels)
//! ```
//!
//! Channel paths are complete current loops up to the far ends of the
//! feed lines: I1 flows down its arm into `A`; I2 enters at `B` and flows
//! along the top arm into `A`; I3 flows down its arm to `B` and continues
//! along the top arm into `A`. All three leave through a shared return
//! line at `A`. Each 5 um arm is expanded into `subdivisions` parallel
//! filaments spanning the wire width; feed and return lines are single
//! centerline filaments.

use indexmap::IndexMap;

use super::{WireAssembly, WireSegment};
use crate::vec3::Vec3;

/// Parameters of the U structure, all lengths in meters.
#[derive(Debug, Clone, Copy)]
pub struct UStructure {
    pub arm_length: f64,
    pub arm_width: f64,
    pub subdivisions: usize,
    pub feedline_length: f64,
    pub plane_z: f64,
}

impl Default for UStructure {
    /// Device of the experiment: 5 um arms, 500 nm wide, 10 subdivisions,
    /// 1 mm feed lines, wires in the z = 0 plane.
    fn default() -> Self {
        UStructure {
            arm_length: 5e-6,
            arm_width: 0.5e-6,
            subdivisions: 10,
            feedline_length: 1e-3,
            plane_z: 0.0,
        }
    }
}

fn filament(start: Vec3, end: Vec3, fraction: f64) -> WireSegment {
    WireSegment {
        start,
        end,
        current_fraction: fraction,
    }
}

/// Centered offsets across the wire width, one per filament.
fn offsets(width: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -width / 2.0 + width * (j as f64 + 0.5) / n as f64)
        .collect()
}

/// Builds the three-channel U assembly described in the module docs.
///
/// Panics if `subdivisions == 0` or any length is non-positive.
pub fn build_u_structure(params: &UStructure) -> WireAssembly {
    assert!(params.subdivisions >= 1, "subdivisions must be >= 1");
    assert!(
        params.arm_length > 0.0 && params.arm_width > 0.0 && params.feedline_length > 0.0,
        "lengths must be positive"
    );

    let l = params.arm_length;
    let w = params.arm_width;
    let n = params.subdivisions;
    let f = params.feedline_length;
    let z = params.plane_z;
    let frac = 1.0 / n as f64;

    let vertex_a = Vec3::new(-l / 2.0, 0.0, z);
    let vertex_b = Vec3::new(l / 2.0, 0.0, z);
    // Common return line continues away from the arms.
    let return_line = filament(vertex_a, Vec3::new(-l / 2.0, -f, z), 1.0);

    // Side arm filaments carry current toward the corner (y = L -> 0).
    let side_arm = |x_center: f64| -> Vec<WireSegment> {
        offsets(w, n)
            .iter()
            .map(|d| {
                filament(
                    Vec3::new(x_center + d, l, z),
                    Vec3::new(x_center + d, 0.0, z),
                    frac,
                )
            })
            .collect()
    };
    // Top arm filaments carry current from B toward A (x = L/2 -> -L/2).
    let top_arm: Vec<WireSegment> = offsets(w, n)
        .iter()
        .map(|d| {
            filament(
                Vec3::new(l / 2.0, *d, z),
                Vec3::new(-l / 2.0, *d, z),
                frac,
            )
        })
        .collect();

    let mut i1 = vec![filament(
        Vec3::new(-l / 2.0, l + f, z),
        Vec3::new(-l / 2.0, l, z),
        1.0,
    )];
    i1.extend(side_arm(-l / 2.0));
    i1.push(return_line);

    let mut i2 = vec![filament(Vec3::new(l / 2.0 + f, 0.0, z), vertex_b, 1.0)];
    i2.extend(top_arm.clone());
    i2.push(return_line);

    let mut i3 = vec![filament(
        Vec3::new(l / 2.0, l + f, z),
        Vec3::new(l / 2.0, l, z),
        1.0,
    )];
    i3.extend(side_arm(l / 2.0));
    i3.extend(top_arm);
    i3.push(return_line);

    let mut channels = IndexMap::new();
    channels.insert("I1".to_string(), i1);
    channels.insert("I2".to_string(), i2);
    channels.insert("I3".to_string(), i3);

    WireAssembly {
        channels,
        wire_width: w,
        subdivisions: n,
    }
}

/// The experiment's device plus the operating point used throughout the
/// demos: drive currents, spin quantization axis, and a reference spin
/// position 6 um below the wire plane where the three per-channel
/// gradient sensitivities reproduce the measured 7.63, 6.34 and
/// 6.86 kHz/nm.
#[derive(Debug, Clone)]
pub struct PaperDevice {
    pub assembly: WireAssembly,
    pub qaxis: super::QuantizationAxis,
    pub currents: super::ChannelCurrents,
    /// Reference spin position, 6 um below the wire plane.
    pub nv_point: Vec3,
}

/// Drive current per channel in the reference experiment.
pub const PAPER_DRIVE_CURRENT_A: f64 = 0.080;

/// Depth of the imaged spins below the wire plane.
pub const PAPER_NV_DEPTH_M: f64 = 6e-6;

// Operating point fixed by matching the simulated gradient magnitudes
// to the measured per-channel sensitivities at 6 um depth. The point
// sits below the I3 corner of the U; the axis is in-plane-dominant with
// a small out-of-plane tilt.
pub(crate) const PAPER_NV_XY_M: (f64, f64) = (2.20556640625e-6, -5.322265625e-8);
pub(crate) const PAPER_AXIS: Vec3 = Vec3::new(
    0.97724051138316137,
    0.14527933178219221,
    0.15457974857172174,
);

pub fn paper_device() -> PaperDevice {
    let params = UStructure::default();
    let assembly = build_u_structure(&params);
    let qaxis = super::QuantizationAxis::nv(PAPER_AXIS).expect("fixed axis is valid");
    let currents = super::channel_currents(&[
        ("I1", PAPER_DRIVE_CURRENT_A),
        ("I2", PAPER_DRIVE_CURRENT_A),
        ("I3", PAPER_DRIVE_CURRENT_A),
    ]);
    PaperDevice {
        assembly,
        qaxis,
        currents,
        nv_point: Vec3::new(PAPER_NV_XY_M.0, PAPER_NV_XY_M.1, params.plane_z - PAPER_NV_DEPTH_M),
    }
}
