use approx::{assert_relative_eq, relative_eq};
use proptest::prelude::*;

use super::*;
use crate::vec3::Vec3;

const GAUSS: f64 = 1e-4; // tesla per gauss

fn straight_segment(len: f64) -> WireSegment {
    WireSegment::new(
        Vec3::new(0.0, -len / 2.0, 0.0),
        Vec3::new(0.0, len / 2.0, 0.0),
        1.0,
    )
    .unwrap()
}

/// Brute-force Biot-Savart line integral with adaptive Simpson
/// refinement, independent of the analytic kernel.
fn quadrature_field(seg: &WireSegment, current: f64, point: Vec3, tol: f64) -> Vec3 {
    let dl = seg.end - seg.start;
    let integrand = |t: f64| -> Vec3 {
        let r = point - (seg.start + dl * t);
        let r3 = r.norm().powi(3);
        dl.cross(r) / r3
    };
    fn simpson(f: &dyn Fn(f64) -> Vec3, a: f64, b: f64) -> Vec3 {
        (f(a) + f((a + b) / 2.0) * 4.0 + f(b)) * ((b - a) / 6.0)
    }
    fn adapt(f: &dyn Fn(f64) -> Vec3, a: f64, b: f64, whole: Vec3, tol: f64, depth: u32) -> Vec3 {
        let m = (a + b) / 2.0;
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        let err = (left + right - whole).norm();
        if err < 15.0 * tol || depth > 40 {
            left + right + (left + right - whole) / 15.0
        } else {
            adapt(f, a, m, left, tol / 2.0, depth + 1) + adapt(f, m, b, right, tol / 2.0, depth + 1)
        }
    }
    let whole = simpson(&integrand, 0.0, 1.0);
    let scale = MU0 / (4.0 * std::f64::consts::PI) * current * seg.current_fraction;
    adapt(&integrand, 0.0, 1.0, whole, tol * whole.norm().max(1e-300), 0) * scale
}

#[test]
fn long_segment_reaches_infinite_wire_limit() {
    // 1 m segment, 80 mA, 6 um standoff: mu0*I/(2*pi*d) = 26.67 G.
    let seg = straight_segment(1.0);
    let d = 6e-6;
    let b = segment_field(&seg, 0.080, Vec3::new(d, 0.0, 0.0)).unwrap();
    let expected = MU0 * 0.080 / (2.0 * std::f64::consts::PI * d);
    assert_relative_eq!(b.norm(), expected, max_relative = 1e-3);
    assert_relative_eq!(b.norm() / GAUSS, 26.67, max_relative = 1e-3);
    // Right-hand rule: current +y, point +x, field points -z.
    assert!(b.z < 0.0);
    assert_relative_eq!(b.x, 0.0, epsilon = 1e-20);
}

#[test]
fn infinite_wire_limit_convergence_rate() {
    // Relative error of the midpoint field vs the infinite-wire value
    // scales as (d/L)^2.
    let d = 1e-6;
    let infinite = MU0 * 1.0 / (2.0 * std::f64::consts::PI * d);
    for ratio in [10.0, 100.0, 1000.0] {
        let seg = straight_segment(ratio * d);
        let b = segment_field(&seg, 1.0, Vec3::new(d, 0.0, 0.0)).unwrap();
        let rel_err = (b.norm() - infinite).abs() / infinite;
        assert!(
            rel_err <= 4.0 / (ratio * ratio),
            "L/d = {ratio}: error {rel_err:.3e} above (d/L)^2 bound"
        );
    }
}

#[test]
fn collinear_point_outside_segment_sees_zero_field() {
    let seg = straight_segment(1e-3);
    let b = segment_field(&seg, 0.5, Vec3::new(0.0, 1.0, 0.0)).unwrap();
    assert_eq!(b, Vec3::ZERO);
}

#[test]
fn point_on_filament_is_singular() {
    let seg = straight_segment(1e-3);
    assert_eq!(
        segment_field(&seg, 0.5, Vec3::ZERO),
        Err(OnFilament)
    );
    // Endpoints included.
    assert_eq!(segment_field(&seg, 0.5, seg.start), Err(OnFilament));
}

#[test]
fn analytic_kernel_matches_quadrature_oracle() {
    // 5 um segment observed 3 um off the midpoint, plus a few skewed
    // geometries.
    let cases = [
        (straight_segment(5e-6), Vec3::new(3e-6, 0.0, 0.0)),
        (straight_segment(5e-6), Vec3::new(2e-6, 4e-6, -1e-6)),
        (
            WireSegment::new(
                Vec3::new(1e-6, -2e-6, 0.5e-6),
                Vec3::new(-3e-6, 1e-6, 2e-6),
                0.7,
            )
            .unwrap(),
            Vec3::new(4e-6, 4e-6, 4e-6),
        ),
    ];
    for (seg, point) in cases {
        let analytic = segment_field(&seg, 0.080, point).unwrap();
        let numeric = quadrature_field(&seg, 0.080, point, 1e-12);
        assert_relative_eq!(analytic.x, numeric.x, max_relative = 1e-9);
        assert_relative_eq!(analytic.y, numeric.y, max_relative = 1e-9);
        assert_relative_eq!(analytic.z, numeric.z, max_relative = 1e-9);
    }
}

#[test]
fn zero_current_channels_contribute_nothing() {
    let asm = build_u_structure(&UStructure::default());
    let point = Vec3::new(0.3e-6, 2e-6, -6e-6);
    let only_i1 = assembly_field(&asm, &channel_currents(&[("I1", 0.08)]), point).unwrap();
    let with_zeros = assembly_field(
        &asm,
        &channel_currents(&[("I1", 0.08), ("I2", 0.0), ("I3", 0.0)]),
        point,
    )
    .unwrap();
    assert_eq!(only_i1, with_zeros);
}

#[test]
fn unknown_channel_is_reported() {
    let asm = build_u_structure(&UStructure::default());
    let err = assembly_field(&asm, &channel_currents(&[("I9", 0.08)]), Vec3::ZERO);
    assert!(matches!(err, Err(FieldError::UnknownChannel(label)) if label == "I9"));
}

#[test]
fn singularity_identifies_offending_segment() {
    let asm = build_u_structure(&UStructure { subdivisions: 1, ..UStructure::default() });
    // Midpoint of the I2 top arm centerline.
    let err = assembly_field(
        &asm,
        &channel_currents(&[("I2", 0.08)]),
        Vec3::new(0.0, 0.0, 0.0),
    );
    match err {
        Err(FieldError::Singularity { channel, segment }) => {
            assert_eq!(channel, "I2");
            assert_eq!(segment, 1); // feed is segment 0, top arm is 1
        }
        other => panic!("expected singularity, got {other:?}"),
    }
}

#[test]
fn u_structure_field_magnitudes_at_depth_are_gauss_scale() {
    // Per-channel 80 mA maps at 6 um depth over the device footprint stay
    // in the gauss range of the reference field maps.
    let device = paper_device();
    for label in ["I1", "I2", "I3"] {
        let currents = channel_currents(&[(label, 0.080)]);
        let mut max_gauss: f64 = 0.0;
        for ix in -3..=3 {
            for iy in -2..=4 {
                let p = Vec3::new(ix as f64 * 1e-6, iy as f64 * 1e-6, -6e-6);
                let b = assembly_field(&device.assembly, &currents, p).unwrap();
                max_gauss = max_gauss.max(b.norm() / GAUSS);
            }
        }
        assert!(
            (1.0..30.0).contains(&max_gauss),
            "{label}: peak field at 6 um depth should be of order 1-30 G, got {max_gauss:.2} G"
        );
    }
}

#[test]
fn larmor_shift_examples() {
    let qaxis = QuantizationAxis::nv(Vec3::new(0.0, 0.0, 1.0)).unwrap();
    // 1 G along the axis at 28.025 GHz/T -> 2.8025 MHz.
    let w = larmor_shift(Vec3::new(0.0, 0.0, GAUSS), &qaxis);
    assert_relative_eq!(
        w / (2.0 * std::f64::consts::PI),
        2.8025e6,
        max_relative = 1e-12
    );
    // Perpendicular field projects to zero.
    assert_eq!(larmor_shift(Vec3::new(GAUSS, 0.0, 0.0), &qaxis), 0.0);
    // Antiparallel flips the sign.
    let w_anti = larmor_shift(Vec3::new(0.0, 0.0, -GAUSS), &qaxis);
    assert_relative_eq!(w_anti, -w, epsilon = 0.0);
}

#[test]
fn jacobian_matches_infinite_wire_derivative() {
    // Long wire along y through the origin; axis along the local field
    // direction (-z at +x side) so the projection factor is 1.
    let mut channels = IndexMap::new();
    channels.insert("W".to_string(), vec![straight_segment(1.0)]);
    let asm = WireAssembly::new(channels, 1e-7, 1).unwrap();
    let qaxis = QuantizationAxis::nv(Vec3::new(0.0, 0.0, -1.0)).unwrap();
    let d = 6e-6;
    let current = 0.080;
    let jac = frequency_jacobian(
        &asm,
        &channel_currents(&[("W", current)]),
        &qaxis,
        Vec3::new(d, 0.0, 0.0),
        1e-9,
    )
    .unwrap();
    let expected = qaxis.gyromagnetic_ratio_hz_per_t() * MU0 * current
        / (2.0 * std::f64::consts::PI * d * d);
    let sens_hz_per_m = jac.row("W").unwrap().norm() / (2.0 * std::f64::consts::PI);
    assert_relative_eq!(sens_hz_per_m, expected, max_relative = 1e-4);
}

#[test]
fn jacobian_central_difference_is_second_order() {
    let device = paper_device();
    let point = device.nv_point;
    let jac_of = |h: f64| {
        frequency_jacobian(&device.assembly, &device.currents, &device.qaxis, point, h)
            .unwrap()
            .row("I1")
            .unwrap()
    };
    // Richardson: error(h) ~ c h^2, so |J(h) - J(h/2)| should shrink 4x
    // when h halves.
    let j4 = jac_of(4e-9);
    let j2 = jac_of(2e-9);
    let j1 = jac_of(1e-9);
    let d42 = (j4 - j2).norm();
    let d21 = (j2 - j1).norm();
    assert!(
        d21 < d42 / 3.0,
        "halving the step should cut the difference ~4x: {d42:.3e} -> {d21:.3e}"
    );
}

#[test]
fn sensitivity_unit_conversion() {
    let row = khz_per_nm_to_rad_s_per_m(6.34);
    let mut rows = IndexMap::new();
    rows.insert("I2".to_string(), Vec3::new(row, 0.0, 0.0));
    let jac = FrequencyJacobian {
        rows,
        point: Vec3::ZERO,
        currents: channel_currents(&[("I2", 0.08)]),
    };
    assert_relative_eq!(sensitivity(&jac, "I2").unwrap(), 6.34, max_relative = 1e-12);
    assert!(matches!(
        sensitivity(&jac, "I7"),
        Err(FieldError::UnknownChannel(_))
    ));
    // Zero row maps to zero sensitivity.
    let mut rows = IndexMap::new();
    rows.insert("I2".to_string(), Vec3::ZERO);
    let jac = FrequencyJacobian {
        rows,
        point: Vec3::ZERO,
        currents: ChannelCurrents::new(),
    };
    assert_eq!(sensitivity(&jac, "I2").unwrap(), 0.0);
}

#[test]
fn u_structure_layout() {
    let asm = build_u_structure(&UStructure::default());
    assert_eq!(asm.channels.len(), 3);
    let n = asm.subdivisions;
    assert_eq!(n, 10);
    // feed + n arm filaments + return
    assert_eq!(asm.channel("I1").unwrap().len(), n + 2);
    assert_eq!(asm.channel("I2").unwrap().len(), n + 2);
    // I3 additionally carries the top arm.
    assert_eq!(asm.channel("I3").unwrap().len(), 2 * n + 2);

    // Subdivision groups carry the full channel current in equal shares.
    let arm_sum: f64 = asm.channel("I1").unwrap()[1..=n]
        .iter()
        .map(|s| s.current_fraction)
        .sum();
    assert_relative_eq!(arm_sum, 1.0, epsilon = 1e-12);
    asm.validate().unwrap();
}

#[test]
fn u_structure_single_subdivision_is_centerline() {
    let asm = build_u_structure(&UStructure {
        subdivisions: 1,
        ..UStructure::default()
    });
    let arm = &asm.channel("I1").unwrap()[1];
    assert_relative_eq!(arm.start.x, -2.5e-6, epsilon = 1e-18);
    assert_eq!(arm.current_fraction, 1.0);
}

#[test]
fn assembly_json_roundtrip() {
    let asm = build_u_structure(&UStructure::default());
    let json = serde_json::to_string(&asm).unwrap();
    assert!(json.starts_with("{\"channels\":{\"I1\":[{\"start\":["));
    assert!(json.contains("\"width\":5e-7"));
    assert!(json.contains("\"subdivisions\":10"));
    let back: WireAssembly = serde_json::from_str(&json).unwrap();
    back.validate().unwrap();
    let p = Vec3::new(1e-6, 2e-6, -6e-6);
    let currents = channel_currents(&[("I1", 0.08), ("I2", 0.03), ("I3", -0.05)]);
    assert_eq!(
        assembly_field(&asm, &currents, p).unwrap(),
        assembly_field(&back, &currents, p).unwrap()
    );
}

#[test]
fn invalid_types_are_rejected() {
    assert!(matches!(
        WireSegment::new(Vec3::ZERO, Vec3::ZERO, 1.0),
        Err(FieldError::ZeroLengthSegment)
    ));
    assert!(matches!(
        WireSegment::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 0.0),
        Err(FieldError::InvalidFraction(_))
    ));
    assert!(matches!(
        QuantizationAxis::new(Vec3::ZERO, 1.0),
        Err(FieldError::ZeroAxis)
    ));
    assert!(matches!(
        QuantizationAxis::new(Vec3::new(1.0, 0.0, 0.0), -3.0),
        Err(FieldError::InvalidGyromagneticRatio(_))
    ));
}

fn arb_point() -> impl Strategy<Value = Vec3> {
    // Stay a few wire widths away from the structure plane.
    (
        -20e-6..20e-6f64,
        -20e-6..20e-6f64,
        prop_oneof![-20e-6..-1e-6f64, 1e-6..20e-6f64],
    )
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn superposition_of_currents(p in arb_point(), a in -0.2..0.2f64, b in -0.2..0.2f64) {
        let asm = build_u_structure(&UStructure::default());
        let ca = channel_currents(&[("I1", a), ("I2", b), ("I3", a - b)]);
        let cb = channel_currents(&[("I1", b), ("I2", -a), ("I3", 0.5 * a)]);
        let sum: ChannelCurrents = ca
            .iter()
            .map(|(k, v)| (k.clone(), v + cb[k.as_str()]))
            .collect();
        let fa = assembly_field(&asm, &ca, p).unwrap();
        let fb = assembly_field(&asm, &cb, p).unwrap();
        let fsum = assembly_field(&asm, &sum, p).unwrap();
        // Componentwise to 1e-12 relative; the scale reference guards
        // against cancellation when the summed currents nearly vanish.
        let scale = fa.norm() + fb.norm() + fsum.norm();
        prop_assert!((fsum - (fa + fb)).norm() <= 1e-12 * scale);
    }

    #[test]
    fn scaling_of_currents(p in arb_point(), alpha in -4.0..4.0f64) {
        let asm = build_u_structure(&UStructure::default());
        let base = channel_currents(&[("I1", 0.08), ("I2", 0.08), ("I3", 0.08)]);
        let scaled: ChannelCurrents = base
            .iter()
            .map(|(k, v)| (k.clone(), alpha * v))
            .collect();
        let f1 = assembly_field(&asm, &base, p).unwrap();
        let fs = assembly_field(&asm, &scaled, p).unwrap();
        // Each per-segment term is linear in current to within a rounding
        // step; reference the per-channel magnitudes so cancellation in
        // the vector sum cannot inflate the relative bound.
        let per_channel_scale: f64 = base
            .iter()
            .map(|(k, v)| {
                let one = channel_currents(&[(k.as_str(), *v)]);
                assembly_field(&asm, &one, p).unwrap().norm()
            })
            .sum();
        prop_assert!((fs - f1 * alpha).norm() <= 5e-15 * alpha.abs() * per_channel_scale);
    }

    #[test]
    fn doubling_currents_doubles_the_field_exactly(p in arb_point()) {
        let asm = build_u_structure(&UStructure::default());
        let base = channel_currents(&[("I1", 0.08), ("I2", -0.03), ("I3", 0.05)]);
        let doubled: ChannelCurrents = base
            .iter()
            .map(|(k, v)| (k.clone(), 2.0 * v))
            .collect();
        let f1 = assembly_field(&asm, &base, p).unwrap();
        let f2 = assembly_field(&asm, &doubled, p).unwrap();
        prop_assert_eq!(f2, f1 * 2.0);
    }

    #[test]
    fn reflection_antisymmetry(
        y0 in -3.0..0.0f64,
        y1 in 0.1..3.0f64,
        px in 0.01..2.0f64,
        py in -2.0..2.0f64,
        pz in -2.0..2.0f64,
    ) {
        // Segment on the y axis; reflect the point through the y-z plane
        // (which contains the wire). B must flip to minus its mirror image.
        let seg = WireSegment::new(
            Vec3::new(0.0, y0, 0.0),
            Vec3::new(0.0, y1, 0.0),
            1.0,
        ).unwrap();
        let p = Vec3::new(px, py, pz);
        let b = segment_field(&seg, 1.0, p).unwrap();
        let b_ref = segment_field(&seg, 1.0, Vec3::new(-px, py, pz)).unwrap();
        let mirrored = Vec3::new(-b.x, b.y, b.z);
        prop_assert!(relative_eq!(b_ref.x, -mirrored.x, max_relative = 1e-12, epsilon = 1e-24));
        prop_assert!(relative_eq!(b_ref.y, -mirrored.y, max_relative = 1e-12, epsilon = 1e-24));
        prop_assert!(relative_eq!(b_ref.z, -mirrored.z, max_relative = 1e-12, epsilon = 1e-24));
    }
}

#[test]
fn mixed_second_differences_commute() {
    // The Jacobian rows are gradients of a scalar field, so
    // differentiating row component y along x must agree with
    // differentiating row component x along y (curl of a gradient is
    // zero) within truncation error.
    let device = paper_device();
    let p = device.nv_point;
    let h = 2e-8;
    let row_at = |q: Vec3| {
        frequency_jacobian(&device.assembly, &device.currents, &device.qaxis, q, 4e-9)
            .unwrap()
            .row("I1")
            .unwrap()
    };
    let dx = Vec3::new(h, 0.0, 0.0);
    let dy = Vec3::new(0.0, h, 0.0);
    let d_rowy_dx = (row_at(p + dx).y - row_at(p - dx).y) / (2.0 * h);
    let d_rowx_dy = (row_at(p + dy).x - row_at(p - dy).x) / (2.0 * h);
    // Each nested difference carries its own O(h^2) truncation term, so
    // agreement is bounded by truncation, not roundoff.
    assert_relative_eq!(d_rowy_dx, d_rowx_dy, max_relative = 1e-3);
}
