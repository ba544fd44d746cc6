// Reports the per-channel frequencies and sensitivities at the
// calibrated operating point.
use spintomo::fieldmap::*;
use spintomo::Vec3;

fn main() {
    let device = paper_device();
    let jac = frequency_jacobian(
        &device.assembly,
        &device.currents,
        &device.qaxis,
        device.nv_point,
        1e-9,
    )
    .unwrap();
    for ch in ["I1", "I2", "I3"] {
        let w = channel_shift(&device.assembly, ch, device.currents[ch], &device.qaxis, device.nv_point).unwrap();
        println!(
            "{ch}: f = {:.4} MHz, sensitivity = {:.4} kHz/nm",
            w / (2.0 * std::f64::consts::PI) / 1e6,
            sensitivity(&jac, ch).unwrap()
        );
    }
    let b = assembly_field(&device.assembly, &device.currents, device.nv_point).unwrap();
    println!("B(all channels) = {:.3} G, |B.axis| = {:.3} G", b.norm() / 1e-4, b.dot(device.qaxis.axis()).abs() / 1e-4);
    let _ = Vec3::ZERO;
}
