//! Bundled demonstration configurations covering the four canonical
//! workflows: 1D imaging, 3D imaging, aliasing zoom, and the coherence /
//! resolution analysis.
//!
//! All demos run on the reference U-structure device. Spin placements
//! are computed against the device's gradient directions at build time,
//! so peak separations come out well resolved at the configured grids.

use anyhow::bail;
use spintomo::fieldmap::{channel_shift, frequency_jacobian, paper_device, PaperDevice};
use spintomo::sequencer::Quadrature;
use spintomo::vec3::Vec3;

use crate::config::{
    AnalysisConfig, DurationAxisConfig, EnsembleConfig, LocalizeConfig, PeaksConfig, ReconConfig,
    ReconMode, RunConfig, SequenceConfig, SpinConfig, ZoomConfig,
};
use crate::pipeline::Stage;

pub const DEMO_NAMES: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];

/// Per-channel Larmor frequency (Hz) of a spin at `position`.
fn channel_freq(device: &PaperDevice, channel: &str, position: Vec3) -> f64 {
    let w = channel_shift(
        &device.assembly,
        channel,
        device.currents[channel],
        &device.qaxis,
        position,
    )
    .expect("reference geometry is regular off the wire plane");
    w / (2.0 * std::f64::consts::PI)
}

/// Unit vector along the frequency gradient of one channel at the
/// reference point.
fn gradient_direction(device: &PaperDevice, channel: &str) -> Vec3 {
    let jac = frequency_jacobian(
        &device.assembly,
        &device.currents,
        &device.qaxis,
        device.nv_point,
        1e-9,
    )
    .expect("reference point is off the wire plane");
    jac.row(channel)
        .expect("channel exists")
        .normalized()
        .expect("gradient is nonzero at the operating point")
}

fn spin(position: Vec3, channels: &[&str], t2: f64) -> SpinConfig {
    SpinConfig {
        position_m: position.to_array(),
        weight: 1.0,
        coherence_times_s: channels.iter().map(|c| (c.to_string(), t2)).collect(),
    }
}

/// 1D imaging: three spins along the I2 gradient, both quadratures, FFT
/// reconstruction and peaks. 600 points at 25 ns cover the 16.9 MHz
/// carrier with 67 kHz resolution.
fn fig1() -> (RunConfig, Vec<Stage>) {
    let device = paper_device();
    let channels = ["I2"];
    let direction = gradient_direction(&device, "I2");
    let spins: Vec<SpinConfig> = [-40e-9, 0.0, 55e-9]
        .iter()
        .map(|d| spin(device.nv_point + direction * *d, &channels, 8.64e-6))
        .collect();
    let config = RunConfig {
        ensemble: EnsembleConfig {
            spins: Some(spins),
            random: None,
        },
        sequence: SequenceConfig {
            channels: vec!["I2".to_string()],
            durations: vec![DurationAxisConfig {
                offset_s: 0.0,
                step_s: 25e-9,
                count: 600,
            }],
            quadratures: vec![Quadrature::X, Quadrature::Y],
            readout_noise_sigma: 0.02,
            seed: 11,
            ..SequenceConfig::default()
        },
        recon: ReconConfig {
            mode: ReconMode::Fft,
            peaks: PeaksConfig {
                threshold: 0.2,
                min_separation: 2,
            },
            ..ReconConfig::default()
        },
        ..RunConfig::default()
    };
    (
        config,
        vec![Stage::Field, Stage::Synth, Stage::Recon, Stage::Analyze],
    )
}

/// 3D imaging: eight spins on a lattice spanned by the three gradient
/// directions, complex FFT volume and peak list. The 40 ns step
/// bandpass-samples the 17-58 MHz carriers; peak positions live in the
/// aliased (wrapped) frequency cells, as in a real acquisition.
fn fig2() -> (RunConfig, Vec<Stage>) {
    let device = paper_device();
    let channels = ["I1", "I2", "I3"];
    let d1 = gradient_direction(&device, "I1");
    let d2 = gradient_direction(&device, "I2");
    let d3 = gradient_direction(&device, "I3");
    let mut spins = Vec::new();
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            for s3 in [-1.0, 1.0] {
                let offset = d1 * (s1 * 160e-9) + d2 * (s2 * 180e-9) + d3 * (s3 * 150e-9);
                spins.push(spin(device.nv_point + offset, &channels, 10e-6));
            }
        }
    }
    let config = RunConfig {
        ensemble: EnsembleConfig {
            spins: Some(spins),
            random: None,
        },
        sequence: SequenceConfig {
            channels: channels.iter().map(|s| s.to_string()).collect(),
            durations: vec![
                DurationAxisConfig {
                    offset_s: 0.0,
                    step_s: 40e-9,
                    count: 24,
                };
                3
            ],
            quadratures: vec![Quadrature::X, Quadrature::Y],
            readout_noise_sigma: 0.02,
            seed: 22,
            ..SequenceConfig::default()
        },
        recon: ReconConfig {
            mode: ReconMode::Fft,
            peaks: PeaksConfig {
                threshold: 0.1,
                min_separation: 1,
            },
            ..ReconConfig::default()
        },
        ..RunConfig::default()
    };
    (config, vec![Stage::Field, Stage::Synth, Stage::Recon])
}

/// Aliasing zoom: two gradients, band-limited three-spin ensemble,
/// automatically planned undersampling, unfolding back to true
/// frequencies.
fn fig3() -> (RunConfig, Vec<Stage>) {
    let device = paper_device();
    let channels = ["I1", "I2"];
    let d1 = gradient_direction(&device, "I1");
    let d2 = gradient_direction(&device, "I2");
    let offsets = [
        d1 * -60e-9 + d2 * 45e-9,
        d1 * 10e-9 + d2 * -55e-9,
        d1 * 70e-9 + d2 * 20e-9,
    ];
    let spins: Vec<SpinConfig> = offsets
        .iter()
        .map(|d| spin(device.nv_point + *d, &channels, 8.64e-6))
        .collect();

    // Full-sampling steps sit comfortably above each carrier band;
    // the band of interest is padded to roughly an eighth of the full
    // Nyquist so the planner lands on a solid single-digit factor.
    let steps = [9e-9, 25e-9];
    let mut bands = Vec::new();
    for (channel, dt) in channels.iter().zip(steps) {
        let freqs: Vec<f64> = offsets
            .iter()
            .map(|d| channel_freq(&device, channel, device.nv_point + *d))
            .collect();
        let lo = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f_nyq_full = 1.0 / (2.0 * dt);
        let pad = (f_nyq_full / 8.0 - (hi - lo)).max(0.2 * (hi - lo)) / 2.0;
        bands.push([lo - pad, hi + pad]);
    }

    let config = RunConfig {
        ensemble: EnsembleConfig {
            spins: Some(spins),
            random: None,
        },
        sequence: SequenceConfig {
            channels: channels.iter().map(|s| s.to_string()).collect(),
            durations: vec![
                DurationAxisConfig {
                    offset_s: 0.0,
                    step_s: steps[0],
                    count: 360,
                },
                DurationAxisConfig {
                    offset_s: 0.0,
                    step_s: steps[1],
                    count: 240,
                },
            ],
            quadratures: vec![Quadrature::X],
            readout_noise_sigma: 0.01,
            seed: 33,
            ..SequenceConfig::default()
        },
        recon: ReconConfig {
            mode: ReconMode::Zoom,
            zoom: ZoomConfig {
                bands_hz: bands,
                factors: None,
            },
            peaks: PeaksConfig {
                threshold: 0.15,
                min_separation: 2,
            },
            ..ReconConfig::default()
        },
        ..RunConfig::default()
    };
    (config, vec![Stage::Field, Stage::Synth, Stage::Recon])
}

/// Coherence benchmarking: long 1D acquisition, spectrogram, band SNR,
/// Gaussian decay fit of the coherence time.
fn fig4() -> (RunConfig, Vec<Stage>) {
    let device = paper_device();
    let t2 = 8.64e-6;
    let f0 = channel_freq(&device, "I2", device.nv_point);
    let dt = 25e-9;
    let count = 1200;
    let window = 256;
    let df = 1.0 / (window as f64 * dt);

    let config = RunConfig {
        ensemble: EnsembleConfig {
            spins: Some(vec![spin(device.nv_point, &["I2"], t2)]),
            random: None,
        },
        sequence: SequenceConfig {
            channels: vec!["I2".to_string()],
            durations: vec![DurationAxisConfig {
                offset_s: 0.0,
                step_s: dt,
                count,
            }],
            quadratures: vec![Quadrature::X],
            readout_noise_sigma: 0.05,
            seed: 44,
            ..SequenceConfig::default()
        },
        recon: ReconConfig {
            mode: ReconMode::Fft,
            ..ReconConfig::default()
        },
        analysis: AnalysisConfig {
            window_length: Some(window),
            hop: Some(window / 4),
            signal_band_hz: Some([f0 - 6.0 * df, f0 + 6.0 * df]),
            noise_band_hz: Some([f0 - 55.0 * df, f0 - 15.0 * df]),
            fit: true,
            input_grid_base: None,
        },
        localize: LocalizeConfig::default(),
        ..RunConfig::default()
    };
    (
        config,
        vec![Stage::Field, Stage::Synth, Stage::Recon, Stage::Analyze],
    )
}

/// Returns the named demo config and the stages it exercises.
pub fn demo_config(name: &str) -> anyhow::Result<(RunConfig, Vec<Stage>)> {
    Ok(match name {
        "fig1" => fig1(),
        "fig2" => fig2(),
        "fig3" => fig3(),
        "fig4" => fig4(),
        other => bail!("unknown demo {other:?}; available: {}", DEMO_NAMES.join(", ")),
    })
}
