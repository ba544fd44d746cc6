use approx::assert_relative_eq;
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;

use super::*;
use crate::sequencer::{noise, AxisInfo, GridMeta, Quadrature, SignalGrid};

fn axis(channel: &str, dt: f64) -> AxisInfo {
    AxisInfo {
        channel: channel.to_string(),
        dt_eff_s: dt,
        offset_s: 0.0,
    }
}

fn meta() -> GridMeta {
    GridMeta {
        seed: 0,
        readout_noise_sigma: 0.0,
        shot_to_shot_sigma: 0.0,
    }
}

/// Synthetic single-quadrature grid: `(1 + sum cos(2 pi f t)) / 2`.
fn real_tone_grid(freqs: &[f64], dt: f64, n: usize) -> SignalGrid {
    let data: Vec<f64> = (0..n)
        .map(|i| {
            let t = dt * i as f64;
            let osc: f64 = freqs
                .iter()
                .map(|f| (2.0 * std::f64::consts::PI * f * t).cos())
                .sum();
            (1.0 + osc / freqs.len() as f64) / 2.0
        })
        .collect();
    SignalGrid {
        data: ArrayD::from_shape_vec(IxDyn(&[n]), data).unwrap(),
        axes: vec![axis("A", dt)],
        quadrature: Quadrature::X,
        meta: meta(),
        t_eff: None,
    }
}

/// Brute-force unitary N-dimensional DFT, independent of the FFT path.
fn dft_oracle(signal: &ArrayD<Complex64>) -> ArrayD<Complex64> {
    let shape = signal.shape().to_vec();
    let norm: f64 = shape.iter().map(|n| 1.0 / (*n as f64).sqrt()).product();
    let mut out = ArrayD::from_elem(IxDyn(&shape), Complex64::default());
    for (k_idx, out_v) in out.indexed_iter_mut() {
        let k = k_idx.slice();
        let mut acc = Complex64::default();
        for (j_idx, v) in signal.indexed_iter() {
            let j = j_idx.slice();
            let phase: f64 = k
                .iter()
                .zip(j)
                .zip(&shape)
                .map(|((kk, jj), nn)| (*kk * *jj) as f64 / *nn as f64)
                .sum();
            acc += v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase);
        }
        *out_v = acc * norm;
    }
    out
}

fn random_complex(shape: &[usize], seed: u64) -> ArrayD<Complex64> {
    let n: usize = shape.iter().product();
    let data: Vec<Complex64> = (0..n)
        .map(|i| {
            Complex64::new(
                noise::standard_normal(seed, &[noise::tag::AUX, 1, i as u64]),
                noise::standard_normal(seed, &[noise::tag::AUX, 2, i as u64]),
            )
        })
        .collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

#[test]
fn combine_single_spin_is_rotating_phasor() {
    let dt = 0.05e-6;
    let n = 64;
    let f = 1.25e6;
    let make = |quad: Quadrature| {
        let data: Vec<f64> = (0..n)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * f * dt * i as f64;
                let osc = match quad {
                    Quadrature::X => phi.cos(),
                    Quadrature::Y => phi.sin(),
                };
                (1.0 + 0.8 * osc) / 2.0
            })
            .collect();
        SignalGrid {
            data: ArrayD::from_shape_vec(IxDyn(&[n]), data).unwrap(),
            axes: vec![axis("A", dt)],
            quadrature: quad,
            meta: meta(),
            t_eff: None,
        }
    };
    let gx = make(Quadrature::X);
    let gy = make(Quadrature::Y);
    let s = complex_combine(&gx, &gy).unwrap();
    for (i, v) in s.iter().enumerate() {
        let phi = 2.0 * std::f64::consts::PI * f * dt * i as f64;
        assert_relative_eq!(v.norm(), 0.4, max_relative = 1e-12);
        let expected = Complex64::from_polar(0.4, phi);
        assert!((v - expected).norm() < 1e-12);
    }

    // A flat y-quadrature leaves a purely real signal.
    let mut flat = gy.clone();
    flat.data.fill(0.5);
    let s = complex_combine(&gx, &flat).unwrap();
    assert!(s.iter().all(|v| v.im == 0.0));

    // Mismatched quadratures are rejected.
    assert!(complex_combine(&gy, &gx).is_err());
}

#[test]
fn combined_signal_has_single_sided_spectrum() {
    let dt = 0.05e-6;
    let n = 64;
    let k0 = 9;
    let f = k0 as f64 / (n as f64 * dt);
    let phasor: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(0.5, 2.0 * std::f64::consts::PI * f * dt * i as f64))
        .collect();
    let signal = ArrayD::from_shape_vec(IxDyn(&[n]), phasor).unwrap();
    let image = spectral_image(&signal, &[axis("A", dt)]).unwrap();
    let total = image.total_power();
    assert!(image.power[IxDyn(&[k0])] / total > 1.0 - 1e-10);

    // The real part alone shows mirror peaks at +-f.
    let real_only = signal.mapv(|c| Complex64::new(c.re, 0.0));
    let image = spectral_image(&real_only, &[axis("A", dt)]).unwrap();
    let p_pos = image.power[IxDyn(&[k0])];
    let p_neg = image.power[IxDyn(&[n - k0])];
    assert_relative_eq!(p_pos, p_neg, max_relative = 1e-10);
    assert!((p_pos + p_neg) / image.total_power() > 1.0 - 1e-10);
}

#[test]
fn spectral_image_matches_brute_force_dft() {
    for (shape, seed) in [
        (vec![16usize], 1u64),
        (vec![33], 2),
        (vec![8, 8], 3),
        (vec![4, 5, 6], 4),
        (vec![16, 16, 16], 5),
    ] {
        let signal = random_complex(&shape, seed);
        let axes: Vec<AxisInfo> = (0..shape.len())
            .map(|k| axis(&format!("C{k}"), 0.1e-6))
            .collect();
        let image = spectral_image(&signal, &axes).unwrap();
        let mean = signal.iter().sum::<Complex64>() / signal.len() as f64;
        let oracle = dft_oracle(&signal.mapv(|v| v - mean));
        let scale: f64 = oracle.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        for (got, want) in image.power.iter().zip(oracle.iter()) {
            let diff = (got - want.norm_sqr()).abs();
            assert!(
                diff <= 1e-9 * scale,
                "shape {shape:?}: power deviates by {diff:e} (scale {scale:e})"
            );
        }
    }
}

#[test]
fn parseval_total_power() {
    let signal = random_complex(&[24, 11], 9);
    let axes = [axis("A", 0.1e-6), axis("B", 0.2e-6)];
    let image = spectral_image(&signal, &axes).unwrap();
    let mean = signal.iter().sum::<Complex64>() / signal.len() as f64;
    let time_norm: f64 = signal.iter().map(|c| (c - mean).norm_sqr()).sum();
    assert_relative_eq!(image.total_power(), time_norm, max_relative = 1e-9);
}

#[test]
fn real_path_folds_every_axis() {
    // One tone: folded 1D spectrum concentrates the full oscillation
    // power at the positive-frequency bin.
    let dt = 0.05e-6;
    let n = 64;
    let k0 = 9;
    let f = k0 as f64 / (n as f64 * dt);
    let grid = real_tone_grid(&[f], dt, n);
    let image = spectral_image_real(&grid).unwrap();
    assert_eq!(image.power.shape(), &[33]);
    assert!(image.power[IxDyn(&[k0])] / image.total_power() > 1.0 - 1e-10);
}

#[test]
fn alias_map_worked_cases() {
    // Fig-3a geometry: 30 MHz at 17.5 MHz Nyquist folds to 5 MHz, mirrored.
    let m = alias_map(30e6, 17.5e6);
    assert_relative_eq!(m.f_obs_hz, 5e6, max_relative = 1e-12);
    assert_eq!(m.alias_index, 1);
    assert!(m.flipped);

    let m = alias_map(10e6, 17.5e6);
    assert_relative_eq!(m.f_obs_hz, 10e6, max_relative = 1e-12);
    assert_eq!(m.alias_index, 0);
    assert!(!m.flipped);

    let m = alias_map(40e6, 17.5e6);
    assert_relative_eq!(m.f_obs_hz, 5e6, max_relative = 1e-12);
    assert_eq!(m.alias_index, 1);
    assert!(!m.flipped);
}

#[test]
fn alias_map_is_idempotent_below_nyquist() {
    for i in 0..1000 {
        let f_nyq = 1e6 + 40e6 * noise::uniform(11, &[noise::tag::AUX, 0, i]);
        let f = f_nyq * noise::uniform(11, &[noise::tag::AUX, 1, i]);
        let m = alias_map(f, f_nyq);
        assert_eq!(m.alias_index, 0);
        assert!(!m.flipped);
        assert_eq!(m.f_obs_hz, f);
    }
}

#[test]
fn alias_map_matches_exhaustive_minimization() {
    for i in 0..100_000u64 {
        let f = 200e6 * noise::uniform(13, &[noise::tag::AUX, 0, i]);
        let f_nyq = 0.5e6 + 30e6 * noise::uniform(13, &[noise::tag::AUX, 1, i]);
        let m = alias_map(f, f_nyq);
        let n_hi = (f / (2.0 * f_nyq)).ceil() as u64 + 1;
        let (mut best_n, mut best_val) = (0u64, f);
        for n in 0..=n_hi {
            let val = (f - 2.0 * n as f64 * f_nyq).abs();
            if val < best_val {
                best_val = val;
                best_n = n;
            }
        }
        assert_eq!(
            m.alias_index, best_n,
            "f={f} f_nyq={f_nyq}: analytic N {} vs exhaustive {best_n}",
            m.alias_index
        );
        assert_relative_eq!(m.f_obs_hz, best_val, max_relative = 1e-9, epsilon = 1e-9);
    }
}

#[test]
fn plan_with_factor_reproduces_fig3_geometry() {
    // Undersampling a 105 MHz-Nyquist acquisition 6x gives 17.5 MHz; the
    // 28-33 MHz band lands mirrored at [2, 7] MHz with N = 1.
    let dt = 1.0 / 210e6;
    let plan = plan_zoom_with_factors(&[(28e6, 33e6)], &[dt], &[6]).unwrap();
    let ax = &plan.axes[0];
    assert_relative_eq!(ax.nyquist_hz, 17.5e6, max_relative = 1e-12);
    assert_eq!(ax.alias_index, 1);
    assert!(ax.flipped);
    let lo = alias_map(33e6, ax.nyquist_hz);
    let hi = alias_map(28e6, ax.nyquist_hz);
    assert_relative_eq!(lo.f_obs_hz, 2e6, max_relative = 1e-12);
    assert_relative_eq!(hi.f_obs_hz, 7e6, max_relative = 1e-12);
    assert_eq!(verify_plan(&plan, 1000, 17), 0);
}

#[test]
fn plan_zoom_maximizes_factor() {
    let dt = 1.0 / 210e6; // full Nyquist 105 MHz
    let plan = plan_zoom(&[(28e6, 33e6)], &[dt]).unwrap();
    let ax = &plan.axes[0];
    // Independent brute-force over factors: largest m whose alias map
    // keeps the band monotone and wide enough.
    let mut best = 1;
    for m in 2..=21 {
        let f_nyq = 105e6 / m as f64;
        if f_nyq < 5e6 {
            continue;
        }
        let lo = alias_map(28e6, f_nyq);
        let hi = alias_map(33e6, f_nyq);
        let monotone = lo.alias_index == hi.alias_index && lo.flipped == hi.flipped;
        if monotone && m > best {
            best = m;
        }
    }
    assert_eq!(ax.undersample_factor, best);
    assert!(ax.zoomed);
    assert_eq!(verify_plan(&plan, 1000, 19), 0);
}

#[test]
fn plan_zoom_full_band_cannot_zoom() {
    let dt = 1.0 / 210e6;
    let plan = plan_zoom(&[(0.0, 105e6)], &[dt]).unwrap();
    assert_eq!(plan.axes[0].undersample_factor, 1);
    assert!(!plan.axes[0].zoomed);
}

#[test]
fn plan_zoom_2d_reduction_18x() {
    // Bands engineered so the maximal factors are exactly (6, 3).
    let dt = 1.0 / 65e6; // full Nyquist 32.5 MHz
    let bands = [(21.7e6, 26.7e6), (22.0e6, 32.0e6)];
    let plan = plan_zoom(&bands, &[dt, dt]).unwrap();
    assert_eq!(plan.factors(), vec![6, 3]);
    let reduction: usize = plan.factors().iter().product();
    assert_eq!(reduction, 18);
    assert_eq!(verify_plan(&plan, 1000, 23), 0);
}

#[test]
fn unfold_relabels_and_flips() {
    // Aliased 1D image with bins [0, 17.5] MHz, plan N = 1 flipped:
    // a bin at 5 MHz must come back at 30 MHz.
    let n_half = 36;
    let df = 0.5e6;
    let mut power = vec![0.0; n_half];
    power[10] = 1.0; // 5 MHz
    let image = SpectralImage {
        power: ArrayD::from_shape_vec(IxDyn(&[n_half]), power).unwrap(),
        axes: vec![FreqAxis {
            channel: "A".to_string(),
            df_hz: df,
            offset_hz: 0.0,
            flipped: false,
        }],
        provenance: Provenance::Fft,
    };
    let plan = ZoomPlan {
        axes: vec![ZoomAxis {
            nyquist_hz: 17.5e6,
            alias_index: 1,
            flipped: true,
            undersample_factor: 6,
            band_hz: (28e6, 33e6),
            zoomed: true,
        }],
    };
    let unfolded = unfold(&image, &plan).unwrap();
    let peaks = peak_extract(&unfolded, 0.5, 1).unwrap();
    assert_eq!(peaks.len(), 1);
    assert_relative_eq!(peaks[0].freqs_hz[0], 30e6, max_relative = 1e-12);
    assert!(unfolded.axes[0].flipped);
    // Power untouched.
    assert_relative_eq!(unfolded.total_power(), image.total_power());

    // Unflipped N = 0 plan is an identity relabeling.
    let plan0 = ZoomPlan {
        axes: vec![ZoomAxis {
            nyquist_hz: 17.5e6,
            alias_index: 0,
            flipped: false,
            undersample_factor: 1,
            band_hz: (0.0, 17.5e6),
            zoomed: false,
        }],
    };
    let same = unfold(&image, &plan0).unwrap();
    assert_eq!(same.power, image.power);
    assert_eq!(same.axes[0].offset_hz, 0.0);
}

#[test]
fn zoom_pipeline_matches_full_pipeline_peaks() {
    // Band-limited three-tone signal: full sampling vs 6x undersampled
    // acquisition, unfolded; peak positions agree within one fine bin.
    let freqs = [28.9e6, 30.4e6, 32.1e6];
    let dt_fine = 1.0 / 210e6;
    let n_fine = 1260;
    let fine = real_tone_grid(&freqs, dt_fine, n_fine);
    let full_image = spectral_image_real(&fine).unwrap();
    let mut full_peaks = peak_extract(&full_image, 0.25, 2).unwrap();

    let plan = plan_zoom_with_factors(&[(28e6, 33e6)], &[dt_fine], &[6]).unwrap();
    let dt_coarse = dt_fine * 6.0;
    let coarse = real_tone_grid(&freqs, dt_coarse, n_fine / 6);
    let aliased = spectral_image_real(&coarse).unwrap();
    let unfolded = unfold(&aliased, &plan).unwrap();
    let mut zoom_peaks = peak_extract(&unfolded, 0.25, 2).unwrap();

    assert_eq!(full_peaks.len(), 3);
    assert_eq!(zoom_peaks.len(), 3);
    let df_fine = full_image.axes[0].df_hz;
    full_peaks.sort_by(|a, b| a.freqs_hz[0].total_cmp(&b.freqs_hz[0]));
    zoom_peaks.sort_by(|a, b| a.freqs_hz[0].total_cmp(&b.freqs_hz[0]));
    for (f, z) in full_peaks.iter().zip(&zoom_peaks) {
        assert!(
            (f.freqs_hz[0] - z.freqs_hz[0]).abs() <= df_fine,
            "peak at {} vs {} (fine bin {df_fine})",
            f.freqs_hz[0],
            z.freqs_hz[0]
        );
    }
}

#[test]
fn l1_fully_sampled_matches_fft() {
    let dt = 0.05e-6;
    let n = 64;
    let signal = random_complex(&[n], 31);
    let mean = signal.iter().sum::<Complex64>() / n as f64;
    let centered = signal.mapv(|v| v - mean);
    let samples: Vec<Complex64> = centered.iter().cloned().collect();
    let indices: Vec<usize> = (0..n).collect();
    let opts = L1Options {
        lambda: 1e-10,
        max_iters: 50,
        tol: 1e-14,
    };
    let (image, report) = l1_reconstruct(&samples, &indices, &[n], &[axis("A", dt)], &opts).unwrap();
    let fft_image = spectral_image(&signal, &[axis("A", dt)]).unwrap();
    let scale = fft_image.power.iter().cloned().fold(0.0f64, f64::max);
    for (a, b) in image.power.iter().zip(fft_image.power.iter()) {
        assert!((a - b).abs() <= 1e-6 * scale);
    }
    assert!(report.converged);
}

#[test]
fn l1_recovers_sparse_support_from_quarter_samples() {
    let n = 64;
    let dt = 0.05e-6;
    let bins = [7usize, 23];
    let full: Vec<Complex64> = (0..n)
        .map(|j| {
            bins.iter()
                .map(|k| {
                    Complex64::from_polar(
                        0.5,
                        2.0 * std::f64::consts::PI * (*k * j) as f64 / n as f64,
                    )
                })
                .sum()
        })
        .collect();
    // Deterministic 25% sample selection.
    let indices: Vec<usize> = (0..n)
        .filter(|j| noise::uniform(41, &[noise::tag::AUX, *j as u64]) < 0.25)
        .collect();
    assert!(indices.len() >= n / 8, "selection too small: {}", indices.len());
    let samples: Vec<Complex64> = indices.iter().map(|j| full[*j]).collect();

    // lambda = 0.01 * max |F y| with y the zero-filled samples.
    let mut zero_filled = ArrayD::from_elem(IxDyn(&[n]), Complex64::default());
    for (s, j) in samples.iter().zip(&indices) {
        zero_filled[IxDyn(&[*j])] = *s;
    }
    fftn_unitary(&mut zero_filled, Direction::Forward);
    let lambda = 0.01 * zero_filled.iter().map(|c| c.norm()).fold(0.0f64, f64::max);

    let opts = L1Options {
        lambda,
        max_iters: 1000,
        tol: 1e-10,
    };
    let (image, report) =
        l1_reconstruct(&samples, &indices, &[n], &[axis("A", dt)], &opts).unwrap();

    // Objective is monotone non-increasing.
    for w in report.objective.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "objective rose: {w:?}");
    }

    let amplitude: Vec<f64> = image.power.iter().map(|p| p.sqrt()).collect();
    let on_support_min = bins.iter().map(|b| amplitude[*b]).fold(f64::INFINITY, f64::min);
    let off_support_max = amplitude
        .iter()
        .enumerate()
        .filter(|(i, _)| !bins.contains(i))
        .map(|(_, a)| *a)
        .fold(0.0f64, f64::max);
    assert!(
        on_support_min >= 10.0 * off_support_max,
        "support not recovered: min on {on_support_min:e}, max off {off_support_max:e}"
    );
}

#[test]
fn l1_zero_samples_give_zero_spectrum() {
    let opts = L1Options::default();
    let (image, _) = l1_reconstruct(&[], &[], &[32], &[axis("A", 0.1e-6)], &opts).unwrap();
    assert!(image.power.iter().all(|p| *p == 0.0));
}

#[test]
fn peak_extract_on_bin_and_off_bin() {
    let dt = 0.05e-6;
    let n = 256;
    let df = 1.0 / (n as f64 * dt);

    // On-bin tone: exact bin frequency.
    let k0 = 40;
    let signal: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k0 * j) as f64 / n as f64))
        .collect();
    let image = spectral_image(
        &ArrayD::from_shape_vec(IxDyn(&[n]), signal).unwrap(),
        &[axis("A", dt)],
    )
    .unwrap();
    let peaks = peak_extract(&image, 0.5, 1).unwrap();
    assert_eq!(peaks.len(), 1);
    assert_relative_eq!(peaks[0].freqs_hz[0], k0 as f64 * df, max_relative = 1e-9);

    // Off-bin tones across the bin: interpolated within 0.1 bin.
    for delta in [0.08, 0.21, 0.37, 0.44, 0.5] {
        let f_true = (k0 as f64 + delta) * df;
        let signal: Vec<Complex64> = (0..n)
            .map(|j| {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f_true * dt * j as f64)
            })
            .collect();
        let image = spectral_image(
            &ArrayD::from_shape_vec(IxDyn(&[n]), signal).unwrap(),
            &[axis("A", dt)],
        )
        .unwrap();
        let peaks = peak_extract(&image, 0.5, 1).unwrap();
        assert!(
            (peaks[0].freqs_hz[0] - f_true).abs() < 0.1 * df,
            "off-bin error {} bins at delta {delta}",
            (peaks[0].freqs_hz[0] - f_true).abs() / df
        );
    }
}

#[test]
fn peak_interpolation_is_exact_for_gaussian_lines() {
    // A decayed tone has a Gaussian line; the log-power parabola should
    // nail the sub-bin position.
    let dt = 0.05e-6;
    let n = 512;
    let df = 1.0 / (n as f64 * dt);
    let t2 = 60.0 * dt; // a few bins of linewidth
    for delta in [0.0, 0.18, 0.33, 0.47] {
        let f_true = (60.0 + delta) * df;
        let signal: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = dt * j as f64;
                Complex64::from_polar(
                    (-0.5 * (t / t2).powi(2)).exp(),
                    2.0 * std::f64::consts::PI * f_true * t,
                )
            })
            .collect();
        let image = spectral_image(
            &ArrayD::from_shape_vec(IxDyn(&[n]), signal).unwrap(),
            &[axis("A", dt)],
        )
        .unwrap();
        let peaks = peak_extract(&image, 0.5, 1).unwrap();
        assert!(
            (peaks[0].freqs_hz[0] - f_true).abs() < 0.05 * df,
            "gaussian line error {} bins at delta {delta}",
            (peaks[0].freqs_hz[0] - f_true).abs() / df
        );
    }
}

#[test]
fn peak_extract_separates_and_sorts() {
    let mut power = vec![0.0; 64];
    power[10] = 4.0;
    power[11] = 3.9; // suppressed by min_separation
    power[30] = 8.0;
    power[55] = 0.1; // below threshold
    let image = SpectralImage {
        power: ArrayD::from_shape_vec(IxDyn(&[64]), power).unwrap(),
        axes: vec![FreqAxis {
            channel: "A".to_string(),
            df_hz: 1.0,
            offset_hz: 0.0,
            flipped: false,
        }],
        provenance: Provenance::Fft,
    };
    let peaks = peak_extract(&image, 0.05, 3).unwrap();
    assert_eq!(peaks.len(), 2);
    assert_eq!(peaks[0].bin, vec![30]);
    assert_eq!(peaks[1].bin, vec![10]);

    // Empty image yields an empty list.
    let flat = SpectralImage {
        power: ArrayD::from_elem(IxDyn(&[16]), 0.0),
        axes: image.axes.clone(),
        provenance: Provenance::Fft,
    };
    assert!(peak_extract(&flat, 0.5, 1).unwrap().is_empty());
}
