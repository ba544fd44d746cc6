//! File formats.
//!
//! Grid-like datasets are stored as a JSON header plus a raw file of
//! little-endian f64 in row-major order sharing the basename:
//!
//! - signal grids: `<base>.json` + `<base>.f64`, optional realized
//!   effective-duration sidecar `<base>.teff.f64` (same layout with one
//!   trailing per-channel axis);
//! - spectral images: `<base>.json` + `<base>.f64` with frequency axes;
//! - peak lists: CSV with one row per peak, per-channel frequency
//!   columns then power;
//! - spectrograms, SNR curves: CSV (time/value layout);
//! - decay fits: a small JSON report.
//!
//! Noise parameters are not part of the signal-grid header; loaded grids
//! validate against the hard [-0.5, 1.5] amplitude bound.
//!
//! All writes go through a temp-file-plus-rename so concurrent readers
//! and interrupted runs never observe partial files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{DecayFit, SnrCurve, Spectrogram};
use crate::recon::{FreqAxis, Peak, Provenance, SpectralImage};
use crate::sequencer::{AxisInfo, GridMeta, Quadrature, SignalGrid};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure on {path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed header {path}: {message}")]
    Header { path: PathBuf, message: String },
    #[error("raw payload {path} holds {got} values, header implies {want}")]
    PayloadSize {
        path: PathBuf,
        got: usize,
        want: usize,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes bytes to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(file_err(path))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(file_err(path))?;
    tmp.write_all(bytes).map_err(file_err(path))?;
    tmp.persist(path)
        .map_err(|e| IoError::File {
            path: path.to_path_buf(),
            source: e.error,
        })?;
    Ok(())
}

fn raw_bytes(values: &ArrayD<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    // Row-major regardless of the in-memory layout.
    for v in values.as_standard_layout().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_raw(path: &Path, expected: usize) -> Result<Vec<f64>, IoError> {
    let bytes = fs::read(path).map_err(file_err(path))?;
    if bytes.len() != expected * 8 {
        return Err(IoError::PayloadSize {
            path: path.to_path_buf(),
            got: bytes.len() / 8,
            want: expected,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn with_extension(base: &Path, ext: &str) -> PathBuf {
    let mut p = base.as_os_str().to_owned();
    p.push(ext);
    PathBuf::from(p)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalGridHeader {
    rank: usize,
    shape: Vec<usize>,
    axes: Vec<AxisInfo>,
    quadrature: Quadrature,
    seed: u64,
}

/// Saves a signal grid under `<base>.json` / `<base>.f64`
/// (+ `<base>.teff.f64` when realized durations are present).
pub fn save_signal_grid(base: &Path, grid: &SignalGrid) -> Result<(), IoError> {
    let header = SignalGridHeader {
        rank: grid.data.ndim(),
        shape: grid.data.shape().to_vec(),
        axes: grid.axes.clone(),
        quadrature: grid.quadrature,
        seed: grid.meta.seed,
    };
    let json = serde_json::to_vec_pretty(&header).expect("header serializes");
    write_atomic(&with_extension(base, ".json"), &json)?;
    write_atomic(&with_extension(base, ".f64"), &raw_bytes(&grid.data))?;
    if let Some(t_eff) = &grid.t_eff {
        write_atomic(&with_extension(base, ".teff.f64"), &raw_bytes(t_eff))?;
    }
    Ok(())
}

/// Loads a signal grid saved by [`save_signal_grid`].
pub fn load_signal_grid(base: &Path) -> Result<SignalGrid, IoError> {
    let header_path = with_extension(base, ".json");
    let header_bytes = fs::read(&header_path).map_err(file_err(&header_path))?;
    let header: SignalGridHeader =
        serde_json::from_slice(&header_bytes).map_err(|e| IoError::Header {
            path: header_path.clone(),
            message: e.to_string(),
        })?;
    if header.rank != header.shape.len() || header.axes.len() != header.rank {
        return Err(IoError::Header {
            path: header_path,
            message: "rank, shape, and axes disagree".into(),
        });
    }
    let n: usize = header.shape.iter().product();
    let data = read_raw(&with_extension(base, ".f64"), n)?;
    let data = ArrayD::from_shape_vec(IxDyn(&header.shape), data).expect("shape checked");

    let teff_path = with_extension(base, ".teff.f64");
    let t_eff = if teff_path.exists() {
        let mut t_shape = header.shape.clone();
        t_shape.push(header.axes.len());
        let values = read_raw(&teff_path, n * header.axes.len())?;
        Some(ArrayD::from_shape_vec(IxDyn(&t_shape), values).expect("shape checked"))
    } else {
        None
    };

    let grid = SignalGrid {
        data,
        axes: header.axes,
        quadrature: header.quadrature,
        meta: GridMeta {
            seed: header.seed,
            // Noise levels are config-side; enforce the hard type bound.
            readout_noise_sigma: 1.0 / 12.0,
            shot_to_shot_sigma: 0.0,
        },
        t_eff,
    };
    grid.validate()
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(grid)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectralImageHeader {
    rank: usize,
    shape: Vec<usize>,
    axes: Vec<FreqAxis>,
    provenance: Provenance,
}

pub fn save_spectral_image(base: &Path, image: &SpectralImage) -> Result<(), IoError> {
    let header = SpectralImageHeader {
        rank: image.power.ndim(),
        shape: image.power.shape().to_vec(),
        axes: image.axes.clone(),
        provenance: image.provenance,
    };
    let json = serde_json::to_vec_pretty(&header).expect("header serializes");
    write_atomic(&with_extension(base, ".json"), &json)?;
    write_atomic(&with_extension(base, ".f64"), &raw_bytes(&image.power))
}

pub fn load_spectral_image(base: &Path) -> Result<SpectralImage, IoError> {
    let header_path = with_extension(base, ".json");
    let header_bytes = fs::read(&header_path).map_err(file_err(&header_path))?;
    let header: SpectralImageHeader =
        serde_json::from_slice(&header_bytes).map_err(|e| IoError::Header {
            path: header_path.clone(),
            message: e.to_string(),
        })?;
    if header.rank != header.shape.len() || header.axes.len() != header.rank {
        return Err(IoError::Header {
            path: header_path,
            message: "rank, shape, and axes disagree".into(),
        });
    }
    let n: usize = header.shape.iter().product();
    let power = read_raw(&with_extension(base, ".f64"), n)?;
    let image = SpectralImage {
        power: ArrayD::from_shape_vec(IxDyn(&header.shape), power).expect("shape checked"),
        axes: header.axes,
        provenance: header.provenance,
    };
    image
        .validate()
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(image)
}

/// Peak list CSV: `freq_<channel>_hz` columns, then `power`.
pub fn peaks_to_csv(peaks: &[Peak], channels: &[String]) -> String {
    let mut out = String::new();
    for channel in channels {
        out.push_str(&format!("freq_{channel}_hz,"));
    }
    out.push_str("power\n");
    for peak in peaks {
        for f in &peak.freqs_hz {
            out.push_str(&format!("{f:.6},"));
        }
        out.push_str(&format!("{:.12e}\n", peak.power));
    }
    out
}

pub fn save_peaks_csv(path: &Path, peaks: &[Peak], channels: &[String]) -> Result<(), IoError> {
    write_atomic(path, peaks_to_csv(peaks, channels).as_bytes())
}

/// Spectrogram CSV: first column window-center time, then one column per
/// frequency bin (header carries the bin frequencies).
pub fn save_spectrogram_csv(path: &Path, spec: &Spectrogram) -> Result<(), IoError> {
    let df = spec.df();
    let mut out = String::from("time_s");
    for k in 0..spec.power.ncols() {
        out.push_str(&format!(",p_{:.6}", k as f64 * df));
    }
    out.push('\n');
    for (w, t) in spec.window_times().iter().enumerate() {
        out.push_str(&format!("{t:.9e}"));
        for k in 0..spec.power.ncols() {
            out.push_str(&format!(",{:.9e}", spec.power[(w, k)]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Spectrogram raw payload (header-free f64 rows) alongside a JSON
/// descriptor, mirroring the grid format.
pub fn save_spectrogram_raw(base: &Path, spec: &Spectrogram) -> Result<(), IoError> {
    #[derive(Serialize)]
    struct Header {
        rank: usize,
        shape: Vec<usize>,
        window_length: usize,
        hop: usize,
        dt_s: f64,
    }
    let header = Header {
        rank: 2,
        shape: vec![spec.power.nrows(), spec.power.ncols()],
        window_length: spec.window_length,
        hop: spec.hop,
        dt_s: spec.dt,
    };
    write_atomic(
        &with_extension(base, ".json"),
        &serde_json::to_vec_pretty(&header).expect("header serializes"),
    )?;
    let dyn_power = spec.power.clone().into_dyn();
    write_atomic(&with_extension(base, ".f64"), &raw_bytes(&dyn_power))
}

/// SNR curve CSV: `time_s,snr` rows.
pub fn save_snr_csv(path: &Path, curve: &SnrCurve) -> Result<(), IoError> {
    let mut out = String::from("time_s,snr\n");
    for (t, s) in curve.times.iter().zip(&curve.snr) {
        out.push_str(&format!("{t:.9e},{s:.9e}\n"));
    }
    write_atomic(path, out.as_bytes())
}

/// Decay-fit report: `{"T2_s", "T2_err_s", "amplitude", "residual_norm"}`.
pub fn save_fit_report(path: &Path, fit: &DecayFit) -> Result<(), IoError> {
    #[derive(Serialize)]
    struct Report {
        #[serde(rename = "T2_s")]
        t2_s: f64,
        #[serde(rename = "T2_err_s")]
        t2_err_s: f64,
        amplitude: f64,
        residual_norm: f64,
    }
    let report = Report {
        t2_s: fit.t2_s,
        t2_err_s: fit.t2_err_s,
        amplitude: fit.amplitude,
        residual_norm: fit.residual_norm,
    };
    write_atomic(
        path,
        &serde_json::to_vec_pretty(&report).expect("report serializes"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{peak_extract, spectral_image_real};
    use indexmap::IndexMap;

    fn sample_grid() -> SignalGrid {
        let data: Vec<f64> = (0..24)
            .map(|i| 0.5 + 0.4 * (i as f64 * 0.7).sin())
            .collect();
        let t_shape = vec![4usize, 6, 2];
        let t_eff: Vec<f64> = (0..48).map(|i| i as f64 * 1e-8).collect();
        SignalGrid {
            data: ArrayD::from_shape_vec(IxDyn(&[4, 6]), data).unwrap(),
            axes: vec![
                AxisInfo {
                    channel: "I1".into(),
                    dt_eff_s: 1e-7,
                    offset_s: 0.0,
                },
                AxisInfo {
                    channel: "I2".into(),
                    dt_eff_s: 2e-7,
                    offset_s: 1e-7,
                },
            ],
            quadrature: Quadrature::X,
            meta: GridMeta {
                seed: 99,
                readout_noise_sigma: 0.05,
                shot_to_shot_sigma: 0.0,
            },
            t_eff: Some(
                ArrayD::from_shape_vec(IxDyn(&t_shape), t_eff).unwrap(),
            ),
        }
    }

    #[test]
    fn signal_grid_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("grid");
        let grid = sample_grid();
        save_signal_grid(&base, &grid).unwrap();
        let back = load_signal_grid(&base).unwrap();
        assert_eq!(back.data, grid.data);
        assert_eq!(back.axes, grid.axes);
        assert_eq!(back.quadrature, grid.quadrature);
        assert_eq!(back.meta.seed, 99);
        assert_eq!(back.t_eff, grid.t_eff);

        // Header is the documented five-field object.
        let header: serde_json::Value =
            serde_json::from_slice(&std::fs::read(base.with_file_name("grid.json")).unwrap())
                .unwrap();
        let obj = header.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, vec!["axes", "quadrature", "rank", "seed", "shape"]);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("grid");
        save_signal_grid(&base, &sample_grid()).unwrap();
        let raw = with_extension(&base, ".f64");
        let bytes = std::fs::read(&raw).unwrap();
        std::fs::write(&raw, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            load_signal_grid(&base),
            Err(IoError::PayloadSize { .. })
        ));
    }

    #[test]
    fn unknown_header_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("grid");
        save_signal_grid(&base, &sample_grid()).unwrap();
        let header_path = with_extension(&base, ".json");
        let mut header: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&header_path).unwrap()).unwrap();
        header["surprise"] = serde_json::json!(1);
        std::fs::write(&header_path, serde_json::to_vec(&header).unwrap()).unwrap();
        assert!(matches!(load_signal_grid(&base), Err(IoError::Header { .. })));
    }

    #[test]
    fn spectral_image_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("image");
        let grid = {
            let mut g = sample_grid();
            g.t_eff = None;
            g
        };
        let image = spectral_image_real(&grid).unwrap();
        save_spectral_image(&base, &image).unwrap();
        let back = load_spectral_image(&base).unwrap();
        assert_eq!(back.power, image.power);
        assert_eq!(back.axes, image.axes);
        assert_eq!(back.provenance, image.provenance);
    }

    #[test]
    fn peaks_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let grid = {
            let mut g = sample_grid();
            g.t_eff = None;
            g
        };
        let image = spectral_image_real(&grid).unwrap();
        let peaks = peak_extract(&image, 0.2, 1).unwrap();
        let path = dir.path().join("peaks.csv");
        save_peaks_csv(&path, &peaks, &["I1".into(), "I2".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "freq_I1_hz,freq_I2_hz,power");
        assert_eq!(text.lines().count(), peaks.len() + 1);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/dir/file.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
    }

    #[test]
    fn snr_and_fit_exports() {
        let dir = tempfile::tempdir().unwrap();
        let curve = SnrCurve {
            times: vec![0.0, 1e-6, 2e-6],
            snr: vec![3.0, 2.0, 1.0],
            signal_band: (1e6, 2e6),
            noise_band: (3e6, 4e6),
        };
        let path = dir.path().join("snr.csv");
        save_snr_csv(&path, &curve).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("time_s,snr\n"));
        assert_eq!(text.lines().count(), 4);

        let fit = DecayFit {
            t2_s: 8.64e-6,
            t2_err_s: 1e-7,
            amplitude: 3.0,
            residual_norm: 0.01,
        };
        let fit_path = dir.path().join("fit.json");
        save_fit_report(&fit_path, &fit).unwrap();
        let value: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&fit_path).unwrap()).unwrap();
        assert!(value.get("T2_s").is_some());
        assert!(value.get("T2_err_s").is_some());
        let _ = IndexMap::<String, f64>::new();
    }
}
