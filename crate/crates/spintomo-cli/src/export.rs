//! Plot-data export: turns stored artifacts into axis vectors and CSV
//! payloads any plotting tool can consume.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ndarray::{Array2, ArrayD, Axis};
use spintomo::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Timeseries,
    Heatmap,
    Volume,
}

impl ExportKind {
    pub fn parse(s: &str) -> anyhow::Result<ExportKind> {
        Ok(match s {
            "timeseries" => ExportKind::Timeseries,
            "heatmap" => ExportKind::Heatmap,
            "volume" => ExportKind::Volume,
            other => bail!("unknown export kind {other:?} (timeseries|heatmap|volume)"),
        })
    }
}

fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(suffix);
    base.with_file_name(name)
}

/// Maximum-intensity projection of a 3D array along `axis`.
fn max_intensity_projection(volume: &ArrayD<f64>, axis: usize) -> Array2<f64> {
    let shape: Vec<usize> = volume
        .shape()
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != axis)
        .map(|(_, n)| *n)
        .collect();
    let mut out = Array2::zeros((shape[0], shape[1]));
    for (lane_idx, lane) in volume.lanes(Axis(axis)).into_iter().enumerate() {
        let i = lane_idx / shape[1];
        let j = lane_idx % shape[1];
        out[(i, j)] = lane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    out
}

fn matrix_csv(matrix: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn axis_csv(label: &str, values: impl Iterator<Item = f64>) -> String {
    let mut out = format!("{label}\n");
    for v in values {
        out.push_str(&format!("{v:.9e}\n"));
    }
    out
}

/// Exports the artifact at `base` (header + raw pair) as plot data next
/// to it (or under `out_prefix`). Returns the files written.
pub fn export_plotdata(
    base: &Path,
    kind: ExportKind,
    out_prefix: Option<&Path>,
) -> anyhow::Result<Vec<PathBuf>> {
    let prefix = out_prefix.unwrap_or(base).to_path_buf();
    let mut written = Vec::new();
    match kind {
        ExportKind::Timeseries => {
            let grid = io::load_signal_grid(base)
                .with_context(|| format!("loading signal grid {}", base.display()))?;
            if grid.data.ndim() != 1 {
                bail!(
                    "timeseries export expects a 1-dimensional grid, got rank {}",
                    grid.data.ndim()
                );
            }
            if grid.data.is_empty() {
                bail!("empty artifact: no samples to export");
            }
            // Realized effective durations when present, nominal otherwise.
            let times: Vec<f64> = match &grid.t_eff {
                Some(t_eff) => t_eff.iter().cloned().collect(),
                None => (0..grid.data.len())
                    .map(|i| grid.axes[0].offset_s + grid.axes[0].dt_eff_s * i as f64)
                    .collect(),
            };
            let mut out = String::from("t_eff_s,value\n");
            for (t, v) in times.iter().zip(grid.data.iter()) {
                out.push_str(&format!("{t:.9e},{v:.9e}\n"));
            }
            let path = suffixed(&prefix, "_timeseries.csv");
            io::write_atomic(&path, out.as_bytes())?;
            written.push(path);
        }
        ExportKind::Heatmap => {
            let image = io::load_spectral_image(base)
                .with_context(|| format!("loading spectral image {}", base.display()))?;
            if image.power.ndim() != 2 {
                bail!(
                    "heatmap export expects a 2-dimensional image, got rank {}",
                    image.power.ndim()
                );
            }
            if image.power.is_empty() {
                bail!("empty artifact: no image data to export");
            }
            let matrix = image
                .power
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("rank checked");
            let path = suffixed(&prefix, "_heatmap.csv");
            io::write_atomic(&path, matrix_csv(&matrix.to_owned()).as_bytes())?;
            written.push(path);
            for (k, axis) in image.axes.iter().enumerate() {
                let n = image.power.shape()[k];
                let path = suffixed(&prefix, &format!("_axis{k}_{}.csv", axis.channel));
                io::write_atomic(
                    &path,
                    axis_csv(
                        "freq_hz",
                        (0..n).map(|i| axis.offset_hz + axis.df_hz * i as f64),
                    )
                    .as_bytes(),
                )?;
                written.push(path);
            }
        }
        ExportKind::Volume => {
            let image = io::load_spectral_image(base)
                .with_context(|| format!("loading spectral image {}", base.display()))?;
            if image.power.ndim() != 3 {
                bail!(
                    "volume export expects a 3-dimensional image, got rank {}",
                    image.power.ndim()
                );
            }
            if image.power.is_empty() {
                bail!("empty artifact: no volume data to export");
            }
            // Axis-aligned maximum-intensity projections (the three
            // visible faces of the volume rendering).
            for axis in 0..3 {
                let mip = max_intensity_projection(&image.power, axis);
                let path = suffixed(
                    &prefix,
                    &format!("_mip_{}.csv", image.axes[axis].channel),
                );
                io::write_atomic(&path, matrix_csv(&mip).as_bytes())?;
                written.push(path);
            }
            for (k, axis) in image.axes.iter().enumerate() {
                let n = image.power.shape()[k];
                let path = suffixed(&prefix, &format!("_axis{k}_{}.csv", axis.channel));
                io::write_atomic(
                    &path,
                    axis_csv(
                        "freq_hz",
                        (0..n).map(|i| axis.offset_hz + axis.df_hz * i as f64),
                    )
                    .as_bytes(),
                )?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn mip_takes_axis_maxima() {
        let volume = ArrayD::from_shape_fn(IxDyn(&[2, 3, 4]), |idx| {
            (idx[0] * 100 + idx[1] * 10 + idx[2]) as f64
        });
        let mip0 = max_intensity_projection(&volume, 0);
        assert_eq!(mip0.shape(), &[3, 4]);
        assert_eq!(mip0[(2, 3)], 123.0);
        let mip2 = max_intensity_projection(&volume, 2);
        assert_eq!(mip2.shape(), &[2, 3]);
        assert_eq!(mip2[(1, 2)], 123.0);
    }
}
