//! Stage orchestration: field -> synth -> recon -> analyze, plus
//! localization, with a manifest, per-directory locking, and atomic
//! artifact writes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use indexmap::IndexMap;
use serde::Serialize;
use sha2::{Digest, Sha256};
use spintomo::analysis::{band_snr, fit_gaussian_decay, localize, spectrogram};
use spintomo::fieldmap::{assembly_field, frequency_jacobian, sensitivity};
use spintomo::io;
use spintomo::recon::{
    complex_combine, l1_reconstruct, peak_extract, plan_zoom, plan_zoom_with_factors,
    spectral_image, spectral_image_real, unfold, L1Options, SpectralImage, ZoomPlan,
};
use spintomo::sequencer::{noise, synthesize, undersample_grid, Quadrature, SignalGrid};
use spintomo::vec3::Vec3;

use crate::config::{build_assembly, build_currents, build_ensemble, build_pulse_model,
    build_qaxis, build_sequence_spec, ReconMode, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Field,
    Synth,
    Recon,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Field, Stage::Synth, Stage::Recon, Stage::Analyze];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Field => "field",
            Stage::Synth => "synth",
            Stage::Recon => "recon",
            Stage::Analyze => "analyze",
        }
    }

    pub fn parse_list(list: &str) -> anyhow::Result<Vec<Stage>> {
        let mut stages = Vec::new();
        for token in list.split(',') {
            let stage = match token.trim() {
                "field" => Stage::Field,
                "synth" => Stage::Synth,
                "recon" => Stage::Recon,
                "analyze" => Stage::Analyze,
                other => bail!("unknown stage {other:?} (expected field|synth|recon|analyze)"),
            };
            if !stages.contains(&stage) {
                stages.push(stage);
            }
        }
        stages.sort();
        Ok(stages)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Guard file preventing concurrent writers in one output directory.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> anyhow::Result<DirLock> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(anyhow!(LockConflict(path)))
            }
            Err(e) => Err(e).with_context(|| format!("creating lock file {}", path.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Debug)]
pub struct LockConflict(pub PathBuf);

impl fmt::Display for LockConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "output directory is locked by another run ({})",
            self.0.display()
        )
    }
}

impl std::error::Error for LockConflict {}

#[derive(Serialize)]
struct StageRecord {
    name: String,
    wall_ms: f64,
}

#[derive(Serialize)]
struct Manifest {
    tool: String,
    version: String,
    config_hash: String,
    seed: u64,
    stages: Vec<StageRecord>,
    /// Every output file with its content hash, sorted by path.
    outputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub struct PipelineRun<'a> {
    pub config: &'a RunConfig,
    out_dir: PathBuf,
    verbose: bool,
    stages_run: Vec<StageRecord>,
    outputs: Vec<PathBuf>,
}

impl<'a> PipelineRun<'a> {
    pub fn new(config: &'a RunConfig, verbose: bool) -> PipelineRun<'a> {
        PipelineRun {
            config,
            out_dir: config.output_dir.clone(),
            verbose,
            stages_run: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn artifact(&mut self, name: &str) -> PathBuf {
        let path = self.out_dir.join(name);
        self.outputs.push(path.clone());
        path
    }

    fn note(&self, message: &str) {
        if self.verbose {
            eprintln!("[spintomo] {message}");
        }
    }

    /// Runs the requested stages in dependency order and writes the
    /// manifest. Returns the manifest path.
    pub fn run(&mut self, stages: &[Stage]) -> anyhow::Result<PathBuf> {
        let _lock = DirLock::acquire(&self.out_dir)?;
        for stage in stages {
            let started = Instant::now();
            self.note(&format!("stage {stage}"));
            match stage {
                Stage::Field => self.stage_field()?,
                Stage::Synth => self.stage_synth()?,
                Stage::Recon => self.stage_recon()?,
                Stage::Analyze => self.stage_analyze()?,
            }
            self.stages_run.push(StageRecord {
                name: stage.name().to_string(),
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
        self.write_manifest()
    }

    fn write_manifest(&mut self) -> anyhow::Result<PathBuf> {
        let config_bytes = serde_json::to_vec(self.config).expect("config serializes");
        let mut outputs = BTreeMap::new();
        for path in &self.outputs {
            if path.exists() {
                let bytes = std::fs::read(path)
                    .with_context(|| format!("hashing {}", path.display()))?;
                let rel = path
                    .strip_prefix(&self.out_dir)
                    .unwrap_or(path)
                    .display()
                    .to_string();
                outputs.insert(rel, sha256_hex(&bytes));
            }
        }
        let manifest = Manifest {
            tool: "spintomo".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(&config_bytes),
            seed: self.config.sequence.seed,
            stages: std::mem::take(&mut self.stages_run),
            outputs,
        };
        let path = self.out_dir.join("manifest.json");
        io::write_atomic(&path, &serde_json::to_vec_pretty(&manifest).expect("serializes"))?;
        Ok(path)
    }

    fn stage_field(&mut self) -> anyhow::Result<()> {
        let assembly = build_assembly(&self.config.geometry)?;
        let qaxis = build_qaxis(&self.config.geometry)?;
        let currents = build_currents(&self.config.geometry);

        let path = self.artifact("assembly.json");
        io::write_atomic(
            &path,
            &serde_json::to_vec_pretty(&assembly).expect("assembly serializes"),
        )?;

        // Sensitivity report at the reference point.
        let report_point = match self.config.geometry.report_point_m {
            Some(p) => Vec3::from_array(p),
            None => {
                let channels = &self.config.sequence.channels;
                build_ensemble(&self.config.ensemble, channels)?.spins[0].position
            }
        };
        let jac = frequency_jacobian(&assembly, &currents, &qaxis, report_point, 1e-9)?;
        let field = assembly_field(&assembly, &currents, report_point)?;
        #[derive(Serialize)]
        struct FieldReport {
            point_m: [f64; 3],
            field_t: [f64; 3],
            sensitivities_khz_per_nm: IndexMap<String, f64>,
        }
        let mut sens = IndexMap::new();
        for channel in currents.keys() {
            sens.insert(channel.clone(), sensitivity(&jac, channel)?);
        }
        let report = FieldReport {
            point_m: report_point.to_array(),
            field_t: field.to_array(),
            sensitivities_khz_per_nm: sens,
        };
        let path = self.artifact("field_report.json");
        io::write_atomic(
            &path,
            &serde_json::to_vec_pretty(&report).expect("report serializes"),
        )?;
        Ok(())
    }

    fn stage_synth(&mut self) -> anyhow::Result<()> {
        let assembly = build_assembly(&self.config.geometry)?;
        let qaxis = build_qaxis(&self.config.geometry)?;
        let ensemble = build_ensemble(&self.config.ensemble, &self.config.sequence.channels)?;
        let pulse = build_pulse_model(&self.config.sequence.pulse);
        let mut spec = build_sequence_spec(&self.config.sequence)?;

        // Zoom acquisitions sample the coarse grid directly.
        if self.config.recon.mode == ReconMode::Zoom {
            let plan = self.make_zoom_plan(&spec)?;
            let path = self.artifact("zoom_plan.json");
            io::write_atomic(&path, &serde_json::to_vec_pretty(&plan).expect("serializes"))?;
            spec = undersample_grid(&spec, &plan.factors())?;
        }

        let grids = synthesize(&assembly, &qaxis, &ensemble, &pulse, &spec)?;
        for grid in &grids {
            let name = match grid.quadrature {
                Quadrature::X => "signal_x",
                Quadrature::Y => "signal_y",
            };
            let base = self.out_dir.join(name);
            io::save_signal_grid(&base, grid)?;
            self.outputs.push(base.with_extension("json"));
            self.outputs.push(base.with_extension("f64"));
            if grid.t_eff.is_some() {
                self.outputs.push(self.out_dir.join(format!("{name}.teff.f64")));
            }
        }
        Ok(())
    }

    fn make_zoom_plan(&self, spec: &spintomo::sequencer::SequenceSpec) -> anyhow::Result<ZoomPlan> {
        let bands: Vec<(f64, f64)> = self
            .config
            .recon
            .zoom
            .bands_hz
            .iter()
            .map(|b| (b[0], b[1]))
            .collect();
        let dts: Vec<f64> = spec.durations.iter().map(|a| a.step).collect();
        let plan = match &self.config.recon.zoom.factors {
            Some(factors) => plan_zoom_with_factors(&bands, &dts, factors)?,
            None => plan_zoom(&bands, &dts)?,
        };
        Ok(plan)
    }

    fn load_grids(&self) -> anyhow::Result<Vec<SignalGrid>> {
        if let Some(base) = &self.config.recon.input_grid_base {
            return Ok(vec![io::load_signal_grid(base)?]);
        }
        let mut grids = Vec::new();
        for name in ["signal_x", "signal_y"] {
            let base = self.out_dir.join(name);
            if base.with_extension("json").exists() {
                grids.push(io::load_signal_grid(&base)?);
            }
        }
        if grids.is_empty() {
            bail!(
                "recon needs synth output in {} or recon.input_grid_base",
                self.out_dir.display()
            );
        }
        Ok(grids)
    }

    /// FFT image from whatever quadratures exist: complex combination
    /// when both are present, folded real path otherwise.
    fn fft_image(&self, grids: &[SignalGrid]) -> anyhow::Result<SpectralImage> {
        let x = grids.iter().find(|g| g.quadrature == Quadrature::X);
        let y = grids.iter().find(|g| g.quadrature == Quadrature::Y);
        Ok(match (x, y) {
            (Some(gx), Some(gy)) => {
                let combined = complex_combine(gx, gy)?;
                spectral_image(&combined, &gx.axes)?
            }
            (Some(g), None) | (None, Some(g)) => spectral_image_real(g)?,
            (None, None) => bail!("no signal grids to reconstruct"),
        })
    }

    fn stage_recon(&mut self) -> anyhow::Result<()> {
        let grids = self.load_grids()?;
        let channels: Vec<String> = grids[0].axes.iter().map(|a| a.channel.clone()).collect();

        let image = match self.config.recon.mode {
            ReconMode::Fft => self.fft_image(&grids)?,
            ReconMode::Zoom => {
                let plan_path = self.out_dir.join("zoom_plan.json");
                let plan: ZoomPlan = serde_json::from_slice(
                    &std::fs::read(&plan_path)
                        .with_context(|| format!("zoom plan {}", plan_path.display()))?,
                )?;
                let aliased = self.fft_image(&grids)?;
                let base = self.out_dir.join("spectrum_aliased");
                io::save_spectral_image(&base, &aliased)?;
                self.outputs.push(base.with_extension("json"));
                self.outputs.push(base.with_extension("f64"));
                unfold(&aliased, &plan)?
            }
            ReconMode::L1 => {
                let (samples, indices, shape, axes) = self.l1_samples(&grids)?;
                let lambda = {
                    // Relative penalty against the zero-filled spectrum peak.
                    let mut zero_filled = ndarray::ArrayD::from_elem(
                        ndarray::IxDyn(&shape),
                        num_complex::Complex64::default(),
                    );
                    let flat = zero_filled.as_slice_mut().expect("contiguous");
                    for (s, i) in samples.iter().zip(&indices) {
                        flat[*i] = *s;
                    }
                    spintomo::recon::fftn_unitary(
                        &mut zero_filled,
                        spintomo::recon::Direction::Forward,
                    );
                    let peak = zero_filled.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
                    self.config.recon.l1.lambda_relative * peak
                };
                let opts = L1Options {
                    lambda,
                    max_iters: self.config.recon.l1.max_iters,
                    tol: self.config.recon.l1.tol,
                };
                let (image, report) = l1_reconstruct(&samples, &indices, &shape, &axes, &opts)?;
                self.note(&format!(
                    "l1: {} iterations, converged: {}",
                    report.iterations, report.converged
                ));
                image
            }
        };

        let base = self.out_dir.join("spectrum");
        io::save_spectral_image(&base, &image)?;
        self.outputs.push(base.with_extension("json"));
        self.outputs.push(base.with_extension("f64"));

        let peaks = peak_extract(
            &image,
            self.config.recon.peaks.threshold,
            self.config.recon.peaks.min_separation,
        )?;
        let path = self.artifact("peaks.csv");
        io::save_peaks_csv(&path, &peaks, &channels)?;
        Ok(())
    }

    fn l1_samples(
        &self,
        grids: &[SignalGrid],
    ) -> anyhow::Result<(
        Vec<num_complex::Complex64>,
        Vec<usize>,
        Vec<usize>,
        Vec<spintomo::sequencer::AxisInfo>,
    )> {
        let x = grids.iter().find(|g| g.quadrature == Quadrature::X);
        let y = grids.iter().find(|g| g.quadrature == Quadrature::Y);
        let (full, axes): (Vec<num_complex::Complex64>, _) = match (x, y) {
            (Some(gx), Some(gy)) => {
                let combined = complex_combine(gx, gy)?;
                (combined.iter().cloned().collect(), gx.axes.clone())
            }
            (Some(g), None) | (None, Some(g)) => {
                let mean = g.data.iter().sum::<f64>() / g.data.len() as f64;
                (
                    g.data
                        .iter()
                        .map(|v| num_complex::Complex64::new(v - mean, 0.0))
                        .collect(),
                    g.axes.clone(),
                )
            }
            (None, None) => bail!("no signal grids for l1 reconstruction"),
        };
        let shape = grids[0].data.shape().to_vec();
        let fraction = self.config.recon.l1.sample_fraction;
        let seed = self.config.sequence.seed;
        let mut samples = Vec::new();
        let mut indices = Vec::new();
        for (i, v) in full.iter().enumerate() {
            if fraction >= 1.0 || noise::uniform(seed, &[noise::tag::AUX, 0x51, i as u64]) < fraction
            {
                samples.push(*v);
                indices.push(i);
            }
        }
        Ok((samples, indices, shape, axes))
    }

    fn stage_analyze(&mut self) -> anyhow::Result<()> {
        let grid = if let Some(base) = &self.config.analysis.input_grid_base {
            io::load_signal_grid(base)?
        } else {
            let base = self.out_dir.join("signal_x");
            if !base.with_extension("json").exists() {
                bail!(
                    "analyze needs signal_x in {} or analysis.input_grid_base",
                    self.out_dir.display()
                );
            }
            io::load_signal_grid(&base)?
        };
        if grid.data.ndim() != 1 {
            bail!(
                "analyze expects a 1-dimensional signal grid, got rank {}",
                grid.data.ndim()
            );
        }
        let samples: Vec<f64> = grid.data.iter().cloned().collect();
        let dt = grid.axes[0].dt_eff_s;
        let window = self
            .config
            .analysis
            .window_length
            .unwrap_or_else(|| (samples.len() / 4).max(2));
        let hop = self.config.analysis.hop.unwrap_or_else(|| (window / 4).max(1));
        let spec = spectrogram(&samples, dt, window, hop)?;
        io::save_spectrogram_csv(&self.artifact("spectrogram.csv"), &spec)?;
        let base = self.out_dir.join("spectrogram");
        io::save_spectrogram_raw(&base, &spec)?;
        self.outputs.push(base.with_extension("json"));
        self.outputs.push(base.with_extension("f64"));

        let (Some(sig), Some(noise_band)) = (
            self.config.analysis.signal_band_hz,
            self.config.analysis.noise_band_hz,
        ) else {
            self.note("analysis bands not configured; stopping after the spectrogram");
            return Ok(());
        };
        let curve = band_snr(&spec, (sig[0], sig[1]), (noise_band[0], noise_band[1]))?;
        io::save_snr_csv(&self.artifact("snr.csv"), &curve)?;

        if self.config.analysis.fit {
            let fit = fit_gaussian_decay(&curve)?;
            io::save_fit_report(&self.artifact("fit.json"), &fit)?;
        }
        Ok(())
    }

    /// Standalone localization from configured frequencies or the
    /// strongest reconstructed peak.
    pub fn run_localize(&mut self) -> anyhow::Result<PathBuf> {
        let _lock = DirLock::acquire(&self.out_dir)?;
        let assembly = build_assembly(&self.config.geometry)?;
        let qaxis = build_qaxis(&self.config.geometry)?;
        let currents = build_currents(&self.config.geometry);

        let measured: IndexMap<String, f64> = match &self.config.localize.measured_hz {
            Some(m) => m.clone(),
            None => {
                let peaks_path = self.out_dir.join("peaks.csv");
                let text = std::fs::read_to_string(&peaks_path).with_context(|| {
                    format!(
                        "localize needs localize.measured_hz or peaks at {}",
                        peaks_path.display()
                    )
                })?;
                parse_strongest_peak(&text)?
            }
        };
        let guess = match self.config.localize.initial_guess_m {
            Some(p) => Vec3::from_array(p),
            None => {
                let channels = &self.config.sequence.channels;
                build_ensemble(&self.config.ensemble, channels)?.spins[0].position
            }
        };
        let result = localize(&measured, &assembly, &currents, &qaxis, guess)?;
        #[derive(Serialize)]
        struct LocalizationReport {
            position_m: [f64; 3],
            residual_hz: f64,
            converged: bool,
            degenerate: bool,
            iterations: usize,
        }
        let report = LocalizationReport {
            position_m: result.position.to_array(),
            residual_hz: result.residual_hz,
            converged: result.converged,
            degenerate: result.degenerate,
            iterations: result.iterations,
        };
        let path = self.out_dir.join("localization.json");
        io::write_atomic(&path, &serde_json::to_vec_pretty(&report).expect("serializes"))?;
        Ok(path)
    }
}

/// Reads the strongest peak row of a peaks CSV back into per-channel
/// frequencies.
fn parse_strongest_peak(text: &str) -> anyhow::Result<IndexMap<String, f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty peaks CSV"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let row = lines
        .next()
        .ok_or_else(|| anyhow!("peaks CSV has no peaks"))?;
    let values: Vec<f64> = row
        .split(',')
        .map(|v| v.parse::<f64>())
        .collect::<Result<_, _>>()?;
    let mut measured = IndexMap::new();
    for (name, value) in columns.iter().zip(&values) {
        if let Some(channel) = name
            .strip_prefix("freq_")
            .and_then(|s| s.strip_suffix("_hz"))
        {
            measured.insert(channel.to_string(), *value);
        }
    }
    if measured.is_empty() {
        bail!("peaks CSV has no frequency columns");
    }
    Ok(measured)
}
