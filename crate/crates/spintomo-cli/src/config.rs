//! Run configuration: JSON schema, defaulting, and validation.
//!
//! Parsing is strict (unknown keys are rejected with position context);
//! semantic validation runs after parsing and reports every violation at
//! once, in a fixed order, naming the offending field.

use std::fmt;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use spintomo::fieldmap::{
    build_u_structure, paper_device, ChannelCurrents, QuantizationAxis, UStructure, WireAssembly,
    PAPER_DRIVE_CURRENT_A,
};
use spintomo::sequencer::{
    noise, CurrentPulseModel, DurationAxis, Quadrature, SequenceSpec, Spin, SpinEnsemble,
};
use spintomo::vec3::Vec3;

#[derive(Debug)]
pub enum ConfigError {
    /// Unreadable or syntactically/structurally invalid JSON.
    Parse(String),
    /// Semantic violations, all of them, in declaration order.
    Semantic(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Semantic(errors) => {
                writeln!(f, "config validation failed with {} error(s):", errors.len())?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UStructureConfig {
    pub arm_length_m: f64,
    pub arm_width_m: f64,
    pub subdivisions: usize,
    pub feedline_length_m: f64,
    pub plane_z_m: f64,
}

impl Default for UStructureConfig {
    fn default() -> Self {
        let p = UStructure::default();
        UStructureConfig {
            arm_length_m: p.arm_length,
            arm_width_m: p.arm_width,
            subdivisions: p.subdivisions,
            feedline_length_m: p.feedline_length,
            plane_z_m: p.plane_z,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QAxisConfig {
    pub axis: [f64; 3],
    pub gyromagnetic_ratio_hz_per_t: f64,
}

impl Default for QAxisConfig {
    fn default() -> Self {
        let device = paper_device();
        QAxisConfig {
            axis: device.qaxis.axis().to_array(),
            gyromagnetic_ratio_hz_per_t: device.qaxis.gyromagnetic_ratio_hz_per_t(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    /// Inline U-structure parameters; mutually exclusive with
    /// `assembly_file`.
    pub u_structure: Option<UStructureConfig>,
    /// Path to a serialized `WireAssembly` JSON document.
    pub assembly_file: Option<PathBuf>,
    pub qaxis: QAxisConfig,
    /// Drive current per channel in amperes.
    pub currents_a: IndexMap<String, f64>,
    /// Point for the field-stage sensitivity report; defaults to the
    /// first spin position.
    pub report_point_m: Option<[f64; 3]>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            u_structure: Some(UStructureConfig::default()),
            assembly_file: None,
            qaxis: QAxisConfig::default(),
            currents_a: ["I1", "I2", "I3"]
                .iter()
                .map(|c| (c.to_string(), PAPER_DRIVE_CURRENT_A))
                .collect(),
            report_point_m: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    pub position_m: [f64; 3],
    #[serde(default = "one")]
    pub weight: f64,
    pub coherence_times_s: IndexMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEnsembleConfig {
    pub count: usize,
    pub center_m: [f64; 3],
    pub radius_m: f64,
    /// Uniform T2 range applied to every channel.
    pub t2_range_s: [f64; 2],
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Explicit spin list; mutually exclusive with `random`.
    pub spins: Option<Vec<SpinConfig>>,
    pub random: Option<RandomEnsembleConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DurationAxisConfig {
    pub offset_s: f64,
    pub step_s: f64,
    pub count: usize,
}

impl Default for DurationAxisConfig {
    fn default() -> Self {
        DurationAxisConfig {
            offset_s: 0.0,
            step_s: 0.1e-6,
            count: 600,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub reference_current_a: f64,
    pub shot_to_shot_sigma: f64,
    pub ramp_time_s: f64,
    pub sample_rate_hz: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        let m = CurrentPulseModel::default();
        PulseConfig {
            reference_current_a: m.reference_current,
            shot_to_shot_sigma: m.shot_to_shot_sigma,
            ramp_time_s: m.ramp_time,
            sample_rate_hz: m.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    pub channels: Vec<String>,
    pub durations: Vec<DurationAxisConfig>,
    pub quadratures: Vec<Quadrature>,
    pub readout_noise_sigma: f64,
    pub seed: u64,
    pub pulse: PulseConfig,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            channels: vec!["I2".to_string()],
            durations: vec![DurationAxisConfig::default()],
            quadratures: vec![Quadrature::X, Quadrature::Y],
            readout_noise_sigma: 0.0,
            seed: 1,
            pulse: PulseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconMode {
    Fft,
    Zoom,
    L1,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ZoomConfig {
    /// Per-axis frequency band of interest in Hz.
    pub bands_hz: Vec<[f64; 2]>,
    /// Explicit per-axis undersampling factors; planned automatically
    /// when absent.
    pub factors: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct L1Config {
    /// Penalty as a fraction of the peak zero-filled spectrum magnitude.
    pub lambda_relative: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Fraction of grid points retained (uniform random, seeded).
    pub sample_fraction: f64,
}

impl Default for L1Config {
    fn default() -> Self {
        L1Config {
            lambda_relative: 0.01,
            max_iters: 1000,
            tol: 1e-8,
            sample_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeaksConfig {
    pub threshold: f64,
    pub min_separation: usize,
}

impl Default for PeaksConfig {
    fn default() -> Self {
        PeaksConfig {
            threshold: 0.2,
            min_separation: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    pub mode: ReconMode,
    pub zoom: ZoomConfig,
    pub l1: L1Config,
    pub peaks: PeaksConfig,
    /// Reconstruct from this grid basename instead of the synth stage
    /// output.
    pub input_grid_base: Option<PathBuf>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            mode: ReconMode::Fft,
            zoom: ZoomConfig::default(),
            l1: L1Config::default(),
            peaks: PeaksConfig::default(),
            input_grid_base: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Rectangular window length in samples; defaults to a quarter of
    /// the signal when absent.
    pub window_length: Option<usize>,
    /// Hop between windows; defaults to a quarter window.
    pub hop: Option<usize>,
    pub signal_band_hz: Option<[f64; 2]>,
    pub noise_band_hz: Option<[f64; 2]>,
    /// Fit a Gaussian decay to the SNR curve.
    pub fit: bool,
    /// Analyze this grid basename instead of the synth stage output.
    pub input_grid_base: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizeConfig {
    /// Measured per-channel frequencies in Hz; when absent the strongest
    /// reconstructed peak is used.
    pub measured_hz: Option<IndexMap<String, f64>>,
    pub initial_guess_m: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub ensemble: EnsembleConfig,
    pub sequence: SequenceConfig,
    pub recon: ReconConfig,
    pub analysis: AnalysisConfig,
    pub localize: LocalizeConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometryConfig::default(),
            ensemble: EnsembleConfig::default(),
            sequence: SequenceConfig::default(),
            recon: ReconConfig::default(),
            analysis: AnalysisConfig::default(),
            localize: LocalizeConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Reads, parses, defaults, and semantically validates a config file.
pub fn validate_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_and_validate(&text)
}

/// Same as [`validate_config`] for an in-memory document.
pub fn parse_and_validate(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = serde_json::from_str(text)
        .map_err(|e| ConfigError::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let errors = semantic_errors(&config);
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Semantic(errors))
    }
}

/// Every semantic violation, in declaration order.
pub fn semantic_errors(config: &RunConfig) -> Vec<String> {
    let mut errors = Vec::new();

    // geometry
    if config.geometry.u_structure.is_some() && config.geometry.assembly_file.is_some() {
        errors.push(
            "geometry.u_structure and geometry.assembly_file are mutually exclusive".to_string(),
        );
    }
    if config.geometry.u_structure.is_none() && config.geometry.assembly_file.is_none() {
        errors.push("geometry requires u_structure parameters or assembly_file".to_string());
    }
    if let Some(u) = &config.geometry.u_structure {
        for (name, v) in [
            ("geometry.u_structure.arm_length_m", u.arm_length_m),
            ("geometry.u_structure.arm_width_m", u.arm_width_m),
            ("geometry.u_structure.feedline_length_m", u.feedline_length_m),
        ] {
            if !(v > 0.0) {
                errors.push(format!("{name} must be positive, got {v}"));
            }
        }
        if u.subdivisions == 0 {
            errors.push("geometry.u_structure.subdivisions must be >= 1".to_string());
        }
    }
    if let Some(file) = &config.geometry.assembly_file {
        if !file.exists() {
            errors.push(format!(
                "geometry.assembly_file {} does not exist",
                file.display()
            ));
        }
    }
    let axis = Vec3::from_array(config.geometry.qaxis.axis);
    if axis.norm() == 0.0 {
        errors.push("geometry.qaxis.axis must be a nonzero vector".to_string());
    }
    if !(config.geometry.qaxis.gyromagnetic_ratio_hz_per_t > 0.0) {
        errors.push(format!(
            "geometry.qaxis.gyromagnetic_ratio_hz_per_t must be positive, got {}",
            config.geometry.qaxis.gyromagnetic_ratio_hz_per_t
        ));
    }
    if config.geometry.currents_a.is_empty() {
        errors.push("geometry.currents_a must name at least one channel".to_string());
    }

    // ensemble
    if config.ensemble.spins.is_some() && config.ensemble.random.is_some() {
        errors.push("ensemble.spins and ensemble.random are mutually exclusive".to_string());
    }
    if let Some(spins) = &config.ensemble.spins {
        if spins.is_empty() {
            errors.push("ensemble.spins must not be empty".to_string());
        }
        for (i, spin) in spins.iter().enumerate() {
            if !(spin.weight > 0.0) {
                errors.push(format!(
                    "ensemble.spins[{i}].weight must be positive, got {}",
                    spin.weight
                ));
            }
            for (channel, t2) in &spin.coherence_times_s {
                if !(*t2 > 0.0) {
                    errors.push(format!(
                        "ensemble.spins[{i}].coherence_times_s[{channel:?}] must be positive, got {t2}"
                    ));
                }
            }
        }
    }
    if let Some(random) = &config.ensemble.random {
        if random.count == 0 {
            errors.push("ensemble.random.count must be >= 1".to_string());
        }
        if !(random.radius_m > 0.0) {
            errors.push(format!(
                "ensemble.random.radius_m must be positive, got {}",
                random.radius_m
            ));
        }
        if !(random.t2_range_s[0] > 0.0 && random.t2_range_s[1] >= random.t2_range_s[0]) {
            errors.push(format!(
                "ensemble.random.t2_range_s must be a positive increasing pair, got {:?}",
                random.t2_range_s
            ));
        }
    }

    // sequence
    if config.sequence.channels.is_empty() || config.sequence.channels.len() > 3 {
        errors.push(format!(
            "sequence.channels must list 1-3 channels, got {}",
            config.sequence.channels.len()
        ));
    }
    for (i, c) in config.sequence.channels.iter().enumerate() {
        if config.sequence.channels[..i].contains(c) {
            errors.push(format!("sequence.channels contains duplicate {c:?}"));
        }
        if !config.geometry.currents_a.contains_key(c) {
            errors.push(format!(
                "sequence.channels[{i}] = {c:?} has no drive current in geometry.currents_a"
            ));
        }
    }
    if config.sequence.durations.len() != config.sequence.channels.len() {
        errors.push(format!(
            "sequence.durations must have one axis per channel ({} axes for {} channels)",
            config.sequence.durations.len(),
            config.sequence.channels.len()
        ));
    }
    for (i, axis) in config.sequence.durations.iter().enumerate() {
        if !(axis.step_s > 0.0) {
            errors.push(format!(
                "sequence.durations[{i}].step_s must be positive, got {}",
                axis.step_s
            ));
        }
        if axis.offset_s < 0.0 {
            errors.push(format!(
                "sequence.durations[{i}].offset_s must be non-negative, got {}",
                axis.offset_s
            ));
        }
        if axis.count < 2 {
            errors.push(format!(
                "sequence.durations[{i}].count must be >= 2, got {}",
                axis.count
            ));
        }
    }
    if config.sequence.quadratures.is_empty() {
        errors.push("sequence.quadratures must not be empty".to_string());
    }
    if config.sequence.quadratures.len() == 2
        && config.sequence.quadratures[0] == config.sequence.quadratures[1]
    {
        errors.push("sequence.quadratures must be distinct".to_string());
    }
    if config.sequence.readout_noise_sigma < 0.0 {
        errors.push(format!(
            "sequence.readout_noise_sigma must be non-negative, got {}",
            config.sequence.readout_noise_sigma
        ));
    }
    if !(config.sequence.pulse.reference_current_a > 0.0) {
        errors.push(format!(
            "sequence.pulse.reference_current_a must be positive, got {}",
            config.sequence.pulse.reference_current_a
        ));
    }
    if config.sequence.pulse.shot_to_shot_sigma < 0.0 {
        errors.push(format!(
            "sequence.pulse.shot_to_shot_sigma must be non-negative, got {}",
            config.sequence.pulse.shot_to_shot_sigma
        ));
    }
    if config.sequence.pulse.ramp_time_s < 0.0 {
        errors.push(format!(
            "sequence.pulse.ramp_time_s must be non-negative, got {}",
            config.sequence.pulse.ramp_time_s
        ));
    }
    if !(config.sequence.pulse.sample_rate_hz > 0.0) {
        errors.push(format!(
            "sequence.pulse.sample_rate_hz must be positive, got {}",
            config.sequence.pulse.sample_rate_hz
        ));
    }

    // recon
    if config.recon.mode == ReconMode::Zoom {
        if config.recon.zoom.bands_hz.len() != config.sequence.channels.len() {
            errors.push(format!(
                "recon.zoom.bands_hz needs one band per sequence channel ({} bands for {} channels)",
                config.recon.zoom.bands_hz.len(),
                config.sequence.channels.len()
            ));
        }
        for (i, band) in config.recon.zoom.bands_hz.iter().enumerate() {
            if !(0.0 <= band[0] && band[0] < band[1]) {
                errors.push(format!(
                    "recon.zoom.bands_hz[{i}] must satisfy 0 <= lo < hi, got {band:?}"
                ));
            }
        }
        if let Some(factors) = &config.recon.zoom.factors {
            if factors.len() != config.sequence.channels.len() {
                errors.push(format!(
                    "recon.zoom.factors needs one factor per channel ({} for {})",
                    factors.len(),
                    config.sequence.channels.len()
                ));
            }
            if factors.iter().any(|f| *f == 0) {
                errors.push("recon.zoom.factors must all be >= 1".to_string());
            }
        }
    }
    if !(config.recon.l1.lambda_relative > 0.0) {
        errors.push(format!(
            "recon.l1.lambda_relative must be positive, got {}",
            config.recon.l1.lambda_relative
        ));
    }
    if !(config.recon.l1.sample_fraction > 0.0 && config.recon.l1.sample_fraction <= 1.0) {
        errors.push(format!(
            "recon.l1.sample_fraction must lie in (0, 1], got {}",
            config.recon.l1.sample_fraction
        ));
    }
    if config.recon.l1.max_iters == 0 {
        errors.push("recon.l1.max_iters must be >= 1".to_string());
    }
    if !(config.recon.peaks.threshold > 0.0 && config.recon.peaks.threshold < 1.0) {
        errors.push(format!(
            "recon.peaks.threshold must lie in (0, 1), got {}",
            config.recon.peaks.threshold
        ));
    }
    if let Some(base) = &config.recon.input_grid_base {
        let header = PathBuf::from(format!("{}.json", base.display()));
        if !header.exists() {
            errors.push(format!(
                "recon.input_grid_base {} has no header file {}",
                base.display(),
                header.display()
            ));
        }
    }

    // analysis
    if let (Some(sig), Some(noise_band)) =
        (config.analysis.signal_band_hz, config.analysis.noise_band_hz)
    {
        if sig[1] > noise_band[0] && noise_band[1] > sig[0] {
            errors.push("analysis signal and noise bands overlap".to_string());
        }
    }
    for (name, band) in [
        ("analysis.signal_band_hz", config.analysis.signal_band_hz),
        ("analysis.noise_band_hz", config.analysis.noise_band_hz),
    ] {
        if let Some(b) = band {
            if !(0.0 <= b[0] && b[0] < b[1]) {
                errors.push(format!("{name} must satisfy 0 <= lo < hi, got {b:?}"));
            }
        }
    }
    if let Some(w) = config.analysis.window_length {
        if w < 2 {
            errors.push(format!("analysis.window_length must be >= 2, got {w}"));
        }
    }
    if let Some(h) = config.analysis.hop {
        if h == 0 {
            errors.push("analysis.hop must be >= 1".to_string());
        }
    }

    // localize
    if let Some(measured) = &config.localize.measured_hz {
        for channel in measured.keys() {
            if !config.geometry.currents_a.contains_key(channel) {
                errors.push(format!(
                    "localize.measured_hz channel {channel:?} has no drive current in geometry.currents_a"
                ));
            }
        }
    }

    errors
}

/// Materializes the wire assembly described by the geometry section.
pub fn build_assembly(config: &GeometryConfig) -> anyhow::Result<WireAssembly> {
    if let Some(file) = &config.assembly_file {
        let text = std::fs::read_to_string(file)?;
        let assembly: WireAssembly = serde_json::from_str(&text)?;
        assembly.validate()?;
        return Ok(assembly);
    }
    let u = config.u_structure.as_ref().expect("validated geometry");
    Ok(build_u_structure(&UStructure {
        arm_length: u.arm_length_m,
        arm_width: u.arm_width_m,
        subdivisions: u.subdivisions,
        feedline_length: u.feedline_length_m,
        plane_z: u.plane_z_m,
    }))
}

pub fn build_qaxis(config: &GeometryConfig) -> anyhow::Result<QuantizationAxis> {
    Ok(QuantizationAxis::new(
        Vec3::from_array(config.qaxis.axis),
        config.qaxis.gyromagnetic_ratio_hz_per_t,
    )?)
}

pub fn build_currents(config: &GeometryConfig) -> ChannelCurrents {
    config.currents_a.clone()
}

/// Materializes the spin ensemble: explicit list, seeded random cloud,
/// or (by default) one spin at the reference device operating point.
pub fn build_ensemble(
    config: &EnsembleConfig,
    channels: &[String],
) -> anyhow::Result<SpinEnsemble> {
    if let Some(spins) = &config.spins {
        let spins = spins
            .iter()
            .map(|s| Spin {
                position: Vec3::from_array(s.position_m),
                weight: s.weight,
                coherence_times: s.coherence_times_s.clone(),
            })
            .collect();
        let ensemble = SpinEnsemble { spins };
        ensemble.validate()?;
        return Ok(ensemble);
    }
    if let Some(random) = &config.random {
        let mut spins = Vec::with_capacity(random.count);
        for i in 0..random.count {
            let mut offset = Vec3::ZERO;
            for (k, slot) in [0u64, 1, 2].iter().enumerate() {
                let u = noise::uniform(random.seed, &[noise::tag::AUX, i as u64, *slot]);
                let v = 2.0 * u - 1.0;
                match k {
                    0 => offset.x = v * random.radius_m,
                    1 => offset.y = v * random.radius_m,
                    _ => offset.z = v * random.radius_m,
                }
            }
            let t2_span = random.t2_range_s[1] - random.t2_range_s[0];
            let t2 = random.t2_range_s[0]
                + t2_span * noise::uniform(random.seed, &[noise::tag::AUX, i as u64, 3]);
            let coherence_times = channels.iter().map(|c| (c.clone(), t2)).collect();
            spins.push(Spin {
                position: Vec3::from_array(random.center_m) + offset,
                weight: 1.0,
                coherence_times,
            });
        }
        let ensemble = SpinEnsemble { spins };
        ensemble.validate()?;
        return Ok(ensemble);
    }
    // Default: one spin at the reference operating point.
    let device = paper_device();
    let coherence_times = channels.iter().map(|c| (c.clone(), 8.64e-6)).collect();
    Ok(SpinEnsemble {
        spins: vec![Spin {
            position: device.nv_point,
            weight: 1.0,
            coherence_times,
        }],
    })
}

pub fn build_sequence_spec(config: &SequenceConfig) -> anyhow::Result<SequenceSpec> {
    let durations = config
        .durations
        .iter()
        .map(|d| DurationAxis::new(d.offset_s, d.step_s, d.count))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SequenceSpec {
        channels: config.channels.clone(),
        durations,
        quadratures: config.quadratures.clone(),
        readout_noise_sigma: config.readout_noise_sigma,
        seed: config.seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn build_pulse_model(config: &PulseConfig) -> CurrentPulseModel {
    CurrentPulseModel {
        reference_current: config.reference_current_a,
        shot_to_shot_sigma: config.shot_to_shot_sigma,
        ramp_time: config.ramp_time_s,
        sample_rate: config.sample_rate_hz,
    }
}
