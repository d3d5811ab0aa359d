//! Versioned JSON run configuration with explicit defaults.
//!
//! Every knob has a documented default; parsing rejects unknown keys and
//! reports schema violations with the JSON path of the offending field.
//! `parse_config` returns the fully resolved configuration, so serializing
//! it back shows every value a run will actually use.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serfsim_core::physmodel::{MeasurementModel, PhysicalParams, RelaxationRates};
use serfsim_core::spectra::se_linewidth;
use serfsim_core::witness::{rms_pair_separation, GyroChoice};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Default base seed for all random streams; override with `--seed` or
/// `experiment.seed`.
pub const DEFAULT_SEED: u64 = 20111;

fn d_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Vapor and beam constants; cgs units except the gyromagnetic ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalBlock {
    /// Alkali number density [atoms/cm^3].
    #[serde(default = "d_n_rb")]
    pub n_rb: f64,
    /// Spin-exchange cross-section [cm^2].
    #[serde(default = "d_sigma_se")]
    pub sigma_se: f64,
    /// Relative thermal velocity [cm/s].
    #[serde(default = "d_v_bar")]
    pub v_bar: f64,
    /// Electron gyromagnetic ratio [rad/s/T].
    #[serde(default = "d_gamma_e")]
    pub gamma_e: f64,
    /// Nuclear slowing-down factor.
    #[serde(default = "d_q_slow")]
    pub q_slow: f64,
    /// Nuclear spin I.
    #[serde(default = "d_nuclear_spin")]
    pub nuclear_spin: f64,
    /// Cell length along the probe [cm].
    #[serde(default = "d_cell_length")]
    pub cell_length: f64,
    /// Effective beam area [cm^2].
    #[serde(default = "d_beam_area")]
    pub beam_area: f64,
}

fn d_n_rb() -> f64 {
    3.6e14
}
fn d_sigma_se() -> f64 {
    1.9e-14
}
fn d_v_bar() -> f64 {
    4.75e4
}
fn d_gamma_e() -> f64 {
    2.0 * std::f64::consts::PI * 28.0e9
}
fn d_q_slow() -> f64 {
    6.0
}
fn d_nuclear_spin() -> f64 {
    1.5
}
fn d_cell_length() -> f64 {
    3.0
}
fn d_beam_area() -> f64 {
    0.049
}

impl Default for PhysicalBlock {
    fn default() -> Self {
        Self {
            n_rb: d_n_rb(),
            sigma_se: d_sigma_se(),
            v_bar: d_v_bar(),
            gamma_e: d_gamma_e(),
            q_slow: d_q_slow(),
            nuclear_spin: d_nuclear_spin(),
            cell_length: d_cell_length(),
            beam_area: d_beam_area(),
        }
    }
}

/// Bias field and relaxation rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    /// Bias field magnitude [T]; the default puts the Larmor frequency at
    /// 1 kHz for the default gyromagnetic ratio.
    #[serde(default = "d_b_magnitude")]
    pub b_magnitude: f64,
    /// Bias field direction (normalized internally).
    #[serde(default = "d_b_direction")]
    pub b_direction: [f64; 3],
    /// Longitudinal relaxation rate [1/s].
    #[serde(default = "d_t1_inv")]
    pub t1_inv: f64,
    /// Transverse relaxation rate [1/s]. `null` means `t1_inv`, plus the
    /// spin-exchange broadening at the operating field when
    /// `se_broadening` is set.
    #[serde(default)]
    pub t2_inv: Option<f64>,
    /// Derive the transverse broadening from the quadratic spin-exchange
    /// law at the operating Larmor frequency.
    #[serde(default)]
    pub se_broadening: bool,
}

fn d_b_magnitude() -> f64 {
    // 2 pi * 1 kHz / (gamma_e / q): Larmor frequency of 1 kHz.
    2.0 * std::f64::consts::PI * 1.0e3 / (d_gamma_e() / d_q_slow())
}
fn d_b_direction() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}
fn d_t1_inv() -> f64 {
    500.0
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        Self {
            b_magnitude: d_b_magnitude(),
            b_direction: d_b_direction(),
            t1_inv: d_t1_inv(),
            t2_inv: None,
            se_broadening: false,
        }
    }
}

/// Polarimeter transduction constants. The defaults are synthetic
/// stand-ins chosen to give paper-scale conditioning; no published values
/// exist for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementBlock {
    /// Faraday rotation per unit spin [rad/spin]. Synthetic default.
    #[serde(default = "d_g_coupling")]
    pub g_coupling: f64,
    /// Detector quantum efficiency in (0, 1]. Synthetic default.
    #[serde(default = "d_eta")]
    pub eta: f64,
    /// Probe photon flux [photons/s]; the default corresponds to about
    /// 1 mW of near-infrared light. Synthetic default.
    #[serde(default = "d_photon_flux")]
    pub photon_flux: f64,
    /// Sampling interval [s].
    #[serde(default = "d_delta")]
    pub delta: f64,
}

fn d_g_coupling() -> f64 {
    4.0e-13
}
fn d_eta() -> f64 {
    0.8
}
fn d_photon_flux() -> f64 {
    4.0e15
}
fn d_delta() -> f64 {
    5.0e-6
}

impl Default for MeasurementBlock {
    fn default() -> Self {
        Self {
            g_coupling: d_g_coupling(),
            eta: d_eta(),
            photon_flux: d_photon_flux(),
            delta: d_delta(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientGyro {
    /// Slowed ratio `gamma_e / q_slow`.
    Slowed,
    /// Bare electron ratio `gamma_e`.
    Bare,
}

impl From<GradientGyro> for GyroChoice {
    fn from(g: GradientGyro) -> Self {
        match g {
            GradientGyro::Slowed => GyroChoice::Slowed,
            GradientGyro::Bare => GyroChoice::Bare,
        }
    }
}

/// Command-specific knobs; commands read the fields they need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    /// Samples per simulated record.
    #[serde(default = "d_n_steps")]
    pub n_steps: usize,
    /// Base seed; spin and shot-noise streams are derived from it.
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Welch segment length.
    #[serde(default = "d_segment_length")]
    pub segment_length: usize,
    /// Welch overlap fraction in [0, 1).
    #[serde(default = "d_overlap_fraction")]
    pub overlap_fraction: f64,
    /// Explicit Lorentzian fit window [Hz]; `null` derives one around the
    /// operating Larmor frequency.
    #[serde(default)]
    pub fit_window_hz: Option<[f64; 2]>,
    /// Larmor frequencies [Hz] for `spectrum` (multi-line), `calibrate`
    /// and `scan-field`; `null` uses each command's documented default.
    #[serde(default)]
    pub larmor_hz_list: Option<Vec<f64>>,
    /// Gradient strengths [T/m] for `scan-gradient`.
    #[serde(default = "d_gradients")]
    pub gradients: Vec<f64>,
    /// Post-measurement propagation steps per gradient point.
    #[serde(default = "d_decay_steps")]
    pub decay_steps: usize,
    /// Pair-separation scale [m] for gradient dephasing; `null` resolves
    /// to the cell's r.m.s. pair separation.
    #[serde(default)]
    pub delta_z: Option<f64>,
    /// Gyromagnetic ratio convention for gradient dephasing.
    #[serde(default = "d_gradient_gyro")]
    pub gradient_gyro: GradientGyro,
    /// Apply gradient dephasing only transverse to the field.
    #[serde(default)]
    pub anisotropic_dephasing: bool,
    /// Photocurrent CSV consumed by `filter` instead of simulating.
    #[serde(default)]
    pub input_record: Option<String>,
    /// Linewidth CSV consumed by `calibrate` instead of simulating.
    #[serde(default)]
    pub points_csv: Option<String>,
    /// Filter prior mean [spin].
    #[serde(default = "d_prior_mean")]
    pub prior_mean: [f64; 3],
    /// Filter prior covariance diagonal [spin^2]; `null` uses the thermal
    /// covariance.
    #[serde(default)]
    pub prior_cov_diag: Option<[f64; 3]>,
    /// Iteration budget for steady-state covariance searches.
    #[serde(default = "d_max_riccati_steps")]
    pub max_riccati_steps: usize,
}

fn d_n_steps() -> usize {
    40_000
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}
fn d_segment_length() -> usize {
    4096
}
fn d_overlap_fraction() -> f64 {
    0.5
}
fn d_gradients() -> Vec<f64> {
    vec![0.0, 1.43e-5, 2.86e-5, 4.29e-5, 5.72e-5]
}
fn d_decay_steps() -> usize {
    800
}
fn d_gradient_gyro() -> GradientGyro {
    GradientGyro::Slowed
}
fn d_prior_mean() -> [f64; 3] {
    [0.0, 0.0, 0.0]
}
fn d_max_riccati_steps() -> usize {
    400_000
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            n_steps: d_n_steps(),
            seed: d_seed(),
            segment_length: d_segment_length(),
            overlap_fraction: d_overlap_fraction(),
            fit_window_hz: None,
            larmor_hz_list: None,
            gradients: d_gradients(),
            decay_steps: d_decay_steps(),
            delta_z: None,
            gradient_gyro: d_gradient_gyro(),
            anisotropic_dephasing: false,
            input_record: None,
            points_csv: None,
            prior_mean: d_prior_mean(),
            prior_cov_diag: None,
            max_riccati_steps: d_max_riccati_steps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "csv+svg")]
    CsvSvg,
}

impl OutputFormat {
    pub fn svg(&self) -> bool {
        matches!(self, OutputFormat::CsvSvg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Output directory; `--out` and `SERFSIM_OUT` override it.
    #[serde(default = "d_directory")]
    pub directory: String,
    #[serde(default = "d_format")]
    pub format: OutputFormat,
}

fn d_directory() -> String {
    "out".to_owned()
}
fn d_format() -> OutputFormat {
    OutputFormat::Csv
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: d_directory(),
            format: d_format(),
        }
    }
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_schema_version")]
    pub schema_version: u32,
    /// Free-form annotation echoed into the manifest.
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub physical: PhysicalBlock,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    #[serde(default)]
    pub measurement: MeasurementBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes")
    }
}

/// Loads, validates and resolves a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Same as [`parse_config`] but from an in-memory document.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    let mut config: RunConfig = serde_path_to_error::deserialize(&mut deserializer)
        .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    config.validate()?;
    config.resolve();
    Ok(config)
}

impl RunConfig {
    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} unsupported; this build reads version {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.physical_params()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.measurement_model()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let d = &self.dynamics;
        if !d.b_magnitude.is_finite() || d.b_magnitude < 0.0 {
            return Err(CliError::Config(format!(
                "dynamics.b_magnitude must be finite and non-negative, got {}",
                d.b_magnitude
            )));
        }
        if d.b_direction.iter().all(|c| *c == 0.0) {
            return Err(CliError::Config(
                "dynamics.b_direction must not be the zero vector".into(),
            ));
        }
        if let Some(t2) = d.t2_inv {
            if t2 < d.t1_inv {
                return Err(CliError::Config(format!(
                    "dynamics.t2_inv ({t2}) must be at least dynamics.t1_inv ({})",
                    d.t1_inv
                )));
            }
        }
        if d.t1_inv < 0.0 || !d.t1_inv.is_finite() {
            return Err(CliError::Config(format!(
                "dynamics.t1_inv must be finite and non-negative, got {}",
                d.t1_inv
            )));
        }

        let e = &self.experiment;
        if e.n_steps == 0 {
            return Err(CliError::Config(
                "experiment.n_steps must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&e.overlap_fraction) {
            return Err(CliError::Config(format!(
                "experiment.overlap_fraction must lie in [0, 1), got {}",
                e.overlap_fraction
            )));
        }
        if e.segment_length < 4 {
            return Err(CliError::Config(format!(
                "experiment.segment_length must be at least 4, got {}",
                e.segment_length
            )));
        }
        if e.gradients.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(CliError::Config(
                "experiment.gradients must be finite and non-negative".into(),
            ));
        }
        if e.decay_steps < 4 {
            return Err(CliError::Config(
                "experiment.decay_steps must be at least 4".into(),
            ));
        }
        if let Some(dz) = e.delta_z {
            if !dz.is_finite() || dz <= 0.0 {
                return Err(CliError::Config(format!(
                    "experiment.delta_z must be finite and positive, got {dz}"
                )));
            }
        }
        if let Some(diag) = e.prior_cov_diag {
            if diag.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(CliError::Config(
                    "experiment.prior_cov_diag entries must be finite and non-negative".into(),
                ));
            }
        }
        if let Some(list) = &e.larmor_hz_list {
            if list.is_empty() {
                return Err(CliError::Config(
                    "experiment.larmor_hz_list must not be empty when given".into(),
                ));
            }
            if list.iter().any(|f| !f.is_finite() || *f < 0.0) {
                return Err(CliError::Config(
                    "experiment.larmor_hz_list entries must be finite and non-negative".into(),
                ));
            }
        }
        if let Some(w) = e.fit_window_hz {
            if w.iter().any(|v| !v.is_finite()) || w[0] >= w[1] {
                return Err(CliError::Config(format!(
                    "experiment.fit_window_hz must be a finite ascending pair, got {w:?}"
                )));
            }
        }
        Ok(())
    }

    /// Materializes derived defaults so the echoed config is explicit.
    /// Resolution is idempotent: parsing the serialized result changes
    /// nothing.
    fn resolve(&mut self) {
        if self.dynamics.t2_inv.is_none() && !self.dynamics.se_broadening {
            self.dynamics.t2_inv = Some(self.dynamics.t1_inv);
        }
        if self.experiment.delta_z.is_none() {
            self.experiment.delta_z = Some(rms_pair_separation(self.physical.cell_length));
        }
    }

    pub fn physical_params(&self) -> PhysicalParams {
        PhysicalParams {
            n_rb: self.physical.n_rb,
            sigma_se: self.physical.sigma_se,
            v_bar: self.physical.v_bar,
            gamma_e: self.physical.gamma_e,
            q_slow: self.physical.q_slow,
            nuclear_spin: self.physical.nuclear_spin,
            cell_length: self.physical.cell_length,
            beam_area: self.physical.beam_area,
        }
    }

    pub fn measurement_model(&self) -> MeasurementModel {
        MeasurementModel {
            g_coupling: self.measurement.g_coupling,
            eta: self.measurement.eta,
            photon_flux: self.measurement.photon_flux,
            delta: self.measurement.delta,
        }
    }

    pub fn b_direction_unit(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.dynamics.b_direction).normalize()
    }

    /// Bias field vector at the configured magnitude [T].
    pub fn b_field(&self) -> Vector3<f64> {
        self.b_direction_unit() * self.dynamics.b_magnitude
    }

    /// Field vector that puts the Larmor frequency at `nu_l` [Hz].
    pub fn b_field_for(&self, nu_l: f64) -> Vector3<f64> {
        let gamma = self.physical_params().slowed_gyro();
        self.b_direction_unit() * (2.0 * std::f64::consts::PI * nu_l / gamma)
    }

    /// Larmor angular frequency at the configured field [rad/s].
    pub fn omega_l(&self) -> f64 {
        self.physical_params().slowed_gyro() * self.dynamics.b_magnitude
    }

    /// Effective relaxation rates at Larmor frequency `omega_l`; applies
    /// the quadratic spin-exchange broadening when enabled.
    pub fn rates_at(&self, omega_l: f64) -> Result<RelaxationRates> {
        let t1 = self.dynamics.t1_inv;
        let mut t2 = self.dynamics.t2_inv.unwrap_or(t1);
        if self.dynamics.se_broadening {
            let p = self.physical_params();
            let r_se = serfsim_core::physmodel::se_rate(&p);
            t2 += std::f64::consts::PI * se_linewidth(omega_l, r_se, p.nuclear_spin);
        }
        RelaxationRates::new(t1, t2).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Filter prior covariance: configured diagonal or the thermal state.
    pub fn prior_covariance(&self, q_eq: &Matrix3<f64>) -> Matrix3<f64> {
        match self.experiment.prior_cov_diag {
            Some(diag) => Matrix3::from_diagonal(&Vector3::from_column_slice(&diag)),
            None => *q_eq,
        }
    }

    pub fn prior_mean(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.experiment.prior_mean)
    }
}
