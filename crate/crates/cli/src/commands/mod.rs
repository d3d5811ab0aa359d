//! Command dispatch: each subcommand composes core operations, returns its
//! output files as in-memory strings, and the dispatcher writes everything
//! (plus the manifest and resolved config) only after the whole computation
//! succeeded. A failed run leaves no partial files behind.

use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use serfsim_core::physmodel::{
    atom_number, build_dynamics, DynamicsModel, PhysicalParams, RelaxationRates,
};
use serfsim_core::simulator::{
    discretize, measure_photocurrent, simulate_spin, stream_seed, DiscreteModel,
    PhotocurrentRecord, SpinTrajectory,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{RunManifest, SeedInfo, StreamSeeds};

mod calibrate;
mod filter;
mod scan_field;
mod scan_gradient;
mod simulate;
mod spectrum;
mod witness;

/// The seven run modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Filter,
    Spectrum,
    Calibrate,
    Witness,
    ScanField,
    ScanGradient,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Filter => "filter",
            Command::Spectrum => "spectrum",
            Command::Calibrate => "calibrate",
            Command::Witness => "witness",
            Command::ScanField => "scan-field",
            Command::ScanGradient => "scan-gradient",
        }
    }
}

/// Files and consumed random streams produced by one command.
pub(crate) struct CommandOutput {
    pub files: Vec<(String, String)>,
    pub streams: Vec<StreamSeeds>,
}

/// Runs a command against a resolved configuration and writes its outputs
/// into `cfg.output.directory`.
pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let output = match cmd {
        Command::Simulate => simulate::run(cfg)?,
        Command::Filter => filter::run(cfg)?,
        Command::Spectrum => spectrum::run(cfg)?,
        Command::Calibrate => calibrate::run(cfg)?,
        Command::Witness => witness::run(cfg)?,
        Command::ScanField => scan_field::run(cfg)?,
        Command::ScanGradient => scan_gradient::run(cfg)?,
    };

    let dir = Path::new(&cfg.output.directory);
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;

    let mut files = Vec::with_capacity(output.files.len() + 1);
    let resolved = serde_json::to_string_pretty(cfg).expect("config serializes");
    write_file(dir, "resolved_config.json", &resolved)?;
    files.push("resolved_config.json".to_owned());
    for (name, content) in &output.files {
        write_file(dir, name, content)?;
        files.push(name.clone());
    }

    let manifest = RunManifest::new(
        cmd.name(),
        cfg,
        SeedInfo {
            base: cfg.experiment.seed,
            streams: output.streams,
        },
        files,
        started.elapsed().as_millis() as u64,
    );
    write_file(dir, "manifest.json", &manifest.to_json())?;
    Ok(manifest)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Continuous and discrete dynamics at the given field and rates.
pub(crate) fn models_at(
    cfg: &RunConfig,
    b_field: Vector3<f64>,
    rates: &RelaxationRates,
) -> Result<(PhysicalParams, f64, DynamicsModel, DiscreteModel)> {
    let p = cfg.physical_params();
    let n_atoms = atom_number(&p);
    let dynamics = build_dynamics(&p, b_field, rates, n_atoms)?;
    let dm = discretize(&dynamics, cfg.measurement.delta)?;
    Ok((p, n_atoms, dynamics, dm))
}

/// Simulates one trajectory/record pair on derived stream `index`.
pub(crate) fn simulate_record(
    cfg: &RunConfig,
    dm: &DiscreteModel,
    dynamics: &DynamicsModel,
    index: u64,
    label: String,
) -> Result<(SpinTrajectory, PhotocurrentRecord, StreamSeeds)> {
    let spin = stream_seed(cfg.experiment.seed, 2 * index);
    let shot = stream_seed(cfg.experiment.seed, 2 * index + 1);
    let traj = simulate_spin(dm, &dynamics.q_eq, cfg.experiment.n_steps, spin, None)?;
    let record = measure_photocurrent(&traj, &cfg.measurement_model(), shot)?;
    Ok((traj, record, StreamSeeds { label, spin, shot }))
}

/// Lorentzian fit window: the configured one, or a band around the
/// expected line position capped at a few kilohertz.
pub(crate) fn fit_window(cfg: &RunConfig, nu_l: f64) -> Option<(f64, f64)> {
    if let Some(w) = cfg.experiment.fit_window_hz {
        return Some((w[0], w[1]));
    }
    (nu_l > 0.0).then(|| {
        (
            (0.4 * nu_l).max(nu_l - 5.0e3),
            (1.8 * nu_l).min(nu_l + 5.0e3),
        )
    })
}
