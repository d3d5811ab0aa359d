//! `witness`: simulate, filter, and convert the steady-state covariance
//! into the squeezing/entanglement summary.

use std::fmt::Write as _;

use serfsim_core::estimator::kf_run;
use serfsim_core::physmodel::equilibrium_variation;
use serfsim_core::witness::witness_report;

use super::{models_at, simulate_record, CommandOutput};
use crate::config::RunConfig;
use crate::error::Result;

pub(crate) fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let rates = cfg.rates_at(cfg.omega_l())?;
    let (_, n_atoms, dynamics, dm) = models_at(cfg, cfg.b_field(), &rates)?;
    let (_, record, seeds) = simulate_record(cfg, &dm, &dynamics, 0, "record".into())?;
    let run = kf_run(
        &record,
        &dm,
        &cfg.measurement_model(),
        cfg.prior_mean(),
        cfg.prior_covariance(&dynamics.q_eq),
    )?;

    let report = witness_report(&run.steady_state_covariance, n_atoms);
    let (tss, sql) = equilibrium_variation(n_atoms);

    let mut csv = String::from(
        "total_variation,xi_squared,squeezing_db,entangled_lower_bound,var_x,var_y,var_z\n",
    );
    writeln!(
        csv,
        "{},{},{},{},{},{},{}",
        report.total_variation,
        report.xi_squared,
        report.squeezing_db,
        report.entangled_lower_bound,
        report.per_component_variance[0],
        report.per_component_variance[1],
        report.per_component_variance[2]
    )
    .expect("string write");

    let json = serde_json::json!({
        "n_atoms": n_atoms,
        "sql": sql,
        "tss": tss,
        "total_variation": report.total_variation,
        "xi_squared": report.xi_squared,
        "squeezing_db": report.squeezing_db,
        "entangled_lower_bound": report.entangled_lower_bound,
        "per_component_variance": report.per_component_variance,
        "converged": run.converged_at.is_some(),
        "converged_at": run.converged_at,
        "larmor_hz": cfg.omega_l() / (2.0 * std::f64::consts::PI),
    });

    Ok(CommandOutput {
        files: vec![
            ("witness.csv".into(), csv),
            (
                "witness.json".into(),
                serde_json::to_string_pretty(&json).expect("json serializes"),
            ),
        ],
        streams: vec![seeds],
    })
}
