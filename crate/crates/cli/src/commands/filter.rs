//! `filter`: Kalman filtering of a photocurrent record, either loaded from
//! a CSV or regenerated from the configured seeds.

use serfsim_core::estimator::kf_run;
use serfsim_core::io;

use super::{models_at, simulate_record, CommandOutput};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub(crate) fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let rates = cfg.rates_at(cfg.omega_l())?;
    let (_, _, dynamics, dm) = models_at(cfg, cfg.b_field(), &rates)?;

    let (record, streams) = match &cfg.experiment.input_record {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            let record = io::read_photocurrent_csv(&text)?;
            if let Some(dt) = record.delta() {
                let delta = cfg.measurement.delta;
                if (dt - delta).abs() > 1e-9 * delta {
                    return Err(CliError::Config(format!(
                        "input record step {dt} does not match measurement.delta {delta}"
                    )));
                }
            }
            (record, Vec::new())
        }
        None => {
            let (_, record, seeds) = simulate_record(cfg, &dm, &dynamics, 0, "record".into())?;
            (record, vec![seeds])
        }
    };

    let run = kf_run(
        &record,
        &dm,
        &cfg.measurement_model(),
        cfg.prior_mean(),
        cfg.prior_covariance(&dynamics.q_eq),
    )?;

    Ok(CommandOutput {
        files: vec![(
            "filter.csv".into(),
            io::filter_csv(&run, cfg.measurement.delta),
        )],
        streams,
    })
}
