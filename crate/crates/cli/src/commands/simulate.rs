//! `simulate`: one spin trajectory plus its polarimeter record.

use serfsim_core::io;

use super::{models_at, simulate_record, CommandOutput};
use crate::config::RunConfig;
use crate::error::Result;

pub(crate) fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let rates = cfg.rates_at(cfg.omega_l())?;
    let (_, _, dynamics, dm) = models_at(cfg, cfg.b_field(), &rates)?;
    let (traj, record, seeds) = simulate_record(cfg, &dm, &dynamics, 0, "record".into())?;
    Ok(CommandOutput {
        files: vec![
            ("trajectory.csv".into(), io::trajectory_csv(&traj)),
            ("photocurrent.csv".into(), io::photocurrent_csv(&record)),
        ],
        streams: vec![seeds],
    })
}
