//! `scan-field`: steady-state conditioned variance versus Larmor
//! frequency. Covariance recursions carry no randomness, so the scan runs
//! without sampled records.

use std::fmt::Write as _;

use rayon::prelude::*;
use serfsim_core::estimator::riccati_steady_state;
use serfsim_core::witness::{witness_report, WitnessReport};

use super::{models_at, CommandOutput};
use crate::config::RunConfig;
use crate::error::Result;
use crate::svg;

/// Default sweep [Hz]: SERF conditions up to fully spin-exchange-broadened
/// ones.
pub const DEFAULT_FIELD_SCAN_FREQUENCIES: [f64; 8] =
    [1.0e3, 2.0e3, 5.0e3, 1.0e4, 2.0e4, 5.0e4, 1.0e5, 2.0e5];

struct Point {
    nu_l: f64,
    t1_inv: f64,
    t2_inv: f64,
    report: WitnessReport,
}

pub(crate) fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let fields: Vec<f64> = cfg
        .experiment
        .larmor_hz_list
        .clone()
        .unwrap_or_else(|| DEFAULT_FIELD_SCAN_FREQUENCIES.to_vec());

    let points: Vec<Point> = fields
        .par_iter()
        .map(|&nu_l| -> Result<Point> {
            let omega = 2.0 * std::f64::consts::PI * nu_l;
            let rates = cfg.rates_at(omega)?;
            let (_, n_atoms, dynamics, dm) = models_at(cfg, cfg.b_field_for(nu_l), &rates)?;
            let (steady, _) = riccati_steady_state(
                &dm,
                &cfg.measurement_model(),
                dynamics.q_eq,
                cfg.experiment.max_riccati_steps,
            )?;
            Ok(Point {
                nu_l,
                t1_inv: rates.t1_inv,
                t2_inv: rates.t2_inv,
                report: witness_report(&steady, n_atoms),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from(
        "larmor_hz,t1_inv,t2_inv,total_variation,xi_squared,squeezing_db,\
         entangled_lower_bound,var_x,var_y,var_z\n",
    );
    for p in &points {
        let r = &p.report;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            p.nu_l,
            p.t1_inv,
            p.t2_inv,
            r.total_variation,
            r.xi_squared,
            r.squeezing_db,
            r.entangled_lower_bound,
            r.per_component_variance[0],
            r.per_component_variance[1],
            r.per_component_variance[2]
        )
        .expect("string write");
    }

    let mut files = vec![("field_scan.csv".into(), csv)];
    if cfg.output.format.svg() {
        let data: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.nu_l, p.report.xi_squared))
            .collect();
        let sql: Vec<(f64, f64)> = points.iter().map(|p| (p.nu_l, 1.0)).collect();
        let tss: Vec<(f64, f64)> = points.iter().map(|p| (p.nu_l, 1.5)).collect();
        files.push((
            "field_scan.svg".into(),
            svg::line_chart(
                "Conditioned spin variance vs Larmor frequency",
                "Larmor frequency [Hz]",
                "Tr[Sigma_ss] / SQL",
                &[
                    svg::Series {
                        label: "conditioned",
                        points: &data,
                    },
                    svg::Series {
                        label: "SQL",
                        points: &sql,
                    },
                    svg::Series {
                        label: "TSS",
                        points: &tss,
                    },
                ],
                true,
            ),
        ));
    }

    Ok(CommandOutput {
        files,
        streams: Vec::new(),
    })
}
