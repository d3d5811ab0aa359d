//! `scan-gradient`: post-measurement variance decay and per-component
//! steady-state variances as a function of an applied field gradient.

use std::fmt::Write as _;

use serfsim_core::witness::{gradient_scan, GradientScanConfig};

use super::CommandOutput;
use crate::config::RunConfig;
use crate::error::Result;
use crate::svg;

pub(crate) fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.physical_params();
    let n_atoms = serfsim_core::physmodel::atom_number(&p);
    let rates = cfg.rates_at(cfg.omega_l())?;
    let scan_cfg = GradientScanConfig {
        delta_z: cfg.experiment.delta_z,
        gyro: cfg.experiment.gradient_gyro.into(),
        anisotropic: cfg.experiment.anisotropic_dephasing,
        decay_steps: cfg.experiment.decay_steps,
        max_riccati_steps: cfg.experiment.max_riccati_steps,
    };
    let results = gradient_scan(
        &p,
        cfg.b_field(),
        &rates,
        &cfg.measurement_model(),
        n_atoms,
        &cfg.experiment.gradients,
        &scan_cfg,
    )?;

    let baseline = results.first().map(|r| r.decay_rate).unwrap_or(0.0);
    let mut decays = String::from(
        "gradient,delta_omega,decay_rate,rate_uncertainty,injected_variance_rate,\
         added_rate_vs_first\n",
    );
    let mut components = String::from("gradient,var_x,var_y,var_z,total_variation\n");
    let mut series_csv = String::from("gradient,time,total_variation\n");
    for r in &results {
        writeln!(
            decays,
            "{},{},{},{},{},{}",
            r.gradient,
            r.delta_omega,
            r.decay_rate,
            r.rate_uncertainty,
            2.0 * r.delta_omega,
            r.decay_rate - baseline
        )
        .expect("string write");
        let total: f64 = r.steady_variance.iter().sum();
        writeln!(
            components,
            "{},{},{},{},{}",
            r.gradient, r.steady_variance[0], r.steady_variance[1], r.steady_variance[2], total
        )
        .expect("string write");
        for (t, v) in &r.variance_series {
            writeln!(series_csv, "{},{},{}", r.gradient, t, v).expect("string write");
        }
    }

    let json = serde_json::json!({
        "n_atoms": n_atoms,
        "delta_z": cfg.experiment.delta_z,
        "gradient_gyro": cfg.experiment.gradient_gyro,
        "anisotropic_dephasing": cfg.experiment.anisotropic_dephasing,
        "points": results.iter().map(|r| serde_json::json!({
            "gradient": r.gradient,
            "delta_omega": r.delta_omega,
            "decay_rate": r.decay_rate,
            "rate_uncertainty": r.rate_uncertainty,
            "steady_variance": r.steady_variance,
        })).collect::<Vec<_>>(),
    });

    let mut files = vec![
        ("gradient_decays.csv".into(), decays),
        ("component_variance.csv".into(), components),
        ("variance_vs_time.csv".into(), series_csv),
        (
            "gradient_scan.json".into(),
            serde_json::to_string_pretty(&json).expect("json serializes"),
        ),
    ];

    if cfg.output.format.svg() {
        let labels: Vec<String> = results
            .iter()
            .map(|r| format!("B' = {} T/m", r.gradient))
            .collect();
        let series: Vec<svg::Series<'_>> = labels
            .iter()
            .zip(&results)
            .map(|(label, r)| svg::Series {
                label,
                points: &r.variance_series,
            })
            .collect();
        files.push((
            "gradient_decay.svg".into(),
            svg::line_chart(
                "Conditioned variance decay vs gradient",
                "time since last sample [s]",
                "Tr[Sigma] [spin^2]",
                &series,
                false,
            ),
        ));
    }

    Ok(CommandOutput {
        files,
        streams: Vec::new(),
    })
}
