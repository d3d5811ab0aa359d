//! `calibrate`: alkali density from linewidth-versus-frequency data,
//! either loaded from CSV or produced by simulating records at several
//! Larmor frequencies and fitting their lines.

use std::fmt::Write as _;

use rayon::prelude::*;
use serfsim_core::io;
use serfsim_core::spectra::{
    density_calibration, lorentzian_fit, psd_welch, se_broadened_rates, se_linewidth,
};

use super::{fit_window, models_at, simulate_record, CommandOutput};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::StreamSeeds;
use crate::svg;

/// Default Larmor frequencies [Hz] for self-generated calibration data;
/// chosen so the lines stay well-resolved at the default density regime.
pub const DEFAULT_CALIBRATION_FREQUENCIES: [f64; 5] = [200.0, 300.0, 400.0, 500.0, 600.0];

pub(crate) fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut files = Vec::new();
    let mut streams: Vec<StreamSeeds> = Vec::new();

    let points: Vec<(f64, f64)> = match &cfg.experiment.points_csv {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
            io::read_points_csv(&text)?
        }
        None => {
            let fields: Vec<f64> = cfg
                .experiment
                .larmor_hz_list
                .clone()
                .unwrap_or_else(|| DEFAULT_CALIBRATION_FREQUENCIES.to_vec());
            let p = cfg.physical_params();
            let r_se = serfsim_core::physmodel::se_rate(&p);

            let fitted: Vec<(f64, f64, String, StreamSeeds)> = fields
                .par_iter()
                .enumerate()
                .map(|(i, &nu_l)| -> Result<(f64, f64, String, StreamSeeds)> {
                    let omega = 2.0 * std::f64::consts::PI * nu_l;
                    let rates =
                        se_broadened_rates(cfg.dynamics.t1_inv, omega, r_se, p.nuclear_spin)?;
                    let (_, _, dynamics, dm) = models_at(cfg, cfg.b_field_for(nu_l), &rates)?;
                    let (_, record, seeds) =
                        simulate_record(cfg, &dm, &dynamics, i as u64, format!("record_{i:03}"))?;
                    let spectrum = psd_welch(
                        &record,
                        cfg.experiment.segment_length,
                        cfg.experiment.overlap_fraction,
                    )?;
                    let fit = lorentzian_fit(&spectrum, fit_window(cfg, nu_l))?;
                    let row = format!(
                        "{i},{nu_l},{},{},{},{},{},ok\n",
                        fit.center, fit.fwhm, fit.amplitude, fit.offset, fit.residual_rms
                    );
                    Ok((omega, fit.fwhm, row, seeds))
                })
                .collect::<Result<Vec<_>>>()?;

            let mut fits_csv = String::from(
                "index,larmor_hz,center_hz,fwhm_hz,amplitude,offset,residual_rms,status\n",
            );
            let mut points = Vec::with_capacity(fitted.len());
            for (omega, fwhm, row, seeds) in fitted {
                fits_csv.push_str(&row);
                points.push((omega, fwhm));
                streams.push(seeds);
            }
            files.push(("lorentz_fits.csv".into(), fits_csv));
            points
        }
    };

    let p = cfg.physical_params();
    let result = density_calibration(&points, &p)?;

    files.push(("linewidths.csv".into(), io::points_csv(&points)));
    let mut cal_csv = String::from("n_rb,delta_nu_0,var_n_rb,cov_n_rb_delta_nu_0,var_delta_nu_0\n");
    writeln!(
        cal_csv,
        "{},{},{},{},{}",
        result.n_rb,
        result.delta_nu_0,
        result.fit_covariance[0][0],
        result.fit_covariance[0][1],
        result.fit_covariance[1][1]
    )
    .expect("string write");
    files.push(("calibration.csv".into(), cal_csv));

    if cfg.output.format.svg() {
        let r_se_fit = p.sigma_se * result.n_rb * p.v_bar;
        let data: Vec<(f64, f64)> = points.clone();
        let model: Vec<(f64, f64)> = {
            let w_max = points.iter().map(|(w, _)| *w).fold(0.0, f64::max);
            (0..=100)
                .map(|k| {
                    let w = w_max * k as f64 / 100.0;
                    (
                        w,
                        result.delta_nu_0 + se_linewidth(w, r_se_fit, p.nuclear_spin),
                    )
                })
                .collect()
        };
        files.push((
            "calibration.svg".into(),
            svg::line_chart(
                "Linewidth vs Larmor frequency",
                "omega_L [rad/s]",
                "FWHM [Hz]",
                &[
                    svg::Series {
                        label: "measured",
                        points: &data,
                    },
                    svg::Series {
                        label: "fit",
                        points: &model,
                    },
                ],
                false,
            ),
        ));
    }

    Ok(CommandOutput { files, streams })
}
