//! `spectrum`: spin-noise spectra with Lorentzian line fits, for the
//! configured field or a list of Larmor frequencies.

use std::fmt::Write as _;

use rayon::prelude::*;
use serfsim_core::io;
use serfsim_core::spectra::{lorentzian_fit, psd_welch, LorentzianFit, Spectrum};

use super::{fit_window, models_at, simulate_record, CommandOutput};
use crate::config::RunConfig;
use crate::error::Result;
use crate::manifest::StreamSeeds;
use crate::svg;

struct Line {
    nu_l: f64,
    spectrum: Spectrum,
    fit: Option<LorentzianFit>,
    seeds: StreamSeeds,
}

pub(crate) fn run(cfg: &RunConfig) -> Result<CommandOutput> {
    let fields: Vec<f64> = match &cfg.experiment.larmor_hz_list {
        Some(list) => list.clone(),
        None => vec![cfg.omega_l() / (2.0 * std::f64::consts::PI)],
    };

    let lines: Vec<Line> = fields
        .par_iter()
        .enumerate()
        .map(|(i, &nu_l)| -> Result<Line> {
            let omega = 2.0 * std::f64::consts::PI * nu_l;
            let rates = cfg.rates_at(omega)?;
            let b = if cfg.experiment.larmor_hz_list.is_some() {
                cfg.b_field_for(nu_l)
            } else {
                cfg.b_field()
            };
            let (_, _, dynamics, dm) = models_at(cfg, b, &rates)?;
            let (_, record, seeds) =
                simulate_record(cfg, &dm, &dynamics, i as u64, format!("record_{i:03}"))?;
            let spectrum = psd_welch(
                &record,
                cfg.experiment.segment_length,
                cfg.experiment.overlap_fraction,
            )?;
            let fit = match lorentzian_fit(&spectrum, fit_window(cfg, nu_l)) {
                Ok(fit) => Some(fit),
                Err(serfsim_core::Error::NoPeak) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(Line {
                nu_l,
                spectrum,
                fit,
                seeds,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut files = Vec::new();
    let mut fits_csv =
        String::from("index,larmor_hz,center_hz,fwhm_hz,amplitude,offset,residual_rms,status\n");
    for (i, line) in lines.iter().enumerate() {
        files.push((
            format!("spectrum_{i:03}.csv"),
            io::spectrum_csv(&line.spectrum),
        ));
        match &line.fit {
            Some(f) => writeln!(
                fits_csv,
                "{i},{},{},{},{},{},{},ok",
                line.nu_l, f.center, f.fwhm, f.amplitude, f.offset, f.residual_rms
            )
            .expect("string write"),
            None => writeln!(fits_csv, "{i},{},,,,,,no_peak", line.nu_l).expect("string write"),
        }
    }
    files.push(("lorentz_fits.csv".into(), fits_csv));

    if cfg.output.format.svg() {
        let labels: Vec<String> = lines
            .iter()
            .map(|l| format!("nu_L = {} Hz", l.nu_l))
            .collect();
        let pts: Vec<Vec<(f64, f64)>> = lines
            .iter()
            .map(|l| {
                l.spectrum
                    .frequencies
                    .iter()
                    .cloned()
                    .zip(l.spectrum.psd.iter().cloned())
                    .collect()
            })
            .collect();
        let series: Vec<svg::Series<'_>> = labels
            .iter()
            .zip(&pts)
            .map(|(label, points)| svg::Series { label, points })
            .collect();
        files.push((
            "spectra.svg".into(),
            svg::line_chart(
                "Spin-noise spectra",
                "frequency [Hz]",
                "PSD [signal^2/Hz]",
                &series,
                false,
            ),
        ));
    }

    Ok(CommandOutput {
        files,
        streams: lines.into_iter().map(|l| l.seeds).collect(),
    })
}
