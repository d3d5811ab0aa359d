//! CSV interchange for trajectories, records, filter runs and spectra.
//!
//! All writers format floats with Rust's shortest round-trip representation,
//! so a written file parses back to bit-identical values and identical
//! inputs always produce byte-identical files.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimator::FilterRun;
use crate::simulator::{PhotocurrentRecord, SpinTrajectory};
use crate::spectra::Spectrum;

/// `time,Jx,Jy,Jz`
pub fn trajectory_csv(traj: &SpinTrajectory) -> String {
    let mut out = String::from("time,Jx,Jy,Jz\n");
    for (t, j) in traj.times.iter().zip(&traj.spins) {
        writeln!(out, "{},{},{},{}", t, j.x, j.y, j.z).expect("string write");
    }
    out
}

/// `time,I`
pub fn photocurrent_csv(record: &PhotocurrentRecord) -> String {
    let mut out = String::from("time,I\n");
    for (t, i) in record.times.iter().zip(&record.samples) {
        writeln!(out, "{},{}", t, i).expect("string write");
    }
    out
}

/// `time,Jx_est,Jy_est,Jz_est,var_x,var_y,var_z,total_variation`
pub fn filter_csv(run: &FilterRun, delta: f64) -> String {
    let mut out = String::from("time,Jx_est,Jy_est,Jz_est,var_x,var_y,var_z,total_variation\n");
    for state in &run.states {
        let t = state.time_index as f64 * delta;
        let e = &state.estimate;
        let c = &state.covariance;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t,
            e.x,
            e.y,
            e.z,
            c[(0, 0)],
            c[(1, 1)],
            c[(2, 2)],
            c.trace()
        )
        .expect("string write");
    }
    out
}

/// `frequency_hz,psd`
pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("frequency_hz,psd\n");
    for (f, p) in s.frequencies.iter().zip(&s.psd) {
        writeln!(out, "{},{}", f, p).expect("string write");
    }
    out
}

fn parse_line(line: &str, columns: usize, line_no: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != columns {
        return Err(Error::Mismatch(format!(
            "line {line_no}: expected {columns} columns, found {}",
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|f| {
            f.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("line {line_no}: cannot parse '{f}' as a number"))
            })
        })
        .collect()
}

/// Reads a `time,I` file back into a record. The seed of an externally
/// loaded record is recorded as 0 (unknown provenance).
pub fn read_photocurrent_csv(content: &str) -> Result<PhotocurrentRecord> {
    let mut lines = content.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if header != "time,I" {
        return Err(Error::Mismatch(format!(
            "expected header 'time,I', found '{header}'"
        )));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_line(line, 2, idx + 1)?;
        times.push(row[0]);
        samples.push(row[1]);
    }
    if times.is_empty() {
        return Err(Error::TooShort {
            context: "read_photocurrent_csv",
            required: 1,
            actual: 0,
        });
    }
    Ok(PhotocurrentRecord {
        times,
        samples,
        seed: 0,
    })
}

/// Reads `(omega_l, delta_nu)` calibration pairs; header
/// `omega_l,delta_nu_hz`.
pub fn read_points_csv(content: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = content.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if header != "omega_l,delta_nu_hz" {
        return Err(Error::Mismatch(format!(
            "expected header 'omega_l,delta_nu_hz', found '{header}'"
        )));
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_line(line, 2, idx + 1)?;
        points.push((row[0], row[1]));
    }
    Ok(points)
}

/// `omega_l,delta_nu_hz`
pub fn points_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("omega_l,delta_nu_hz\n");
    for (w, d) in points {
        writeln!(out, "{},{}", w, d).expect("string write");
    }
    out
}
