//! Spin-noise power spectra, Lorentzian line fits and the density
//! calibration built on the spin-exchange broadening law.

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::fit;
use crate::physmodel::{PhysicalParams, RelaxationRates};
use crate::simulator::PhotocurrentRecord;

/// One-sided power spectral density on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin centers [Hz], ascending from DC to Nyquist.
    pub frequencies: Vec<f64>,
    /// Power density [signal^2/Hz].
    pub psd: Vec<f64>,
    /// Bin width [Hz].
    pub resolution: f64,
    /// Number of averaged segments.
    pub segments: usize,
}

impl Spectrum {
    /// Integral of the PSD over frequency; equals the signal variance for a
    /// well-normalized one-sided spectrum.
    pub fn integrated_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }
}

/// Welch-averaged one-sided periodogram with a periodic Hann window.
///
/// Segments are windowed as-is (no detrending; records here are zero-mean
/// by construction), so low-frequency line content integrates correctly.
/// The normalization satisfies Parseval: `sum(psd) * resolution` estimates
/// the signal variance.
pub fn psd_welch(
    record: &PhotocurrentRecord,
    segment_length: usize,
    overlap_fraction: f64,
) -> Result<Spectrum> {
    if segment_length < 4 {
        return Err(Error::InvalidParameter(format!(
            "segment_length must be at least 4, got {segment_length}"
        )));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidParameter(format!(
            "overlap_fraction must lie in [0, 1), got {overlap_fraction}"
        )));
    }
    if record.len() < segment_length {
        return Err(Error::TooShort {
            context: "psd_welch",
            required: segment_length,
            actual: record.len(),
        });
    }
    let delta = record.delta().ok_or(Error::TooShort {
        context: "psd_welch",
        required: 2,
        actual: record.len(),
    })?;
    let fs = 1.0 / delta;
    let n = segment_length;
    let hop = ((n as f64) * (1.0 - overlap_fraction)).round().max(1.0) as usize;
    let segments = (record.len() - n) / hop + 1;

    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let n_bins = n / 2 + 1;
    let mut acc = vec![0.0f64; n_bins];
    let mut buffer = vec![Complex::new(0.0, 0.0); n];

    for s in 0..segments {
        let chunk = &record.samples[s * hop..s * hop + n];
        for (i, (x, w)) in chunk.iter().zip(&window).enumerate() {
            buffer[i] = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buffer);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buffer[k].norm_sqr();
        }
    }

    let scale = 1.0 / (segments as f64 * fs * window_power);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                1.0
            } else {
                2.0
            };
            a * scale * one_sided
        })
        .collect();
    let resolution = fs / n as f64;
    let frequencies = (0..n_bins).map(|k| k as f64 * resolution).collect();
    Ok(Spectrum {
        frequencies,
        psd,
        resolution,
        segments,
    })
}

/// Lorentzian line parameters fitted to a spectrum window.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    /// Line center [Hz].
    pub center: f64,
    /// Full width at half maximum [Hz].
    pub fwhm: f64,
    /// Peak height above the offset [signal^2/Hz].
    pub amplitude: f64,
    /// Flat baseline [signal^2/Hz].
    pub offset: f64,
    /// Root mean square fit residual.
    pub residual_rms: f64,
}

fn lorentz_value(f: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let hw2 = (fwhm / 2.0) * (fwhm / 2.0);
    offset + amplitude * hw2 / ((f - center).powi(2) + hw2)
}

/// Least-squares Lorentzian fit `offset + amp (w/2)^2 / ((f-c)^2 + (w/2)^2)`.
///
/// `window` restricts the fit to a frequency range; when absent the window
/// defaults to five half-width guesses either side of the tallest bin,
/// clipped to the spectrum. Initial values come from the peak bin, the
/// half-maximum crossings and the spectral floor. Flat input is flagged as
/// [`Error::NoPeak`].
pub fn lorentzian_fit(s: &Spectrum, window: Option<(f64, f64)>) -> Result<LorentzianFit> {
    let select = |lo: f64, hi: f64| -> Vec<usize> {
        s.frequencies
            .iter()
            .enumerate()
            .filter(|(_, f)| **f >= lo && **f <= hi)
            .map(|(i, _)| i)
            .collect()
    };

    let guess_region = match window {
        Some((lo, hi)) => select(lo, hi),
        None => (0..s.frequencies.len()).collect(),
    };
    if guess_region.len() < 8 {
        return Err(Error::TooShort {
            context: "lorentzian_fit",
            required: 8,
            actual: guess_region.len(),
        });
    }

    let peak_idx = *guess_region
        .iter()
        .max_by(|a, b| s.psd[**a].total_cmp(&s.psd[**b]))
        .expect("non-empty region");
    let floor = guess_region
        .iter()
        .map(|&i| s.psd[i])
        .fold(f64::INFINITY, f64::min);
    let peak = s.psd[peak_idx];
    let amp0 = peak - floor;
    if amp0.is_nan() || amp0 <= 1e-12 * peak.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NoPeak);
    }
    let center0 = s.frequencies[peak_idx];

    // Half-maximum crossings either side of the peak bin.
    let half = floor + amp0 / 2.0;
    let mut left = center0 - 2.0 * s.resolution;
    for &i in guess_region.iter().rev() {
        if i < peak_idx && s.psd[i] < half {
            left = s.frequencies[i];
            break;
        }
    }
    let mut right = center0 + 2.0 * s.resolution;
    for &i in &guess_region {
        if i > peak_idx && s.psd[i] < half {
            right = s.frequencies[i];
            break;
        }
    }
    let fwhm0 = (right - left).max(2.0 * s.resolution);

    let fit_region = match window {
        Some(_) => guess_region,
        None => {
            let lo = (center0 - 5.0 * fwhm0).max(s.frequencies[0]);
            let hi =
                (center0 + 5.0 * fwhm0).min(*s.frequencies.last().expect("non-empty spectrum"));
            let region = select(lo, hi);
            if region.len() < 8 {
                return Err(Error::TooShort {
                    context: "lorentzian_fit",
                    required: 8,
                    actual: region.len(),
                });
            }
            region
        }
    };

    let freqs: Vec<f64> = fit_region.iter().map(|&i| s.frequencies[i]).collect();
    let powers: Vec<f64> = fit_region.iter().map(|&i| s.psd[i]).collect();

    let outcome = fit::least_squares(
        &[center0, fwhm0, amp0, floor],
        |p| {
            freqs
                .iter()
                .zip(&powers)
                .map(|(f, y)| lorentz_value(*f, p[0], p[1], p[2], p[3]) - y)
                .collect()
        },
        |p| {
            let (c, w, a) = (p[0], p[1], p[2]);
            let hw = w / 2.0;
            let u = hw * hw;
            DMatrix::from_fn(freqs.len(), 4, |i, j| {
                let df = freqs[i] - c;
                let d = df * df + u;
                match j {
                    0 => a * u * 2.0 * df / (d * d),
                    1 => a * hw * df * df / (d * d),
                    2 => u / d,
                    _ => 1.0,
                }
            })
        },
    )?;

    let amplitude = outcome.params[2];
    if amplitude <= 0.0 {
        return Err(Error::NoPeak);
    }
    Ok(LorentzianFit {
        center: outcome.params[0],
        fwhm: outcome.params[1].abs(),
        amplitude,
        offset: outcome.params[3],
        residual_rms: outcome.residual_rms,
    })
}

/// Nuclear-spin coefficient of the spin-exchange broadening law:
/// `2I(-3 + I(1 + 4I(I+2))) / (3(3 + 4I(I+1)))`. Equals 5/3 for I = 3/2.
pub fn se_linewidth_coefficient(nuclear_spin: f64) -> f64 {
    let i = nuclear_spin;
    2.0 * i * (-3.0 + i * (1.0 + 4.0 * i * (i + 2.0))) / (3.0 * (3.0 + 4.0 * i * (i + 1.0)))
}

/// Spin-exchange contribution to the FWHM linewidth [Hz]:
/// `delta_nu_SE = omega_l^2 * coef(I) / (pi * r_se)`.
///
/// Quadratic in the Larmor frequency and inversely proportional to the
/// collision rate; this is the narrowing that defines the SERF regime.
pub fn se_linewidth(omega_l: f64, r_se: f64, nuclear_spin: f64) -> f64 {
    omega_l * omega_l * se_linewidth_coefficient(nuclear_spin) / (std::f64::consts::PI * r_se)
}

/// Relaxation pair with the transverse rate SE-broadened at `omega_l`:
/// `t2_inv = t1_inv + pi * delta_nu_SE`.
pub fn se_broadened_rates(
    t1_inv: f64,
    omega_l: f64,
    r_se: f64,
    nuclear_spin: f64,
) -> Result<RelaxationRates> {
    let broadening = std::f64::consts::PI * se_linewidth(omega_l, r_se, nuclear_spin);
    RelaxationRates::new(t1_inv, t1_inv + broadening)
}

/// Density and residual linewidth recovered from linewidth-vs-frequency
/// data.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Fitted alkali density [atoms/cm^3].
    pub n_rb: f64,
    /// Fitted residual (frequency-independent) linewidth [Hz].
    pub delta_nu_0: f64,
    /// Parameter covariance for (n_rb, delta_nu_0).
    pub fit_covariance: [[f64; 2]; 2],
}

/// Fits `delta_nu = delta_nu_0 + coef(I) omega_l^2 / (pi sigma_se n v_bar)`
/// over `(n_rb, delta_nu_0)`.
///
/// `points` are `(omega_l [rad/s], delta_nu [Hz])` pairs; the cross-section,
/// thermal velocity and nuclear spin are taken from `p` while its density is
/// ignored (that is the quantity being calibrated).
pub fn density_calibration(points: &[(f64, f64)], p: &PhysicalParams) -> Result<CalibrationResult> {
    p.validate()?;
    if points.len() < 3 {
        return Err(Error::TooShort {
            context: "density_calibration",
            required: 3,
            actual: points.len(),
        });
    }
    let first = points[0].0;
    if points.iter().all(|(w, _)| *w == first) {
        return Err(Error::RankDeficient(
            "all omega_l values identical; density and residual linewidth are degenerate".into(),
        ));
    }
    if points.iter().any(|(w, d)| !w.is_finite() || !d.is_finite()) {
        return Err(Error::NonFinite("calibration point".into()));
    }

    // delta_nu = d0 + k_se * omega^2 / n  with k_se fixed by known constants.
    let k_se =
        se_linewidth_coefficient(p.nuclear_spin) / (std::f64::consts::PI * p.sigma_se * p.v_bar);

    // Linear least squares in (d0, c = k_se/n) for the starting point.
    let m = points.len() as f64;
    let sw2 = points.iter().map(|(w, _)| w * w).sum::<f64>();
    let sw4 = points.iter().map(|(w, _)| w.powi(4)).sum::<f64>();
    let sd = points.iter().map(|(_, d)| d).sum::<f64>();
    let sdw2 = points.iter().map(|(w, d)| d * w * w).sum::<f64>();
    let det = m * sw4 - sw2 * sw2;
    if det.abs() <= 1e-12 * (m * sw4).abs().max(f64::MIN_POSITIVE) {
        return Err(Error::RankDeficient(
            "omega_l values do not span distinct magnitudes".into(),
        ));
    }
    let c0 = (m * sdw2 - sw2 * sd) / det;
    let d0 = (sd - c0 * sw2) / m;
    if c0 <= 0.0 {
        return Err(Error::RankDeficient(
            "no positive quadratic linewidth trend; density unidentifiable".into(),
        ));
    }
    let n0 = k_se / c0;

    let outcome = fit::least_squares(
        &[n0, d0.max(0.0)],
        |prm| {
            points
                .iter()
                .map(|(w, d)| prm[1] + k_se * w * w / prm[0] - d)
                .collect()
        },
        |prm| {
            DMatrix::from_fn(points.len(), 2, |i, j| {
                let w = points[i].0;
                if j == 0 {
                    -k_se * w * w / (prm[0] * prm[0])
                } else {
                    1.0
                }
            })
        },
    )?;

    let n_rb = outcome.params[0];
    if n_rb.is_nan() || n_rb <= 0.0 {
        return Err(Error::RankDeficient(format!(
            "calibrated density is non-positive: {n_rb}"
        )));
    }
    // Small negative residual linewidths are consistent with zero.
    let delta_nu_0 = outcome.params[1].max(0.0);
    let fit_covariance = [
        [outcome.covariance[(0, 0)], outcome.covariance[(0, 1)]],
        [outcome.covariance[(1, 0)], outcome.covariance[(1, 1)]],
    ];
    Ok(CalibrationResult {
        n_rb,
        delta_nu_0,
        fit_covariance,
    })
}
