//! Squeezing/entanglement witnesses and gradient-induced singlet decay.
//!
//! The filter's steady-state covariance is turned into the squeezing
//! parameter `xi^2 = Tr[Sigma] / (N_A/2)`; values below one certify at least
//! `(1 - xi^2) N_A` entangled atoms. Applying a field gradient dephases
//! spatially separated singlet pairs at `Omega = gamma B' dz`, which appears
//! as an extra relaxation channel and a faster decay of the conditioned
//! variance once probing stops.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::estimator::riccati_steady_state;
use crate::fit;
use crate::linalg::symmetrize;
use crate::physmodel::{
    build_dynamics, equilibrium_variation, MeasurementModel, PhysicalParams, RelaxationRates,
};
use crate::simulator::discretize;

/// Witness summary derived from a covariance matrix and the atom number.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    /// `Tr[Sigma]` [spin^2].
    pub total_variation: f64,
    /// `total_variation / (n_atoms / 2)`.
    pub xi_squared: f64,
    /// `-10 log10(xi^2)` [dB]; positive means squeezing.
    pub squeezing_db: f64,
    /// `max(0, (1 - xi^2) n_atoms)` [atoms].
    pub entangled_lower_bound: f64,
    /// Diagonal of the covariance [spin^2].
    pub per_component_variance: [f64; 3],
}

/// Squeezing parameter `xi^2 = total_variation / SQL` with `SQL = n/2`.
pub fn squeezing_parameter(total_variation: f64, n_atoms: f64) -> f64 {
    total_variation / (n_atoms / 2.0)
}

/// Minimum number of entangled atoms certified by `xi^2 < 1`, clamped at
/// zero above the standard quantum limit.
pub fn entangled_bound(xi_squared: f64, n_atoms: f64) -> f64 {
    ((1.0 - xi_squared) * n_atoms).max(0.0)
}

/// Builds the full witness summary for a covariance.
pub fn witness_report(cov: &Matrix3<f64>, n_atoms: f64) -> WitnessReport {
    let per_component_variance = [cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]];
    let total_variation: f64 = per_component_variance.iter().sum();
    let xi_squared = squeezing_parameter(total_variation, n_atoms);
    let squeezing_db = if xi_squared > 0.0 {
        -10.0 * xi_squared.log10()
    } else {
        f64::INFINITY
    };
    WitnessReport {
        total_variation,
        xi_squared,
        squeezing_db,
        entangled_lower_bound: entangled_bound(xi_squared, n_atoms),
        per_component_variance,
    }
}

/// Singlet-triplet conversion frequency `Omega = gamma B' dz` [rad/s] for a
/// pair separated by `dz` in a gradient `B'`.
pub fn gradient_omega(gamma: f64, b_prime: f64, delta_z: f64) -> f64 {
    gamma * b_prime * delta_z
}

/// R.m.s. pair separation `L / sqrt(24)` [m] for uniformly distributed
/// partners in a cell of length `cell_length` [cm].
pub fn rms_pair_separation(cell_length_cm: f64) -> f64 {
    cell_length_cm * 1e-2 / 24.0_f64.sqrt()
}

/// Separation scale inferred from an observed extra relaxation rate:
/// `delta_z = added_rate / (gamma B')` [m].
pub fn singlet_separation_estimate(added_rate: f64, gamma: f64, b_prime: f64) -> Result<f64> {
    if b_prime <= 0.0 || gamma <= 0.0 || b_prime.is_nan() || gamma.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "singlet_separation_estimate needs gamma > 0 and b_prime > 0, got gamma={gamma}, b_prime={b_prime}"
        )));
    }
    Ok(added_rate / (gamma * b_prime))
}

/// Exponential approach fitted to a variance series.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Rate of the exponential approach to the asymptote [1/s].
    pub rate: f64,
    /// Standard error of the rate; infinite for a constant series.
    pub uncertainty: f64,
}

/// Least-squares fit of `V(t) = asymptote - (asymptote - V0) exp(-r t)` over
/// `(V0, r)`, with the asymptote held fixed.
///
/// A constant series returns rate zero with infinite uncertainty.
pub fn decay_fit(series: &[(f64, f64)], asymptote: f64) -> Result<DecayFit> {
    if series.len() < 4 {
        return Err(Error::TooShort {
            context: "decay_fit",
            required: 4,
            actual: series.len(),
        });
    }
    if !asymptote.is_finite() || asymptote <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "decay asymptote must be positive and finite, got {asymptote}"
        )));
    }
    if series.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
        return Err(Error::NonFinite("decay series".into()));
    }

    let values: Vec<f64> = series.iter().map(|(_, v)| *v).collect();
    let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if vmax - vmin <= 1e-12 * vmax.abs().max(vmin.abs()).max(f64::MIN_POSITIVE) {
        return Ok(DecayFit {
            rate: 0.0,
            uncertainty: f64::INFINITY,
        });
    }

    let t0 = series[0].0;
    let v0_init = series[0].1;
    let gap0 = asymptote - v0_init;
    // Rate guess from the time at which the gap to the asymptote halves.
    let t_span = series.last().expect("len >= 4").0 - t0;
    let mut r_init = 1.0 / t_span.max(f64::MIN_POSITIVE);
    for (t, v) in series {
        if (asymptote - v).abs() <= gap0.abs() / 2.0 && *t > t0 {
            r_init = std::f64::consts::LN_2 / (t - t0);
            break;
        }
    }

    let outcome = fit::least_squares(
        &[v0_init, r_init],
        |p| {
            series
                .iter()
                .map(|(t, v)| asymptote - (asymptote - p[0]) * (-p[1] * (t - t0)).exp() - v)
                .collect()
        },
        |p| {
            nalgebra::DMatrix::from_fn(series.len(), 2, |i, j| {
                let dt = series[i].0 - t0;
                let e = (-p[1] * dt).exp();
                if j == 0 {
                    e
                } else {
                    (asymptote - p[0]) * dt * e
                }
            })
        },
    )?;
    Ok(DecayFit {
        rate: outcome.params[1],
        uncertainty: outcome.covariance[(1, 1)].max(0.0).sqrt(),
    })
}

/// Which gyromagnetic ratio sets the gradient dephasing rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GyroChoice {
    /// Slowed ratio `gamma_e / q_slow` (matches the precession dynamics).
    Slowed,
    /// Bare electron ratio `gamma_e`.
    Bare,
}

impl GyroChoice {
    pub fn value(&self, p: &PhysicalParams) -> f64 {
        match self {
            GyroChoice::Slowed => p.slowed_gyro(),
            GyroChoice::Bare => p.gamma_e,
        }
    }
}

/// Knobs for [`gradient_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientScanConfig {
    /// Pair-separation scale entering the dephasing rate [m]; `None` uses
    /// the cell's r.m.s. separation.
    pub delta_z: Option<f64>,
    /// Gyromagnetic ratio convention for the dephasing rate.
    pub gyro: GyroChoice,
    /// Restrict the extra channel to components transverse to the field.
    pub anisotropic: bool,
    /// Number of post-measurement propagation steps in the decay series.
    pub decay_steps: usize,
    /// Iteration budget for the steady-state covariance.
    pub max_riccati_steps: usize,
}

impl Default for GradientScanConfig {
    fn default() -> Self {
        Self {
            delta_z: None,
            gyro: GyroChoice::Slowed,
            anisotropic: false,
            decay_steps: 800,
            max_riccati_steps: 400_000,
        }
    }
}

/// One gradient point: the dephasing channel, the fitted decay and the
/// underlying series.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientScanResult {
    /// Applied gradient [T/m].
    pub gradient: f64,
    /// Dephasing rate `gamma B' delta_z` injected into the model [1/s].
    pub delta_omega: f64,
    /// Fitted variance decay rate [1/s].
    pub decay_rate: f64,
    /// Standard error of the fitted rate [1/s].
    pub rate_uncertainty: f64,
    /// `(time since probing stopped, Tr[Sigma])` pairs.
    pub variance_series: Vec<(f64, f64)>,
    /// Diagonal of the measurement steady-state covariance [spin^2].
    pub steady_variance: [f64; 3],
}

/// Scans gradients: for each `B'` the dephasing rate is added to the
/// relaxation, the filter covariance is driven to its steady state with the
/// gradient on, and the conditioned variance is then propagated without
/// updates and fitted with [`decay_fit`] against the thermal asymptote.
pub fn gradient_scan(
    p: &PhysicalParams,
    b_field: Vector3<f64>,
    base_rates: &RelaxationRates,
    m: &MeasurementModel,
    n_atoms: f64,
    gradients: &[f64],
    cfg: &GradientScanConfig,
) -> Result<Vec<GradientScanResult>> {
    if gradients.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidParameter(
            "gradients must be finite and non-negative".into(),
        ));
    }
    gradients
        .iter()
        .map(|&b_prime| gradient_point(p, b_field, base_rates, m, n_atoms, b_prime, cfg))
        .collect()
}

/// Computes a single gradient point; see [`gradient_scan`].
pub fn gradient_point(
    p: &PhysicalParams,
    b_field: Vector3<f64>,
    base_rates: &RelaxationRates,
    m: &MeasurementModel,
    n_atoms: f64,
    b_prime: f64,
    cfg: &GradientScanConfig,
) -> Result<GradientScanResult> {
    let delta_z = cfg
        .delta_z
        .unwrap_or_else(|| rms_pair_separation(p.cell_length));
    let delta_omega = gradient_omega(cfg.gyro.value(p), b_prime, delta_z);
    let rates = base_rates.with_added_channel(delta_omega, cfg.anisotropic)?;
    let dynamics = build_dynamics(p, b_field, &rates, n_atoms)?;
    let dm = discretize(&dynamics, m.delta)?;
    let (steady, _) = riccati_steady_state(&dm, m, dynamics.q_eq, cfg.max_riccati_steps)?;

    // Probing stops: propagate the conditioned covariance freely.
    let mut cov = steady;
    let mut variance_series = Vec::with_capacity(cfg.decay_steps + 1);
    variance_series.push((0.0, cov.trace()));
    for k in 1..=cfg.decay_steps {
        cov = symmetrize(&(dm.phi * cov * dm.phi.transpose() + dm.q_delta));
        variance_series.push((k as f64 * m.delta, cov.trace()));
    }

    let (tss, _) = equilibrium_variation(n_atoms);
    let fit = decay_fit(&variance_series, tss)?;
    Ok(GradientScanResult {
        gradient: b_prime,
        delta_omega,
        decay_rate: fit.rate,
        rate_uncertainty: fit.uncertainty,
        variance_series,
        steady_variance: [steady[(0, 0)], steady[(1, 1)], steady[(2, 2)]],
    })
}
