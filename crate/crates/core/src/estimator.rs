//! Continuous-discrete Kalman filter over the sampled photocurrent.
//!
//! Prediction propagates the posterior through the exact discrete model
//! (`Phi`, `Q_delta`); the update folds in one photocurrent sample through
//! the observation row `H = [0, 0, eta g photon_flux]` with sampled noise
//! power `R_delta = eta photon_flux / delta`. The posterior covariance
//! converges to a steady state `Sigma_ss` whose trace is the total spin
//! variance conditioned on the measurement record.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::physmodel::MeasurementModel;
use crate::simulator::{DiscreteModel, PhotocurrentRecord, SpinTrajectory};

/// Relative covariance change below which a step counts as stationary.
pub const STEADY_STATE_RELATIVE_TOL: f64 = 1e-9;
/// Number of consecutive stationary steps required to declare convergence.
pub const STEADY_STATE_WINDOW: usize = 100;

/// Spin estimate and error covariance at one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub estimate: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub time_index: usize,
}

/// Prediction step: `x -> Phi x`, `Sigma -> Phi Sigma Phi^T + Q_delta`.
pub fn kf_predict(prev: &FilterState, dm: &DiscreteModel) -> FilterState {
    FilterState {
        estimate: dm.phi * prev.estimate,
        covariance: symmetrize(&(dm.phi * prev.covariance * dm.phi.transpose() + dm.q_delta)),
        time_index: prev.time_index + 1,
    }
}

/// Update step: folds one observation into the prior.
///
/// Uses the Joseph-form covariance update
/// `(I - K H) Sigma (I - K H)^T + K R K^T`, algebraically equal to
/// `(I - K H) Sigma` but robust to rounding.
pub fn kf_update(prior: &FilterState, obs: f64, m: &MeasurementModel) -> Result<FilterState> {
    if !obs.is_finite() {
        return Err(Error::NonFinite(format!(
            "observation at index {}",
            prior.time_index
        )));
    }
    let r = m.noise_power();
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "observation noise power must be positive, got {r}"
        )));
    }
    let h = m.observation_row();
    let innovation_var = r + (h * prior.covariance * h.transpose())[(0, 0)];
    let gain: Vector3<f64> = prior.covariance * h.transpose() / innovation_var;
    let innovation = obs - (h * prior.estimate)[(0, 0)];

    let ikh = Matrix3::identity() - gain * h;
    let covariance =
        symmetrize(&(ikh * prior.covariance * ikh.transpose() + gain * r * gain.transpose()));
    Ok(FilterState {
        estimate: prior.estimate + gain * innovation,
        covariance,
        time_index: prior.time_index,
    })
}

/// A complete filter pass: posterior states, the final covariance and the
/// index at which the covariance stopped changing (if it did).
#[derive(Debug, Clone)]
pub struct FilterRun {
    /// Posterior states, one per observation (`k|k`).
    pub states: Vec<FilterState>,
    /// Posterior covariance at the end of the record.
    pub steady_state_covariance: Matrix3<f64>,
    /// Index completing [`STEADY_STATE_WINDOW`] consecutive stationary
    /// steps, or `None` when the record ends before convergence.
    pub converged_at: Option<usize>,
}

fn check_initial_covariance(init_cov: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let sym = symmetrize(init_cov);
    if (init_cov - sym).norm() > 1e-9 * sym.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(
            "initial covariance must be symmetric".into(),
        ));
    }
    let tol = crate::linalg::psd_tolerance(&sym);
    let min_eig = crate::linalg::min_symmetric_eigenvalue(&sym);
    if min_eig < -tol {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min_eig,
            tolerance: tol,
        });
    }
    Ok(sym)
}

/// Runs the alternating predict/update recursion over a record.
pub fn kf_run(
    record: &PhotocurrentRecord,
    dm: &DiscreteModel,
    m: &MeasurementModel,
    init_mean: Vector3<f64>,
    init_cov: Matrix3<f64>,
) -> Result<FilterRun> {
    if record.is_empty() {
        return Err(Error::TooShort {
            context: "kf_run",
            required: 1,
            actual: 0,
        });
    }
    let init_cov = check_initial_covariance(&init_cov)?;

    let mut states = Vec::with_capacity(record.len());
    let mut prior = FilterState {
        estimate: init_mean,
        covariance: init_cov,
        time_index: 0,
    };
    let mut previous_cov: Option<Matrix3<f64>> = None;
    let mut streak = 0usize;
    let mut converged_at = None;

    for (k, &obs) in record.samples.iter().enumerate() {
        let posterior = kf_update(&prior, obs, m)?;
        if let Some(prev) = previous_cov {
            let denom = posterior.covariance.norm().max(f64::MIN_POSITIVE);
            if (posterior.covariance - prev).norm() / denom < STEADY_STATE_RELATIVE_TOL {
                streak += 1;
                if streak >= STEADY_STATE_WINDOW && converged_at.is_none() {
                    converged_at = Some(k);
                }
            } else {
                streak = 0;
            }
        }
        previous_cov = Some(posterior.covariance);
        prior = kf_predict(&posterior, dm);
        states.push(posterior);
    }

    let steady_state_covariance = states.last().expect("record non-empty").covariance;
    Ok(FilterRun {
        states,
        steady_state_covariance,
        converged_at,
    })
}

/// Iterates the covariance recursion alone (no data) until it reaches the
/// steady state of the discrete Riccati map, starting from `init_cov`.
///
/// Returns the fixed-point covariance and the number of iterations taken.
pub fn riccati_steady_state(
    dm: &DiscreteModel,
    m: &MeasurementModel,
    init_cov: Matrix3<f64>,
    max_steps: usize,
) -> Result<(Matrix3<f64>, usize)> {
    let r = m.noise_power();
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "observation noise power must be positive, got {r}"
        )));
    }
    let h = m.observation_row();
    let mut prior = check_initial_covariance(&init_cov)?;
    let mut previous_posterior: Option<Matrix3<f64>> = None;
    let mut streak = 0usize;

    for step in 0..max_steps {
        let innovation_var = r + (h * prior * h.transpose())[(0, 0)];
        let gain: Vector3<f64> = prior * h.transpose() / innovation_var;
        let ikh = Matrix3::identity() - gain * h;
        let posterior = symmetrize(&(ikh * prior * ikh.transpose() + gain * r * gain.transpose()));
        if let Some(prev) = previous_posterior {
            let denom = posterior.norm().max(f64::MIN_POSITIVE);
            if (posterior - prev).norm() / denom < STEADY_STATE_RELATIVE_TOL {
                streak += 1;
                if streak >= STEADY_STATE_WINDOW {
                    return Ok((posterior, step));
                }
            } else {
                streak = 0;
            }
        }
        previous_posterior = Some(posterior);
        prior = symmetrize(&(dm.phi * posterior * dm.phi.transpose() + dm.q_delta));
    }
    Err(Error::NoConvergence {
        context: "riccati_steady_state",
        iterations: max_steps,
    })
}

/// Total variation `Tr[Sigma]`, the scalar summary compared against the
/// thermal and standard-quantum-limit levels.
pub fn total_variation(cov: &Matrix3<f64>) -> f64 {
    cov.trace()
}

/// Per-component mean squared error between posterior estimates and the true
/// trajectory, averaged from the convergence index onward (record midpoint
/// when the run never converged).
pub fn rms_estimation_error(run: &FilterRun, truth: &SpinTrajectory) -> Result<Vector3<f64>> {
    if run.states.len() != truth.len() {
        return Err(Error::Mismatch(format!(
            "filter run has {} states but trajectory has {} samples",
            run.states.len(),
            truth.len()
        )));
    }
    let start = run.converged_at.unwrap_or(run.states.len() / 2);
    let count = run.states.len() - start;
    if count == 0 {
        return Err(Error::TooShort {
            context: "rms_estimation_error",
            required: 1,
            actual: 0,
        });
    }
    let mut acc = Vector3::zeros();
    for (state, spin) in run.states[start..].iter().zip(&truth.spins[start..]) {
        let err = state.estimate - spin;
        acc += err.component_mul(&err);
    }
    Ok(acc / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physmodel::{build_dynamics, PhysicalParams, RelaxationRates};
    use crate::simulator::{discretize, measure_photocurrent, simulate_spin};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params() -> PhysicalParams {
        PhysicalParams {
            n_rb: 3.6e14,
            sigma_se: 1.9e-14,
            v_bar: 4.75e4,
            gamma_e: 2.0 * std::f64::consts::PI * 28.0e9,
            q_slow: 6.0,
            nuclear_spin: 1.5,
            cell_length: 3.0,
            beam_area: 0.049,
        }
    }

    /// Small-scale strongly coupled fixture: 400 "atoms", field along
    /// [1,1,1], isotropic relaxation.
    fn toy_setup() -> (
        crate::physmodel::DynamicsModel,
        DiscreteModel,
        MeasurementModel,
    ) {
        let rates = RelaxationRates::new(200.0, 200.0).unwrap();
        let gamma = params().slowed_gyro();
        let omega = 2.0 * std::f64::consts::PI * 500.0;
        let b = Vector3::new(1.0, 1.0, 1.0).normalize() * (omega / gamma);
        let dyn_model = build_dynamics(&params(), b, &rates, 400.0).unwrap();
        let m = MeasurementModel {
            g_coupling: 1e-2,
            eta: 1.0,
            photon_flux: 1e6,
            delta: 5e-5,
        };
        let dm = discretize(&dyn_model, m.delta).unwrap();
        (dyn_model, dm, m)
    }

    fn unit_measurement() -> MeasurementModel {
        // H = [0,0,1], R_delta = 1.
        MeasurementModel {
            g_coupling: 1.0,
            eta: 1.0,
            photon_flux: 1.0,
            delta: 1.0,
        }
    }

    #[test]
    fn predict_identity_model_is_noop() {
        let dm = DiscreteModel {
            phi: Matrix3::identity(),
            q_delta: Matrix3::zeros(),
            delta: 1.0,
        };
        let state = FilterState {
            estimate: Vector3::new(1.0, -2.0, 3.0),
            covariance: Matrix3::identity() * 4.0,
            time_index: 5,
        };
        let next = kf_predict(&state, &dm);
        assert_eq!(next.estimate, state.estimate);
        assert_eq!(next.covariance, state.covariance);
        assert_eq!(next.time_index, 6);
    }

    #[test]
    fn predict_scalar_analogue() {
        let dm = DiscreteModel {
            phi: Matrix3::identity() * 0.5,
            q_delta: Matrix3::identity() * 0.1,
            delta: 1.0,
        };
        let state = FilterState {
            estimate: Vector3::zeros(),
            covariance: Matrix3::identity(),
            time_index: 0,
        };
        let next = kf_predict(&state, &dm);
        assert_relative_eq!(
            next.covariance,
            Matrix3::identity() * 0.35,
            max_relative = 1e-14
        );
    }

    #[test]
    fn repeated_prediction_converges_to_equilibrium() {
        let (dyn_model, dm, _) = toy_setup();
        let mut state = FilterState {
            estimate: Vector3::zeros(),
            covariance: Matrix3::zeros(),
            time_index: 0,
        };
        for _ in 0..20_000 {
            state = kf_predict(&state, &dm);
        }
        assert!((state.covariance - dyn_model.q_eq).norm() <= 1e-8 * dyn_model.q_eq.norm());
    }

    #[test]
    fn update_zero_coupling_is_noop() {
        let m = MeasurementModel {
            g_coupling: 0.0,
            ..unit_measurement()
        };
        let prior = FilterState {
            estimate: Vector3::new(0.1, 0.2, 0.3),
            covariance: Matrix3::identity() * 2.0,
            time_index: 0,
        };
        let post = kf_update(&prior, 5.0, &m).unwrap();
        assert_eq!(post.estimate, prior.estimate);
        assert_relative_eq!(post.covariance, prior.covariance, max_relative = 1e-14);
    }

    #[test]
    fn update_gain_vanishes_with_noisy_detector() {
        // Scale photon flux up and coupling down so H stays fixed while
        // R_delta grows without bound.
        let prior = FilterState {
            estimate: Vector3::zeros(),
            covariance: Matrix3::identity(),
            time_index: 0,
        };
        let mut previous_shift = f64::INFINITY;
        for scale in [1.0, 1e3, 1e6, 1e9] {
            let m = MeasurementModel {
                g_coupling: 1.0 / scale,
                eta: 1.0,
                photon_flux: scale,
                delta: 1.0,
            };
            let post = kf_update(&prior, 2.0, &m).unwrap();
            let shift = (post.estimate - prior.estimate).norm();
            assert!(shift < previous_shift || shift == 0.0);
            previous_shift = shift;
        }
        assert!(previous_shift < 1e-8);
    }

    #[test]
    fn update_perfect_measurement_pins_z() {
        let m = MeasurementModel {
            g_coupling: 1.0,
            eta: 1.0,
            photon_flux: 1.0,
            delta: 1e12, // R_delta -> 0 with H fixed
        };
        let prior = FilterState {
            estimate: Vector3::zeros(),
            covariance: Matrix3::identity(),
            time_index: 0,
        };
        let post = kf_update(&prior, 2.0, &m).unwrap();
        assert!(post.covariance[(2, 2)] < 1e-11);
        assert_relative_eq!(post.estimate.z, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn update_scalar_analogue() {
        let prior = FilterState {
            estimate: Vector3::zeros(),
            covariance: Matrix3::identity(),
            time_index: 0,
        };
        let post = kf_update(&prior, 2.0, &unit_measurement()).unwrap();
        assert_relative_eq!(post.estimate.z, 1.0, max_relative = 1e-14);
        assert_relative_eq!(post.covariance[(2, 2)], 0.5, max_relative = 1e-14);
        // x and y untouched by a z-only observation with diagonal prior.
        assert_relative_eq!(post.covariance[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(post.covariance[(1, 1)], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn update_rejects_non_finite_observation() {
        let prior = FilterState {
            estimate: Vector3::zeros(),
            covariance: Matrix3::identity(),
            time_index: 0,
        };
        assert!(matches!(
            kf_update(&prior, f64::NAN, &unit_measurement()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn run_rejects_empty_record() {
        let (_, dm, m) = toy_setup();
        let record = PhotocurrentRecord {
            times: vec![],
            samples: vec![],
            seed: 0,
        };
        assert!(matches!(
            kf_run(&record, &dm, &m, Vector3::zeros(), Matrix3::identity()),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn run_without_coupling_stays_thermal() {
        let (dyn_model, dm, mut m) = toy_setup();
        m.g_coupling = 0.0;
        let traj = simulate_spin(&dm, &dyn_model.q_eq, 2000, 5, None).unwrap();
        let record = measure_photocurrent(&traj, &m, 6).unwrap();
        let run = kf_run(&record, &dm, &m, Vector3::zeros(), dyn_model.q_eq).unwrap();
        // q_eq is the exact fixed point of the prediction recursion, so the
        // covariance never moves.
        assert_relative_eq!(
            run.steady_state_covariance,
            dyn_model.q_eq,
            max_relative = 1e-12
        );
        assert!(run.converged_at.is_some());

        // Oracle: prediction-only recursion from the same start.
        let mut cov = dyn_model.q_eq;
        for _ in 0..2000 {
            cov = symmetrize(&(dm.phi * cov * dm.phi.transpose() + dm.q_delta));
        }
        assert_relative_eq!(run.steady_state_covariance, cov, max_relative = 1e-9);
    }

    #[test]
    fn strong_coupling_squeezes_below_sql() {
        let (dyn_model, dm, m) = toy_setup();
        let traj = simulate_spin(&dm, &dyn_model.q_eq, 6000, 21, None).unwrap();
        let record = measure_photocurrent(&traj, &m, 22).unwrap();
        let run = kf_run(&record, &dm, &m, Vector3::zeros(), dyn_model.q_eq).unwrap();
        assert!(run.converged_at.is_some());
        let tr = total_variation(&run.steady_state_covariance);
        let sql = 400.0 / 2.0;
        assert!(tr < sql, "Tr = {tr} should be below SQL = {sql}");

        // Riccati fixed point from two different starts agrees with the run.
        let (ss_a, _) = riccati_steady_state(&dm, &m, dyn_model.q_eq, 200_000).unwrap();
        let (ss_b, _) = riccati_steady_state(&dm, &m, dyn_model.q_eq * 100.0, 200_000).unwrap();
        assert_relative_eq!(ss_a, ss_b, max_relative = 1e-6);
        assert_relative_eq!(run.steady_state_covariance, ss_a, max_relative = 1e-6);
    }

    #[test]
    fn update_never_loses_information() {
        let (dyn_model, dm, m) = toy_setup();
        let traj = simulate_spin(&dm, &dyn_model.q_eq, 3000, 31, None).unwrap();
        let record = measure_photocurrent(&traj, &m, 32).unwrap();

        let mut prior = FilterState {
            estimate: Vector3::zeros(),
            covariance: dyn_model.q_eq,
            time_index: 0,
        };
        for &obs in &record.samples {
            let posterior = kf_update(&prior, obs, &m).unwrap();
            assert!(
                posterior.covariance.trace() <= prior.covariance.trace() * (1.0 + 1e-12),
                "update increased the trace"
            );
            prior = kf_predict(&posterior, &dm);
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd_along_run() {
        let (dyn_model, dm, m) = toy_setup();
        let traj = simulate_spin(&dm, &dyn_model.q_eq, 2000, 41, None).unwrap();
        let record = measure_photocurrent(&traj, &m, 42).unwrap();
        let run = kf_run(&record, &dm, &m, Vector3::zeros(), dyn_model.q_eq).unwrap();
        for state in &run.states {
            let c = &state.covariance;
            assert_relative_eq!(*c, c.transpose(), epsilon = 1e-9 * c.norm());
            let min_eig = crate::linalg::min_symmetric_eigenvalue(c);
            assert!(
                min_eig >= -1e-10 * c.trace(),
                "covariance indefinite: min eig {min_eig}"
            );
        }
    }

    #[test]
    fn initial_covariance_must_be_psd() {
        let (_, dm, m) = toy_setup();
        let record = PhotocurrentRecord {
            times: vec![0.0],
            samples: vec![0.0],
            seed: 0,
        };
        let bad = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(kf_run(&record, &dm, &m, Vector3::zeros(), bad).is_err());
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&Matrix3::identity()), 3.0);
        assert_eq!(
            total_variation(&Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 4.0))),
            7.0
        );
        let q_eq = Matrix3::identity() * (5.3e13 / 4.0);
        assert_relative_eq!(total_variation(&q_eq), 3.975e13, max_relative = 1e-12);
    }

    #[test]
    fn estimation_error_zero_for_perfect_estimates() {
        let truth = SpinTrajectory {
            times: vec![0.0, 1.0, 2.0, 3.0],
            spins: vec![
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(0.0, 0.0, 1.0),
                Vector3::new(1.0, 1.0, 1.0),
            ],
            seed: 0,
        };
        let states = truth
            .spins
            .iter()
            .enumerate()
            .map(|(k, j)| FilterState {
                estimate: *j,
                covariance: Matrix3::zeros(),
                time_index: k,
            })
            .collect();
        let run = FilterRun {
            states,
            steady_state_covariance: Matrix3::zeros(),
            converged_at: Some(0),
        };
        let mse = rms_estimation_error(&run, &truth).unwrap();
        assert_abs_diff_eq!(mse.norm(), 0.0);
    }

    #[test]
    fn estimation_error_rejects_length_mismatch() {
        let truth = SpinTrajectory {
            times: vec![0.0],
            spins: vec![Vector3::zeros()],
            seed: 0,
        };
        let run = FilterRun {
            states: vec![],
            steady_state_covariance: Matrix3::zeros(),
            converged_at: None,
        };
        assert!(matches!(
            rms_estimation_error(&run, &truth),
            Err(Error::Mismatch(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn psd_strategy() -> impl Strategy<Value = Matrix3<f64>> {
            proptest::array::uniform9(-2.0f64..2.0).prop_map(|v| {
                let a = Matrix3::from_row_slice(&v);
                // A A^T + small ridge is symmetric positive definite.
                a * a.transpose() + Matrix3::identity() * 1e-6
            })
        }

        proptest! {
            #[test]
            fn joseph_form_matches_textbook_update(
                cov in psd_strategy(),
                obs in -10.0f64..10.0,
                h_z in 0.01f64..10.0,
                r in 0.01f64..10.0,
            ) {
                // eta = 1, delta = 1: photon_flux = r gives R_delta = r and
                // g_coupling = h_z / r gives H = [0, 0, h_z].
                let m = MeasurementModel {
                    g_coupling: h_z / r,
                    eta: 1.0,
                    photon_flux: r,
                    delta: 1.0,
                };
                prop_assert!((m.observation_row()[2] - h_z).abs() <= 1e-12 * h_z);
                prop_assert!((m.noise_power() - r).abs() <= 1e-12 * r);
                let prior = FilterState {
                    estimate: Vector3::new(0.3, -0.1, 0.2),
                    covariance: cov,
                    time_index: 0,
                };
                let post = kf_update(&prior, obs, &m).unwrap();

                let h = m.observation_row();
                let s = r + (h * cov * h.transpose())[(0, 0)];
                let k: Vector3<f64> = cov * h.transpose() / s;
                let textbook = (Matrix3::identity() - k * h) * cov;
                let scale = cov.norm();
                prop_assert!((post.covariance - symmetrize(&textbook)).norm() <= 1e-9 * scale);
            }
        }
    }
}
