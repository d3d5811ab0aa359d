//! Monte-Carlo consistency of the filter: the reported covariance must
//! describe the actual estimate-minus-truth statistics, innovations must be
//! white, and the no-information baseline must stay thermal.

use nalgebra::{Matrix3, Vector3};
use serfsim_core::estimator::{kf_predict, kf_run, kf_update, riccati_steady_state, FilterState};
use serfsim_core::physmodel::{
    build_dynamics, DynamicsModel, MeasurementModel, PhysicalParams, RelaxationRates,
};
use serfsim_core::simulator::{
    discretize, measure_photocurrent, simulate_spin, stream_seed, DiscreteModel,
};

fn rubidium_params() -> PhysicalParams {
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

/// Strongly coupled small ensemble; cheap enough for hundreds of runs.
fn toy_setup() -> (DynamicsModel, DiscreteModel, MeasurementModel, f64) {
    let p = rubidium_params();
    let n_atoms = 400.0;
    let rates = RelaxationRates::new(200.0, 200.0).unwrap();
    let omega = 2.0 * std::f64::consts::PI * 500.0;
    let b = Vector3::new(1.0, 1.0, 1.0).normalize() * (omega / p.slowed_gyro());
    let dynamics = build_dynamics(&p, b, &rates, n_atoms).unwrap();
    let m = MeasurementModel {
        g_coupling: 1e-2,
        eta: 1.0,
        photon_flux: 1e6,
        delta: 5e-5,
    };
    let dm = discretize(&dynamics, m.delta).unwrap();
    (dynamics, dm, m, n_atoms)
}

#[test]
fn error_covariance_matches_reported_steady_state() {
    let (dynamics, dm, m, _) = toy_setup();
    let (sigma_ss, _) = riccati_steady_state(&dm, &m, dynamics.q_eq, 200_000).unwrap();

    let runs = 200;
    let n_steps = 3000;
    // Steady-state sample indices separated by several coherence times.
    let probes = [2000usize, 2300, 2600, 2900];
    let mut sum = Matrix3::zeros();
    let mut mean = Vector3::zeros();
    let mut count = 0.0;
    for run_idx in 0..runs {
        let traj = simulate_spin(
            &dm,
            &dynamics.q_eq,
            n_steps,
            stream_seed(3_000 + run_idx, 0),
            None,
        )
        .unwrap();
        let record = measure_photocurrent(&traj, &m, stream_seed(3_000 + run_idx, 1)).unwrap();
        let run = kf_run(&record, &dm, &m, Vector3::zeros(), dynamics.q_eq).unwrap();
        assert!(run.converged_at.is_some(), "run {run_idx} did not converge");
        for &k in &probes {
            let err = run.states[k].estimate - traj.spins[k];
            sum += err * err.transpose();
            mean += err;
            count += 1.0;
        }
    }
    let mean = mean / count;
    let emp = sum / count - mean * mean.transpose();

    let tol = 3.0 / (runs as f64).sqrt();
    for i in 0..3 {
        for j in 0..3 {
            let scale = (sigma_ss[(i, i)] * sigma_ss[(j, j)]).sqrt();
            let dev = (emp[(i, j)] - sigma_ss[(i, j)]).abs() / scale;
            assert!(
                dev < tol,
                "entry ({i},{j}): empirical {} vs {} ({}sigma-scaled dev {dev})",
                emp[(i, j)],
                sigma_ss[(i, j)],
                scale
            );
        }
    }
}

#[test]
fn mean_squared_error_tracks_steady_covariance() {
    let (dynamics, dm, m, _) = toy_setup();
    let (sigma_ss, _) = riccati_steady_state(&dm, &m, dynamics.q_eq, 200_000).unwrap();

    let trials = 120;
    let n_steps = 2500;
    let mut mse = Vector3::zeros();
    for t in 0..trials {
        let traj = simulate_spin(
            &dm,
            &dynamics.q_eq,
            n_steps,
            stream_seed(9_000 + t, 0),
            None,
        )
        .unwrap();
        let record = measure_photocurrent(&traj, &m, stream_seed(9_000 + t, 1)).unwrap();
        let run = kf_run(&record, &dm, &m, Vector3::zeros(), dynamics.q_eq).unwrap();
        mse += serfsim_core::estimator::rms_estimation_error(&run, &traj).unwrap();
    }
    mse /= trials as f64;
    for (i, label) in ["x", "y", "z"].iter().enumerate() {
        let expect = sigma_ss[(i, i)];
        assert!(
            (mse[i] / expect - 1.0).abs() < 0.2,
            "J{label}: MSE {} vs Sigma_ss {}",
            mse[i],
            expect
        );
    }
}

#[test]
fn no_information_error_is_thermal() {
    let (dynamics, dm, mut m, n_atoms) = toy_setup();
    m.g_coupling = 0.0;
    let q = n_atoms / 4.0;

    let trials = 150;
    let n_steps = 600;
    let mut mse = Vector3::zeros();
    for t in 0..trials {
        let traj = simulate_spin(
            &dm,
            &dynamics.q_eq,
            n_steps,
            stream_seed(20_000 + t, 0),
            None,
        )
        .unwrap();
        let record = measure_photocurrent(&traj, &m, stream_seed(20_000 + t, 1)).unwrap();
        let run = kf_run(&record, &dm, &m, Vector3::zeros(), dynamics.q_eq).unwrap();
        mse += serfsim_core::estimator::rms_estimation_error(&run, &traj).unwrap();
    }
    mse /= trials as f64;
    // Without coupling the estimate stays at zero, so the MSE is the
    // thermal per-component variance.
    for i in 0..3 {
        assert!(
            (mse[i] / q - 1.0).abs() < 0.15,
            "component {i}: {} vs thermal {q}",
            mse[i]
        );
    }
}

#[test]
fn normalized_innovations_are_white() {
    let (dynamics, dm, m, _) = toy_setup();
    let traj = simulate_spin(&dm, &dynamics.q_eq, 20_000, stream_seed(77, 0), None).unwrap();
    let record = measure_photocurrent(&traj, &m, stream_seed(77, 1)).unwrap();

    let h = m.observation_row();
    let r = m.noise_power();
    let mut prior = FilterState {
        estimate: Vector3::zeros(),
        covariance: dynamics.q_eq,
        time_index: 0,
    };
    let mut normalized = Vec::with_capacity(record.len());
    for &obs in &record.samples {
        let s = r + (h * prior.covariance * h.transpose())[(0, 0)];
        normalized.push((obs - (h * prior.estimate)[(0, 0)]) / s.sqrt());
        let post = kf_update(&prior, obs, &m).unwrap();
        prior = kf_predict(&post, &dm);
    }

    let tail = &normalized[2000..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(
        mean.abs() < 5.0 / n.sqrt(),
        "innovation mean {mean} not consistent with zero"
    );
    let se = (2.0 / n).sqrt();
    assert!(
        (var - 1.0).abs() < 5.0 * se,
        "innovation variance {var} not consistent with one"
    );
}

#[test]
fn steady_state_is_initialization_independent() {
    let (dynamics, dm, m, _) = toy_setup();
    let (from_thermal, _) = riccati_steady_state(&dm, &m, dynamics.q_eq, 200_000).unwrap();
    let (from_wide, _) = riccati_steady_state(&dm, &m, dynamics.q_eq * 100.0, 200_000).unwrap();
    let rel = (from_thermal - from_wide).norm() / from_thermal.norm();
    assert!(rel < 1e-6, "initialization dependence {rel}");
}
