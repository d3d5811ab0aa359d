//! Exact-discretization sampling of the spin Langevin dynamics and the
//! sampled polarimeter photocurrent.
//!
//! A stationary linear-Gaussian process admits an exact one-step transition
//! density N(Phi J, Q_delta) with `Phi = exp(-F delta)` and
//! `Q_delta = Q - Phi Q Phi^T`, so trajectories carry no step-size bias at
//! any sampling interval.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;
use crate::physmodel::{DynamicsModel, MeasurementModel};

/// One-step discretization of a [`DynamicsModel`] at interval `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    /// State-transition matrix `exp(-F delta)`.
    pub phi: Matrix3<f64>,
    /// Process-noise covariance over one step.
    pub q_delta: Matrix3<f64>,
    /// Step length [s].
    pub delta: f64,
}

/// Exact discretization: `phi = exp(-F delta)`, `q_delta = Q - phi Q phi^T`.
pub fn discretize(dynamics: &DynamicsModel, delta: f64) -> Result<DiscreteModel> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "discretization step must be finite and positive, got {delta}"
        )));
    }
    let phi = (-dynamics.f_matrix * delta).exp();
    let q_delta = dynamics.q_eq - phi * dynamics.q_eq * phi.transpose();
    Ok(DiscreteModel {
        phi,
        q_delta: crate::linalg::symmetrize(&q_delta),
        delta,
    })
}

/// A sampled spin path on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinTrajectory {
    pub times: Vec<f64>,
    pub spins: Vec<Vector3<f64>>,
    pub seed: u64,
}

impl SpinTrajectory {
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Grid spacing, when the trajectory has at least two samples.
    pub fn delta(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }
}

/// A sampled photocurrent record aligned with its source trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentRecord {
    pub times: Vec<f64>,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl PhotocurrentRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn delta(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }
}

/// Derives the seed of sub-stream `index` from a base seed (splitmix64).
///
/// Trajectory noise and shot noise use separate sub-streams so either can be
/// regenerated alone; scans assign one pair of sub-streams per scan point.
pub fn stream_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn standard_normal_vector(rng: &mut ChaCha12Rng) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Samples `n_steps` points of the discretized Langevin dynamics.
///
/// The initial spin is `j0` when given, otherwise a draw from N(0, q_eq).
/// Identical seeds give bit-identical trajectories.
pub fn simulate_spin(
    dm: &DiscreteModel,
    q_eq: &Matrix3<f64>,
    n_steps: usize,
    seed: u64,
    j0: Option<Vector3<f64>>,
) -> Result<SpinTrajectory> {
    if n_steps == 0 {
        return Err(Error::TooShort {
            context: "simulate_spin",
            required: 1,
            actual: 0,
        });
    }
    let noise_root = psd_sqrt(&dm.q_delta)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut spins = Vec::with_capacity(n_steps);
    let mut current = match j0 {
        Some(j) => j,
        None => psd_sqrt(q_eq)? * standard_normal_vector(&mut rng),
    };
    spins.push(current);
    for _ in 1..n_steps {
        current = dm.phi * current + noise_root * standard_normal_vector(&mut rng);
        spins.push(current);
    }
    let times = (0..n_steps).map(|k| k as f64 * dm.delta).collect();
    Ok(SpinTrajectory { times, spins, seed })
}

/// Transduces a trajectory into a polarimeter record:
/// `I_k = eta g photon_flux * J_z,k + shot_k` with shot-noise variance
/// `eta photon_flux / delta` per sample.
pub fn measure_photocurrent(
    traj: &SpinTrajectory,
    m: &MeasurementModel,
    seed: u64,
) -> Result<PhotocurrentRecord> {
    m.validate()?;
    if let Some(dt) = traj.delta() {
        if (dt - m.delta).abs() > 1e-9 * m.delta {
            return Err(Error::Mismatch(format!(
                "trajectory step {dt} differs from measurement delta {}",
                m.delta
            )));
        }
    }
    let gain = m.eta * m.g_coupling * m.photon_flux;
    let shot_std = m.noise_power().sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples = traj
        .spins
        .iter()
        .map(|j| {
            let shot: f64 = rng.sample(StandardNormal);
            gain * j.z + shot_std * shot
        })
        .collect();
    Ok(PhotocurrentRecord {
        times: traj.times.clone(),
        samples,
        seed,
    })
}
