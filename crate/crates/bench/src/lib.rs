//! Shared fixtures for the pipeline benchmarks.

use nalgebra::Vector3;
use serfsim_core::physmodel::{
    build_dynamics, DynamicsModel, MeasurementModel, PhysicalParams, RelaxationRates,
};

pub fn rubidium_params() -> PhysicalParams {
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

/// Headline operating point: 1 kHz Larmor frequency along [1,1,1].
pub fn headline_setup() -> (DynamicsModel, MeasurementModel) {
    let p = rubidium_params();
    let rates = RelaxationRates::new(500.0, 702.0).unwrap();
    let omega = 2.0 * std::f64::consts::PI * 1.0e3;
    let b = Vector3::new(1.0, 1.0, 1.0).normalize() * (omega / p.slowed_gyro());
    let n_atoms = serfsim_core::physmodel::atom_number(&p);
    let dynamics = build_dynamics(&p, b, &rates, n_atoms).unwrap();
    let m = MeasurementModel {
        g_coupling: 8.0e-13,
        eta: 0.8,
        photon_flux: 4.0e15,
        delta: 5.0e-6,
    };
    (dynamics, m)
}
