//! Physical parameters and the continuous-time dynamics/measurement models.
//!
//! The collective spin `J` of the probed vapor obeys a linear Langevin
//! equation `dJ = -F J dt + sqrt(sigma) dW` whose drift combines Larmor
//! precession about the bias field with longitudinal/transverse relaxation.
//! The noise strength is tied to the stationary covariance `Q` by the
//! fluctuation-dissipation relation `F Q + Q F^T = sigma`, so an unpolarized
//! ensemble stays thermal under the dynamics.

use nalgebra::{Matrix3, RowVector3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::cross_matrix;

/// Vapor-cell and probe-beam constants.
///
/// Units are cgs for densities and geometry (cm^-3, cm^2, cm, cm/s) and SI
/// for the gyromagnetic ratio (rad/s/T); all rates elsewhere are 1/s and
/// spins are counted in dimensionless quanta of hbar.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Alkali number density [atoms/cm^3].
    pub n_rb: f64,
    /// Spin-exchange collision cross-section [cm^2].
    pub sigma_se: f64,
    /// Relative thermal velocity of colliding atoms [cm/s].
    pub v_bar: f64,
    /// Electron gyromagnetic ratio [rad/s/T].
    pub gamma_e: f64,
    /// Nuclear slowing-down factor (dimensionless).
    pub q_slow: f64,
    /// Nuclear spin I (half-integer).
    pub nuclear_spin: f64,
    /// Cell length along the probe [cm].
    pub cell_length: f64,
    /// Effective beam cross-section [cm^2].
    pub beam_area: f64,
}

impl PhysicalParams {
    /// Checks positivity of every constant and half-integerness of I.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("n_rb", self.n_rb),
            ("sigma_se", self.sigma_se),
            ("v_bar", self.v_bar),
            ("gamma_e", self.gamma_e),
            ("q_slow", self.q_slow),
            ("nuclear_spin", self.nuclear_spin),
            ("cell_length", self.cell_length),
            ("beam_area", self.beam_area),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "physical.{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        let doubled = 2.0 * self.nuclear_spin;
        if (doubled - doubled.round()).abs() > 1e-9 || doubled.round() < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "physical.nuclear_spin must be a positive half-integer, got {}",
                self.nuclear_spin
            )));
        }
        Ok(())
    }

    /// Slowed gyromagnetic ratio `gamma_e / q_slow` [rad/s/T].
    pub fn slowed_gyro(&self) -> f64 {
        self.gamma_e / self.q_slow
    }
}

/// Number of atoms in the probed volume: `n_rb * cell_length * beam_area`.
pub fn atom_number(p: &PhysicalParams) -> f64 {
    p.n_rb * p.cell_length * p.beam_area
}

/// Spin-exchange collision rate `sigma_se * n_rb * v_bar` [1/s].
pub fn se_rate(p: &PhysicalParams) -> f64 {
    p.sigma_se * p.n_rb * p.v_bar
}

/// Longitudinal and transverse relaxation rates [1/s].
///
/// The transverse rate includes every longitudinal channel, so
/// `t2_inv >= t1_inv` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationRates {
    pub t1_inv: f64,
    pub t2_inv: f64,
}

impl RelaxationRates {
    pub fn new(t1_inv: f64, t2_inv: f64) -> Result<Self> {
        if !t1_inv.is_finite() || !t2_inv.is_finite() || t1_inv < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "relaxation rates must be finite and non-negative, got t1_inv={t1_inv}, t2_inv={t2_inv}"
            )));
        }
        if t2_inv < t1_inv {
            return Err(Error::RelaxationOrdering { t1_inv, t2_inv });
        }
        Ok(Self { t1_inv, t2_inv })
    }

    /// Adds an extra relaxation channel of rate `rate` to both components,
    /// or only to the transverse one when `transverse_only` is set.
    pub fn with_added_channel(&self, rate: f64, transverse_only: bool) -> Result<Self> {
        let t1 = if transverse_only {
            self.t1_inv
        } else {
            self.t1_inv + rate
        };
        Self::new(t1, self.t2_inv + rate)
    }
}

/// Continuous-time model of the collective spin: drift, stationary
/// covariance, diffusion strength, bias field and Larmor frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    /// Drift matrix F in `dJ = -F J dt + ...` [1/s].
    pub f_matrix: Matrix3<f64>,
    /// Stationary (thermal) covariance Q [spin^2].
    pub q_eq: Matrix3<f64>,
    /// Diffusion strength `sigma = F Q + Q F^T` [spin^2/s].
    pub sigma_noise: Matrix3<f64>,
    /// Bias magnetic field [T].
    pub b_field: Vector3<f64>,
    /// Larmor angular frequency `gamma |B|` [rad/s].
    pub omega_l: f64,
}

/// Builds the drift, equilibrium covariance and noise strength for a given
/// field, relaxation pair and atom number.
///
/// The drift is `F = gamma [B]_x + R` with `gamma = gamma_e / q_slow`, so
/// that `dJ = -F J dt` reproduces the precession `dJ = gamma J x B dt`
/// together with relaxation at `t1_inv` along the field direction and
/// `t2_inv` transverse to it. The equilibrium covariance of the unpolarized
/// ensemble is isotropic, `Q = (n_atoms/4) I`.
pub fn build_dynamics(
    p: &PhysicalParams,
    b_field: Vector3<f64>,
    rates: &RelaxationRates,
    n_atoms: f64,
) -> Result<DynamicsModel> {
    p.validate()?;
    if rates.t2_inv < rates.t1_inv {
        return Err(Error::RelaxationOrdering {
            t1_inv: rates.t1_inv,
            t2_inv: rates.t2_inv,
        });
    }
    if !n_atoms.is_finite() || n_atoms < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "n_atoms must be finite and non-negative, got {n_atoms}"
        )));
    }
    if !b_field.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("b_field".into()));
    }

    let gamma = p.slowed_gyro();
    let b_norm = b_field.norm();
    let relaxation = if b_norm == 0.0 {
        Matrix3::identity() * rates.t1_inv
    } else {
        let unit = b_field / b_norm;
        Matrix3::identity() * rates.t2_inv
            + (unit * unit.transpose()) * (rates.t1_inv - rates.t2_inv)
    };
    let f_matrix = cross_matrix(&b_field) * gamma + relaxation;
    let q_eq = Matrix3::identity() * (n_atoms / 4.0);
    let sigma_noise = fdt_noise(&f_matrix, &q_eq);
    Ok(DynamicsModel {
        f_matrix,
        q_eq,
        sigma_noise,
        b_field,
        omega_l: gamma * b_norm,
    })
}

/// Fluctuation-dissipation noise strength `F Q + Q F^T`.
///
/// For pure relaxation (`F = R` symmetric) and isotropic `Q` this reduces to
/// `2 R Q`; a purely precessional drift contributes nothing when `Q` is
/// isotropic.
pub fn fdt_noise(f: &Matrix3<f64>, q: &Matrix3<f64>) -> Matrix3<f64> {
    f * q + q * f.transpose()
}

/// Thermal and standard-quantum-limit total variances for `n_atoms` spins:
/// `(TSS, SQL) = (3 n / 4, n / 2)`.
pub fn equilibrium_variation(n_atoms: f64) -> (f64, f64) {
    (0.75 * n_atoms, 0.5 * n_atoms)
}

/// Polarimeter coupling: rotation-to-photocurrent transduction plus the
/// shot-noise floor of the sampled signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    /// Faraday rotation per unit spin [rad/spin].
    pub g_coupling: f64,
    /// Detector quantum efficiency, in (0, 1].
    pub eta: f64,
    /// Probe photon flux [photons/s].
    pub photon_flux: f64,
    /// Sampling interval [s].
    pub delta: f64,
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta <= 0.0 || self.eta > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "measurement.eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "measurement.delta must be finite and positive, got {}",
                self.delta
            )));
        }
        if !self.g_coupling.is_finite() || self.g_coupling < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "measurement.g_coupling must be finite and non-negative, got {}",
                self.g_coupling
            )));
        }
        if !self.photon_flux.is_finite() || self.photon_flux < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "measurement.photon_flux must be finite and non-negative, got {}",
                self.photon_flux
            )));
        }
        Ok(())
    }

    /// Observation row `H = [0, 0, eta g photon_flux]`: only the spin
    /// projection along the probe axis is transduced.
    pub fn observation_row(&self) -> RowVector3<f64> {
        RowVector3::new(0.0, 0.0, self.eta * self.g_coupling * self.photon_flux)
    }

    /// Sampled shot-noise power `R_delta = eta photon_flux / delta`.
    pub fn noise_power(&self) -> f64 {
        self.eta * self.photon_flux / self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    pub(crate) fn rubidium_params() -> PhysicalParams {
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

    /// Rotation by `angle` about `axis`, built from the Rodrigues formula.
    /// Independent oracle for the matrix-exponential path used by the
    /// dynamics.
    fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
        let n = axis.normalize();
        let k = cross_matrix(&n);
        Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
    }

    #[test]
    fn atom_number_headline_volume() {
        let p = rubidium_params();
        let n = atom_number(&p);
        // 3.6e14 * 3 * 0.049 = 5.292e13, quoted as 5.3e13.
        assert_relative_eq!(n, 5.292e13, max_relative = 1e-12);
        assert!((n - 5.3e13).abs() < 0.05e13);
    }

    #[test]
    fn atom_number_zero_density() {
        let mut p = rubidium_params();
        p.n_rb = 0.0;
        assert_eq!(atom_number(&p), 0.0);
    }

    #[test]
    fn atom_number_direct_product() {
        let mut p = rubidium_params();
        p.n_rb = 1.0e14;
        assert_relative_eq!(atom_number(&p), 1.47e13, max_relative = 1e-12);
    }

    #[test]
    fn se_rate_direct_product() {
        let mut p = rubidium_params();
        p.n_rb = 3.6e13;
        // 1.9e-14 * 3.6e13 * 4.75e4 = 3.249e4 /s.
        assert_relative_eq!(se_rate(&p), 3.249e4, max_relative = 1e-12);
    }

    #[test]
    fn se_rate_zero_density_and_linearity() {
        let mut p = rubidium_params();
        p.n_rb = 0.0;
        assert_eq!(se_rate(&p), 0.0);
        let mut a = rubidium_params();
        a.n_rb = 1.0e13;
        let mut b = rubidium_params();
        b.n_rb = 2.0e13;
        assert_relative_eq!(se_rate(&b), 2.0 * se_rate(&a), max_relative = 1e-14);
    }

    #[test]
    fn zero_field_isotropic_relaxation() {
        let p = rubidium_params();
        let rates = RelaxationRates::new(700.0, 700.0).unwrap();
        let dyn_model = build_dynamics(&p, Vector3::zeros(), &rates, 1.0e12).unwrap();
        assert_relative_eq!(
            dyn_model.f_matrix,
            Matrix3::identity() * 700.0,
            epsilon = 1e-12
        );
        assert_eq!(dyn_model.omega_l, 0.0);
    }

    #[test]
    fn rejects_inverted_rates() {
        assert!(matches!(
            RelaxationRates::new(100.0, 50.0),
            Err(Error::RelaxationOrdering { .. })
        ));
    }

    #[test]
    fn drift_eigenvalue_real_parts_are_relaxation_rates() {
        let p = rubidium_params();
        let rates = RelaxationRates::new(300.0, 1200.0).unwrap();
        let b = Vector3::new(1.0, 1.0, 1.0).normalize() * 2.0e-7;
        let dyn_model = build_dynamics(&p, b, &rates, 1.0e13).unwrap();
        let mut real_parts: Vec<f64> = dyn_model
            .f_matrix
            .complex_eigenvalues()
            .iter()
            .map(|ev| ev.re)
            .collect();
        real_parts.sort_by(f64::total_cmp);
        assert_relative_eq!(real_parts[0], 300.0, max_relative = 1e-8);
        assert_relative_eq!(real_parts[1], 1200.0, max_relative = 1e-8);
        assert_relative_eq!(real_parts[2], 1200.0, max_relative = 1e-8);
    }

    #[test]
    fn third_larmor_cycle_permutes_axes() {
        // With B along [1,1,1] and isotropic relaxation, a third of a Larmor
        // cycle maps each coordinate axis onto another, up to the scalar
        // relaxation envelope. The oracle is the Rodrigues rotation:
        // exp(-F t) = exp(-G t) * R(-omega_l t, b_hat) for t1 = t2 = G.
        let p = rubidium_params();
        let g = 150.0;
        let rates = RelaxationRates::new(g, g).unwrap();
        let b = Vector3::new(1.0, 1.0, 1.0) * 1.2e-7;
        let dyn_model = build_dynamics(&p, b, &rates, 1.0e13).unwrap();
        let t_third = (2.0 * std::f64::consts::PI / dyn_model.omega_l) / 3.0;
        let propagator = (-dyn_model.f_matrix * t_third).exp();

        let expected = rodrigues(&b, -dyn_model.omega_l * t_third) * (-g * t_third).exp();
        assert_relative_eq!(propagator, expected, epsilon = 1e-10);

        // The rotation part is a cyclic permutation of the axes.
        let envelope = (-g * t_third).exp();
        let rot = propagator / envelope;
        let images: Vec<Vector3<f64>> = (0..3)
            .map(|i| {
                let mut e = Vector3::zeros();
                e[i] = 1.0;
                rot * e
            })
            .collect();
        for (i, img) in images.iter().enumerate() {
            let target = img.iamax();
            assert_ne!(target, i, "axis {i} must move to a different axis");
            assert_abs_diff_eq!(img[target], 1.0, epsilon = 1e-9);
            for k in 0..3 {
                if k != target {
                    assert_abs_diff_eq!(img[k], 0.0, epsilon = 1e-9);
                }
            }
        }
        // Cyclic: following the permutation three times returns to start.
        let perm: Vec<usize> = images.iter().map(|img| img.iamax()).collect();
        assert_eq!(perm[perm[perm[0]]], 0);
        assert_ne!(perm[perm[0]], 0);
    }

    #[test]
    fn pure_precession_is_orthogonal() {
        let p = rubidium_params();
        let rates = RelaxationRates::new(0.0, 0.0).unwrap();
        let b = Vector3::new(0.3, -0.4, 0.8) * 1e-7;
        let dyn_model = build_dynamics(&p, b, &rates, 4.0).unwrap();
        let t = 3.7e-4;
        let u = (-dyn_model.f_matrix * t).exp();
        assert_relative_eq!(u * u.transpose(), Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn fdt_scalar_case() {
        let f = Matrix3::identity() * 2.5;
        let q = Matrix3::identity() * 0.8;
        assert_relative_eq!(
            fdt_noise(&f, &q),
            Matrix3::identity() * (2.0 * 2.5 * 0.8),
            epsilon = 1e-14
        );
    }

    #[test]
    fn fdt_precession_injects_no_noise() {
        let b = Vector3::new(0.1, 0.7, -0.3);
        let f = cross_matrix(&b) * 1.0e4;
        let q = Matrix3::identity() * 5.0;
        assert_abs_diff_eq!(fdt_noise(&f, &q).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn fdt_generic_elementwise_oracle() {
        let f = Matrix3::new(1.0, 0.2, -0.5, 0.3, 2.0, 0.1, -0.7, 0.4, 3.0);
        let q = Matrix3::new(2.0, 0.1, 0.0, 0.1, 1.5, -0.2, 0.0, -0.2, 1.0);
        let got = fdt_noise(&f, &q);
        // Direct index arithmetic, independent of the matrix operators.
        for i in 0..3 {
            for j in 0..3 {
                let mut expect = 0.0;
                for k in 0..3 {
                    expect += f[(i, k)] * q[(k, j)] + q[(i, k)] * f[(j, k)];
                }
                assert_relative_eq!(got[(i, j)], expect, max_relative = 1e-13);
            }
        }
        assert_relative_eq!(got, got.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn dynamics_noise_is_self_consistent() {
        let p = rubidium_params();
        let rates = RelaxationRates::new(250.0, 900.0).unwrap();
        let b = Vector3::new(1.0, 1.0, 1.0) * 1e-7;
        let dyn_model = build_dynamics(&p, b, &rates, 5.3e13).unwrap();
        assert_eq!(
            fdt_noise(&dyn_model.f_matrix, &dyn_model.q_eq),
            dyn_model.sigma_noise
        );
        let tol = crate::linalg::psd_tolerance(&dyn_model.sigma_noise);
        assert!(crate::linalg::min_symmetric_eigenvalue(&dyn_model.sigma_noise) >= -tol);
    }

    #[test]
    fn equilibrium_variation_values() {
        let (tss, sql) = equilibrium_variation(5.3e13);
        assert_relative_eq!(tss, 3.975e13, max_relative = 1e-12);
        assert_relative_eq!(sql, 2.65e13, max_relative = 1e-12);
        assert_eq!(equilibrium_variation(0.0), (0.0, 0.0));
        assert_eq!(equilibrium_variation(4.0), (3.0, 2.0));
    }

    #[test]
    fn tss_equals_trace_of_equilibrium_covariance() {
        let p = rubidium_params();
        let rates = RelaxationRates::new(100.0, 100.0).unwrap();
        let n = 5.3e13;
        let dyn_model = build_dynamics(&p, Vector3::zeros(), &rates, n).unwrap();
        let (tss, _) = equilibrium_variation(n);
        assert_relative_eq!(dyn_model.q_eq.trace(), tss, max_relative = 1e-14);
    }

    #[test]
    fn observation_row_and_noise_power() {
        let m = MeasurementModel {
            g_coupling: 4.0e-13,
            eta: 0.8,
            photon_flux: 4.0e15,
            delta: 5.0e-6,
        };
        m.validate().unwrap();
        let h = m.observation_row();
        assert_eq!(h[0], 0.0);
        assert_eq!(h[1], 0.0);
        assert_relative_eq!(h[2], 0.8 * 4.0e-13 * 4.0e15, max_relative = 1e-15);
        assert_relative_eq!(m.noise_power(), 0.8 * 4.0e15 / 5.0e-6, max_relative = 1e-15);
    }

    #[test]
    fn measurement_model_rejects_bad_eta() {
        let mut m = MeasurementModel {
            g_coupling: 1e-13,
            eta: 1.2,
            photon_flux: 1e15,
            delta: 5e-6,
        };
        assert!(m.validate().is_err());
        m.eta = 0.0;
        assert!(m.validate().is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn rotation_strategy() -> impl Strategy<Value = Matrix3<f64>> {
            (
                -1.0f64..1.0,
                -1.0f64..1.0,
                -1.0f64..1.0,
                0.0f64..std::f64::consts::TAU,
            )
                .prop_filter_map("axis too small", |(x, y, z, angle)| {
                    let axis = Vector3::new(x, y, z);
                    (axis.norm() > 1e-3).then(|| rodrigues(&axis, angle))
                })
        }

        proptest! {
            #[test]
            fn build_dynamics_is_basis_covariant(
                rot in rotation_strategy(),
                bx in -1.0f64..1.0,
                by in -1.0f64..1.0,
                bz in -1.0f64..1.0,
                t1 in 0.0f64..1e3,
                extra in 0.0f64..1e3,
            ) {
                let p = rubidium_params();
                let rates = RelaxationRates::new(t1, t1 + extra).unwrap();
                let b = Vector3::new(bx, by, bz) * 1e-7;
                let base = build_dynamics(&p, b, &rates, 1e10).unwrap();
                let rotated = build_dynamics(&p, rot * b, &rates, 1e10).unwrap();
                let conjugated = rot * base.f_matrix * rot.transpose();
                let scale = base.f_matrix.norm().max(1.0);
                prop_assert!((rotated.f_matrix - conjugated).norm() <= 1e-9 * scale);
            }

            #[test]
            fn sigma_noise_is_symmetric_psd(
                bx in -1.0f64..1.0,
                by in -1.0f64..1.0,
                bz in -1.0f64..1.0,
                t1 in 0.0f64..1e4,
                extra in 0.0f64..1e4,
                n_atoms in 1.0f64..1e14,
            ) {
                let p = rubidium_params();
                let rates = RelaxationRates::new(t1, t1 + extra).unwrap();
                let b = Vector3::new(bx, by, bz) * 1e-7;
                let model = build_dynamics(&p, b, &rates, n_atoms).unwrap();
                let asym = (model.sigma_noise - model.sigma_noise.transpose()).norm();
                prop_assert!(asym <= 1e-9 * model.sigma_noise.norm().max(1e-30));
                let tol = crate::linalg::psd_tolerance(&model.sigma_noise)
                    .max(1e-12 * model.sigma_noise.trace().abs());
                prop_assert!(
                    crate::linalg::min_symmetric_eigenvalue(&model.sigma_noise) >= -tol
                );
            }

            #[test]
            fn tss_sql_ratio_is_three_halves(n in 1.0f64..1e15) {
                let (tss, sql) = equilibrium_variation(n);
                prop_assert!((tss / sql - 1.5).abs() < 1e-12);
            }
        }
    }
}
