//! Small dense-matrix helpers shared across the crate.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Skew-symmetric cross-product matrix: `cross_matrix(b) * v == b.cross(&v)`.
pub fn cross_matrix(b: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -b.z, b.y, b.z, 0.0, -b.x, -b.y, b.x, 0.0)
}

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalue floor used when factoring nearly-PSD covariances.
///
/// Eigenvalues in `[-1e-12 * trace, 0)` are treated as rounding debris and
/// clamped to zero; anything below that is a genuine indefiniteness error.
pub fn psd_tolerance(m: &Matrix3<f64>) -> f64 {
    1e-12 * m.trace().abs().max(f64::MIN_POSITIVE)
}

/// Symmetric square root of a positive-semidefinite matrix.
///
/// Uses a symmetric eigendecomposition with small negative eigenvalues
/// clamped to zero. Fails if an eigenvalue is negative beyond the clamp
/// tolerance.
pub fn psd_sqrt(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let sym = symmetrize(m);
    let tol = psd_tolerance(&sym);
    let eig = sym.symmetric_eigen();
    let mut roots = eig.eigenvalues;
    for v in roots.iter_mut() {
        if *v < -tol {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: *v,
                tolerance: tol,
            });
        }
        *v = v.max(0.0).sqrt();
    }
    let d = Matrix3::from_diagonal(&roots);
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &Matrix3<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_matrix_matches_cross_product() {
        let b = Vector3::new(0.3, -1.2, 2.5);
        let v = Vector3::new(-0.7, 0.1, 0.9);
        assert_relative_eq!(cross_matrix(&b) * v, b.cross(&v), epsilon = 1e-15);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = Matrix3::new(4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0);
        let r = psd_sqrt(&a).unwrap();
        assert_relative_eq!(r * r, a, epsilon = 1e-12);
    }

    #[test]
    fn psd_sqrt_clamps_rounding_noise() {
        let a = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1e-14));
        let r = psd_sqrt(&a).unwrap();
        assert!(r[(2, 2)].abs() < 1e-6);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let a = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -0.1));
        assert!(matches!(
            psd_sqrt(&a),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }
}
