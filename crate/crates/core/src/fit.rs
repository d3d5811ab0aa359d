//! Damped Gauss-Newton least squares with analytic Jacobians.
//!
//! One small deterministic solver backs every fit in the crate: Lorentzian
//! line fitting, the density calibration and exponential decay fits. All
//! fits are bounded at 200 iterations with a relative gradient tolerance of
//! 1e-10 and carry their parameter covariance `sigma^2 (J^T J)^{-1}` out.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const GRADIENT_TOL: f64 = 1e-10;
pub const STEP_TOL: f64 = 1e-14;

/// Converged fit: parameters, their covariance and residual diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    /// `sigma_hat^2 (J^T J)^{-1}` evaluated at the optimum.
    pub covariance: DMatrix<f64>,
    /// Root mean square residual.
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Minimizes `0.5 ||residual(x)||^2` starting at `x0`.
///
/// `jacobian` returns the m-by-n matrix of `d residual_i / d x_j`.
/// Deterministic: identical inputs produce identical outputs.
pub fn least_squares<R, J>(x0: &[f64], residual: R, jacobian: J) -> Result<FitOutcome>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut r = DVector::from_vec(residual(x.as_slice()));
    let m = r.len();
    if m < n {
        return Err(Error::RankDeficient(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let jac = jacobian(x.as_slice());
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;

        let scale = cost.max(f64::MIN_POSITIVE);
        if grad.amax() <= GRADIENT_TOL * scale.max(1.0) {
            return finalize(x, &jtj, cost, m, n, iterations);
        }

        // Damped normal equations; the damping falls after accepted steps
        // and grows after rejected ones.
        let mut stepped = false;
        for _ in 0..25 {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
            }
            let Some(chol) = Cholesky::new(damped) else {
                lambda = (lambda * 10.0).min(1e14);
                continue;
            };
            let step = chol.solve(&(-&grad));
            let candidate = &x + &step;
            let r_new = DVector::from_vec(residual(candidate.as_slice()));
            if r_new.len() != m {
                return Err(Error::Mismatch("residual length changed during fit".into()));
            }
            let cost_new = 0.5 * r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                let rel_step = step.norm() / x.norm().max(1.0);
                x = candidate;
                r = r_new;
                cost = cost_new;
                lambda = (lambda * 0.1).max(1e-14);
                stepped = true;
                if rel_step <= STEP_TOL {
                    let jac = jacobian(x.as_slice());
                    let jtj = jac.transpose() * &jac;
                    return finalize(x, &jtj, cost, m, n, iterations);
                }
                break;
            }
            lambda = (lambda * 10.0).min(1e14);
        }
        if !stepped {
            // Damping saturated without progress: treat the current point
            // as the (possibly flat) optimum.
            return finalize(x, &jtj, cost, m, n, iterations);
        }
    }
    Err(Error::NoConvergence {
        context: "least_squares",
        iterations: MAX_ITERATIONS,
    })
}

fn finalize(
    x: DVector<f64>,
    jtj: &DMatrix<f64>,
    cost: f64,
    m: usize,
    n: usize,
    iterations: usize,
) -> Result<FitOutcome> {
    let residual_rms = (2.0 * cost / m as f64).sqrt();
    let sigma2 = if m > n {
        2.0 * cost / (m - n) as f64
    } else {
        0.0
    };
    let covariance = match Cholesky::new(jtj.clone()) {
        Some(chol) => chol.inverse() * sigma2,
        None => DMatrix::from_element(n, n, f64::INFINITY),
    };
    Ok(FitOutcome {
        params: x.as_slice().to_vec(),
        covariance,
        residual_rms,
        iterations,
    })
}
