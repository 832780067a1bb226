//! Sandwich (robust) covariance of an M-estimator from per-observation
//! log-likelihood contributions, with derivatives by central differences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{cbrt, fabs};

use crate::data::DataSample;
use crate::dist::FgParams;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Condition numbers above this count as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Finite-difference step for a parameter value.
pub fn fd_step(value: f64) -> f64 {
    cbrt(f64::EPSILON) * fabs(value).max(1.0)
}

/// `A⁻¹ B A⁻ᵀ / n` where `A = -(1/n) Σ ∇²ℓ_i` and `B = (1/n) Σ ∇ℓ_i ∇ℓ_iᵀ`.
///
/// `loglik_i(i, params)` is the log-likelihood contribution of observation
/// `i`. Gradients and Hessians use central differences with step
/// [`fd_step`]; the result is symmetrized.
pub fn sandwich<F: Fn(usize, &[f64]) -> f64>(n: usize, params: &[f64], loglik_i: F) -> Result<Matrix> {
    let k = params.len();
    if n == 0 {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let h: Vec<f64> = params.iter().map(|&v| fd_step(v)).collect();
    let mut a = Matrix::zeros(k, k);
    let mut b = Matrix::zeros(k, k);
    let mut work = params.to_vec();
    let mut score = vec![0.0; k];
    let mut plus = vec![0.0; k];
    let mut minus = vec![0.0; k];
    for i in 0..n {
        let f0 = loglik_i(i, params);
        for j in 0..k {
            work[j] = params[j] + h[j];
            plus[j] = loglik_i(i, &work);
            work[j] = params[j] - h[j];
            minus[j] = loglik_i(i, &work);
            work[j] = params[j];
            score[j] = (plus[j] - minus[j]) / (2.0 * h[j]);
            a[(j, j)] -= (plus[j] - 2.0 * f0 + minus[j]) / (h[j] * h[j]);
        }
        for j in 0..k {
            for l in 0..j {
                let mut eval = |sj: f64, sl: f64| {
                    work[j] = params[j] + sj * h[j];
                    work[l] = params[l] + sl * h[l];
                    let v = loglik_i(i, &work);
                    work[j] = params[j];
                    work[l] = params[l];
                    v
                };
                let d = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[j] * h[l]);
                a[(j, l)] -= d;
                a[(l, j)] -= d;
            }
        }
        for j in 0..k {
            for l in 0..k {
                b[(j, l)] += score[j] * score[l];
            }
        }
    }
    let nf = n as f64;
    a.scale(1.0 / nf);
    b.scale(1.0 / nf);
    if a.as_slice().iter().any(|v| !v.is_finite()) || b.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite derivative in sandwich estimator".into()));
    }
    let cond = a.condition_number();
    if !(cond < MAX_CONDITION) {
        return Err(Error::Singular { cond });
    }
    let a_inv = a.inverse().ok_or(Error::Singular { cond })?;
    let mut v = a_inv.matmul(&b).matmul(&a_inv.transpose());
    v.scale(1.0 / nf);
    v.symmetrize();
    Ok(v)
}

/// Sandwich covariance of the FG maximum likelihood estimate, parameter
/// order `(theta, sigma1, sigma2, w)`.
///
/// Fails with [`Error::Boundary`] when a finite-difference stencil would
/// leave the parameter space (`w` within one step of 0 or 1, or a scale
/// smaller than its step).
pub fn sandwich_vcov(y: &DataSample, mle: &FgParams) -> Result<Matrix> {
    check_interior(mle)?;
    let values = y.values();
    let params = mle.to_array();
    sandwich(values.len(), &params, |i, p| match FgParams::from_array([p[0], p[1], p[2], p[3]]) {
        Ok(q) => q.logpdf(values[i]),
        Err(_) => f64::NAN,
    })
}

pub(crate) fn check_interior(mle: &FgParams) -> Result<()> {
    let hw = fd_step(mle.w());
    if mle.w() <= hw || mle.w() >= 1.0 - hw {
        return Err(Error::Boundary(format!("w = {}", mle.w())));
    }
    for (name, s) in [("sigma1", mle.sigma1()), ("sigma2", mle.sigma2())] {
        if s <= 2.0 * fd_step(s) {
            return Err(Error::Boundary(format!("{name} = {s}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn normal_mean_sandwich_matches_classical() {
        // For the normal mean with known unit variance, A = 1 and
        // B = mean((y - mu)^2), so V = B / n.
        let y: Vec<f64> = (0..40).map(|i| ((i * 7919) % 97) as f64 / 10.0).collect();
        let mu = y.iter().sum::<f64>() / y.len() as f64;
        let v = sandwich(y.len(), &[mu], |i, p| -0.5 * (y[i] - p[0]) * (y[i] - p[0])).unwrap();
        let b = y.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / y.len() as f64;
        assert!((v[(0, 0)] - b / y.len() as f64).abs() < 1e-6 * b);
    }

    #[test]
    fn boundary_weight_rejected() {
        let y = DataSample::from_values(alloc::vec![0.0, 1.0, 2.0, -1.0, 0.5]).unwrap();
        let p = FgParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(sandwich_vcov(&y, &p), Err(Error::Boundary(_))));
    }

    #[test]
    fn flat_likelihood_is_singular() {
        let r = sandwich(10, &[1.0, 2.0], |_, p| -p[0] * p[0]);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }
}
