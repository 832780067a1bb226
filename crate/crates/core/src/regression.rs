//! Modal linear regression with FG errors, plus the normal mean-regression
//! baseline.
//!
//! The model puts the conditional *mode* at the linear predictor:
//! `y_i ~ FG(x_iᵀβ, sigma1, sigma2, w)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, fabs, log, sqrt};

use crate::data::shorth_midpoint;
use crate::dist::FgParams;
use crate::ecm::{information_criteria, EcmConfig, LocationModel, State};
use crate::linalg::Matrix;
use crate::mcmc::{McmcConfig, PosteriorDraws, PriorSpec, Sampler};
use crate::sandwich::{check_interior, sandwich};
use crate::special::student_t_quantile;
use crate::{Error, Result};

const Z975: f64 = 1.959_963_984_540_054;

/// Validated regression problem. The first design column is the intercept.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionSpec {
    design: Matrix,
    response: Vec<f64>,
    coef_names: Vec<String>,
}

impl RegressionSpec {
    /// Checks shapes, finiteness, the intercept column, `n > p + 3` and
    /// full column rank. Rank failures name the offending columns.
    pub fn new(design: Matrix, response: Vec<f64>, coef_names: Vec<String>) -> Result<Self> {
        let (n, p) = (design.rows(), design.cols());
        if response.len() != n {
            return Err(Error::domain(format!("design has {n} rows but response has {}", response.len())));
        }
        if coef_names.len() != p {
            return Err(Error::domain(format!("{} names for {p} coefficients", coef_names.len())));
        }
        if p == 0 || design.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::domain("first design column must be an all-ones intercept"));
        }
        if design.as_slice().iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(Error::domain("design and response must be finite"));
        }
        if n <= p + 3 {
            return Err(Error::TooFewObservations { needed: p + 4, got: n });
        }
        let dependent = design.dependent_columns(1e-10);
        if !dependent.is_empty() {
            return Err(Error::RankDeficient { columns: dependent });
        }
        for (j, name) in coef_names.iter().enumerate().skip(1) {
            if design.column(j) == response {
                return Err(Error::domain(format!("covariate '{name}' is identical to the response")));
            }
        }
        Ok(RegressionSpec { design, response, coef_names })
    }

    /// Intercept-only specification.
    pub fn intercept_only(response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        Self::new(Matrix::ones_column(n), response, vec!["intercept".to_string()])
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn coef_names(&self) -> &[String] {
        &self.coef_names
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.design.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RegressionMethod {
    Ecm,
    Bayes,
    Ols,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ErrorModel {
    Fg { sigma1: f64, sigma2: f64, w: f64 },
    Normal { sigma: f64 },
}

/// One reported parameter. For Bayesian fits `estimate` is the posterior
/// median, `se` the posterior sd and the bounds a central 95% interval.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub estimate: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub se: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub lower: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionFit {
    pub method: RegressionMethod,
    pub coef_names: Vec<String>,
    pub beta: Vec<f64>,
    pub error: ErrorModel,
    /// Covariance of `(β, sigma1, sigma2, w)` (or `β` for OLS).
    pub vcov: Option<Matrix>,
    pub vcov_error: Option<String>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub loglik: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub aic: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub bic: f64,
    /// Coefficients first, then the error-model parameters.
    pub estimates: Vec<Estimate>,
    /// 95% intervals for the scales formed on the log scale (ECM only).
    pub log_scale_intervals: Vec<Estimate>,
    /// Parameters whose posterior sd exceeds half their |median|.
    pub weakly_identified: Vec<String>,
    pub converged: bool,
    pub n_iter: usize,
    pub n_obs: usize,
}

impl RegressionFit {
    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    /// FG error distribution at covariate row `x`.
    pub fn fg_at(&self, x: &[f64]) -> Option<FgParams> {
        match self.error {
            ErrorModel::Fg { sigma1, sigma2, w } => {
                let loc: f64 = x.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
                FgParams::new(loc, sigma1, sigma2, w).ok()
            }
            ErrorModel::Normal { .. } => None,
        }
    }
}

fn wald(name: &str, est: f64, se: f64) -> Estimate {
    Estimate { name: name.to_string(), estimate: est, se, lower: est - Z975 * se, upper: est + Z975 * se }
}

fn param_names(spec: &RegressionSpec) -> Vec<String> {
    let mut names = spec.coef_names.clone();
    names.extend(["sigma1", "sigma2", "w"].iter().map(|s| s.to_string()));
    names
}

/// Least squares coefficients, residuals and `(XᵀX)⁻¹`.
fn least_squares(spec: &RegressionSpec) -> Result<(Vec<f64>, Vec<f64>, Matrix)> {
    let x = &spec.design;
    let xtx = x.gram();
    let xtx_inv = xtx.inverse().ok_or(Error::Singular { cond: xtx.condition_number() })?;
    let xty = x.transpose().mul_vec(&spec.response);
    let beta = xtx_inv.mul_vec(&xty);
    let fitted = x.mul_vec(&beta);
    let resid = spec.response.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok((beta, resid, xtx_inv))
}

/// Ordinary least squares with classical standard errors and t intervals.
/// The log-likelihood uses the maximum likelihood variance `RSS / n`, and
/// the information criteria count `p + 1` parameters.
pub fn fit_mean_normal(spec: &RegressionSpec) -> Result<RegressionFit> {
    let (n, p) = (spec.n(), spec.p());
    let (beta, resid, xtx_inv) = least_squares(spec)?;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let df = (n - p) as f64;
    let s2 = rss / df;
    let sigma_ml2 = rss / n as f64;
    let loglik = if sigma_ml2 > 0.0 {
        -0.5 * n as f64 * (log(2.0 * core::f64::consts::PI * sigma_ml2) + 1.0)
    } else {
        f64::INFINITY
    };
    let (aic, bic) = information_criteria(loglik, p + 1, n);
    let mut vcov = xtx_inv.clone();
    vcov.scale(s2);
    let tq = student_t_quantile(0.975, df);
    let mut estimates: Vec<Estimate> = (0..p)
        .map(|j| {
            let se = sqrt(vcov[(j, j)].max(0.0));
            Estimate {
                name: spec.coef_names[j].clone(),
                estimate: beta[j],
                se,
                lower: beta[j] - tq * se,
                upper: beta[j] + tq * se,
            }
        })
        .collect();
    let sigma = sqrt(s2);
    estimates.push(Estimate { name: "sigma".into(), estimate: sigma, se: f64::NAN, lower: f64::NAN, upper: f64::NAN });
    Ok(RegressionFit {
        method: RegressionMethod::Ols,
        coef_names: spec.coef_names.clone(),
        beta,
        error: ErrorModel::Normal { sigma },
        vcov: Some(vcov),
        vcov_error: None,
        loglik,
        aic,
        bic,
        estimates,
        log_scale_intervals: Vec::new(),
        weakly_identified: Vec::new(),
        converged: true,
        n_iter: 0,
        n_obs: n,
    })
}

/// FG modal regression by ECM, started from the least-squares fit with
/// intercepts shifted across residual quantiles.
pub fn fit_modal_ecm(spec: &RegressionSpec, cfg: &EcmConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    let (n, p) = (spec.n(), spec.p());
    let (base, resid, _) = least_squares(spec)?;
    let model = LocationModel::new(&spec.response, &spec.design);
    let starts = model.start_points(&base, &resid, cfg.n_starts, cfg.seed);
    let mut sorted = resid.clone();
    sorted.sort_by(f64::total_cmp);
    let mode_proxy = base[0] + shorth_midpoint(&sorted);
    let best = model.fit_multistart(&starts, cfg, |s: &State| fabs(s.beta[0] - mode_proxy));
    let st = best.state;
    if !best.loglik.is_finite() {
        return Err(Error::Numerical("regression log-likelihood is not finite".into()));
    }
    let mut params = st.beta.clone();
    params.extend_from_slice(&[st.s1, st.s2, st.w]);
    let vcov = check_interior(&st.at_location(0.0)).and_then(|_| {
        let x = &spec.design;
        let y = &spec.response;
        sandwich(n, &params, |i, q| {
            let loc: f64 = x.row(i).iter().zip(&q[..p]).map(|(a, b)| a * b).sum();
            match FgParams::new(loc, q[p], q[p + 1], q[p + 2]) {
                Ok(fg) => fg.logpdf(y[i]),
                Err(_) => f64::NAN,
            }
        })
    });
    let (vcov, vcov_error) = match vcov {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let names = param_names(spec);
    let se: Vec<f64> = match &vcov {
        Some(v) => v.diagonal().iter().map(|d| sqrt(d.max(0.0))).collect(),
        None => vec![f64::NAN; p + 3],
    };
    let estimates: Vec<Estimate> = (0..p + 3).map(|j| wald(&names[j], params[j], se[j])).collect();
    let log_scale_intervals = [p, p + 1]
        .iter()
        .map(|&j| {
            let s = params[j];
            let half = Z975 * se[j] / s;
            Estimate { name: names[j].clone(), estimate: s, se: se[j], lower: s * exp(-half), upper: s * exp(half) }
        })
        .collect();
    let (aic, bic) = information_criteria(best.loglik, p + 3, n);
    Ok(RegressionFit {
        method: RegressionMethod::Ecm,
        coef_names: spec.coef_names.clone(),
        beta: st.beta,
        error: ErrorModel::Fg { sigma1: st.s1, sigma2: st.s2, w: st.w },
        vcov,
        vcov_error,
        loglik: best.loglik,
        aic,
        bic,
        estimates,
        log_scale_intervals,
        weakly_identified: Vec::new(),
        converged: best.converged,
        n_iter: best.n_iter,
        n_obs: n,
    })
}

/// Sampler for the Bayesian modal regression; chains can be run
/// independently and combined with [`Sampler::assemble`] and
/// [`summarize_modal_bayes`].
pub fn modal_bayes_sampler<'a>(spec: &'a RegressionSpec, prior: &PriorSpec, cfg: &McmcConfig) -> Result<Sampler<'a>> {
    let (n, p) = (spec.n(), spec.p());
    let (base, resid, xtx_inv) = least_squares(spec)?;
    let s2 = resid.iter().map(|r| r * r).sum::<f64>() / (n - p) as f64;
    let coef_sd: Vec<f64> = (0..p).map(|j| sqrt((s2 * xtx_inv[(j, j)]).max(0.0))).collect();
    Sampler::regression(&spec.response, spec.design.clone(), base, coef_sd, spec.coef_names.clone(), *prior, cfg)
}

/// Posterior medians, sds and central 95% intervals; information criteria
/// at the posterior-median parameters.
pub fn summarize_modal_bayes(spec: &RegressionSpec, draws: &PosteriorDraws) -> Result<RegressionFit> {
    let (n, p) = (spec.n(), spec.p());
    let med: Vec<f64> = draws.summaries.iter().map(|s| s.median).collect();
    let beta = med[..p].to_vec();
    let (s1, s2, w) = (med[p], med[p + 1], med[p + 2]);
    let fitted = spec.design.mul_vec(&beta);
    let mut loglik = 0.0;
    for (yi, li) in spec.response.iter().zip(&fitted) {
        loglik += FgParams::new(*li, s1, s2, w)?.logpdf(*yi);
    }
    let (aic, bic) = information_criteria(loglik, p + 3, n);
    let estimates = draws
        .summaries
        .iter()
        .map(|s| Estimate { name: s.name.clone(), estimate: s.median, se: s.sd, lower: s.q025, upper: s.q975 })
        .collect();
    let weakly_identified =
        draws.summaries.iter().filter(|s| s.sd > 0.5 * fabs(s.median)).map(|s| s.name.clone()).collect();
    let converged = draws.rhat.iter().all(|r| *r < 1.05) && draws.failed_chains.is_empty();
    Ok(RegressionFit {
        method: RegressionMethod::Bayes,
        coef_names: spec.coef_names.clone(),
        beta,
        error: ErrorModel::Fg { sigma1: s1, sigma2: s2, w },
        vcov: Some(sample_covariance(&draws.draws)),
        vcov_error: None,
        loglik,
        aic,
        bic,
        estimates,
        log_scale_intervals: Vec::new(),
        weakly_identified,
        converged,
        n_iter: draws.draws_per_chain,
        n_obs: n,
    })
}

/// Bayesian FG modal regression; chains run sequentially.
pub fn fit_modal_bayes(spec: &RegressionSpec, prior: &PriorSpec, cfg: &McmcConfig) -> Result<(RegressionFit, PosteriorDraws)> {
    let sampler = modal_bayes_sampler(spec, prior, cfg)?;
    let chains = (0..cfg.n_chains).map(|c| sampler.run_chain(c)).collect();
    let draws = sampler.assemble(chains)?;
    let fit = summarize_modal_bayes(spec, &draws)?;
    Ok((fit, draws))
}

fn sample_covariance(m: &Matrix) -> Matrix {
    let (r, k) = (m.rows(), m.cols());
    let means: Vec<f64> = (0..k).map(|j| (0..r).map(|i| m[(i, j)]).sum::<f64>() / r as f64).collect();
    let mut c = Matrix::zeros(k, k);
    for i in 0..r {
        let row = m.row(i);
        for a in 0..k {
            for b in 0..=a {
                c[(a, b)] += (row[a] - means[a]) * (row[b] - means[b]);
            }
        }
    }
    let d = (r.max(2) - 1) as f64;
    for a in 0..k {
        for b in 0..=a {
            let v = c[(a, b)] / d;
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::fg_sample;
    use crate::ecm::fit_ecm;

    fn synthetic(n: usize, beta: [f64; 2], seed: u64) -> RegressionSpec {
        let e = fg_sample(&FgParams::new(0.0, 1.0, 2.0, 0.6).unwrap(), n, seed).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let x = (i as f64 / n as f64) * 4.0 - 2.0;
            rows.push(vec![1.0, x]);
            y.push(beta[0] + beta[1] * x + e.values()[i]);
        }
        RegressionSpec::new(Matrix::from_rows(&rows), y, vec!["intercept".into(), "x".into()]).unwrap()
    }

    #[test]
    fn spec_rejects_collinear_and_small() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let names = vec!["a".into(), "b".into(), "c".into()];
        assert!(matches!(
            RegressionSpec::new(Matrix::from_rows(&rows), y.clone(), names),
            Err(Error::RankDeficient { .. })
        ));
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        assert!(matches!(
            RegressionSpec::new(Matrix::from_rows(&rows), y[..5].to_vec(), vec!["a".into(), "b".into()]),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn response_as_covariate_rejected() {
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let rows: Vec<Vec<f64>> = y.iter().map(|&v| vec![1.0, v]).collect();
        assert!(RegressionSpec::new(Matrix::from_rows(&rows), y, vec!["a".into(), "y".into()]).is_err());
    }

    #[test]
    fn ols_interpolates_exact_line() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![1.0, i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 - 2.0 * r[1] + 0.25 * r[2]).collect();
        let spec = RegressionSpec::new(Matrix::from_rows(&rows), y, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let fit = fit_mean_normal(&spec).unwrap();
        for (b, t) in fit.beta.iter().zip([1.5, -2.0, 0.25]) {
            assert!((b - t).abs() < 1e-10);
        }
    }

    #[test]
    fn intercept_only_matches_distribution_fit() {
        let y = fg_sample(&FgParams::new(1.0, 1.0, 3.0, 0.4).unwrap(), 300, 11).unwrap();
        let cfg = EcmConfig::default();
        let dist = fit_ecm(&y, &cfg).unwrap();
        let spec = RegressionSpec::intercept_only(y.values().to_vec()).unwrap();
        let reg = fit_modal_ecm(&spec, &cfg).unwrap();
        assert!((reg.beta[0] - dist.params.theta()).abs() < 1e-6, "{} vs {}", reg.beta[0], dist.params.theta());
        assert!((reg.loglik - dist.loglik).abs() < 1e-6);
    }

    #[test]
    fn shift_equivariance() {
        let spec = synthetic(400, [1.0, 0.5], 3);
        let cfg = EcmConfig::default();
        let a = fit_modal_ecm(&spec, &cfg).unwrap();
        let c = [2.0, -1.0];
        let y2: Vec<f64> = spec.response().iter().enumerate().map(|(i, v)| v + c[0] + c[1] * spec.design()[(i, 1)]).collect();
        let spec2 = RegressionSpec::new(spec.design().clone(), y2, spec.coef_names().to_vec()).unwrap();
        let b = fit_modal_ecm(&spec2, &cfg).unwrap();
        for ((bj, aj), cj) in b.beta.iter().zip(&a.beta).zip(c) {
            assert!((bj - aj - cj).abs() < 1e-4);
        }
        assert!((a.loglik - b.loglik).abs() < 1e-6 * a.loglik.abs());
    }

    #[test]
    fn modal_fit_recovers_slope() {
        let spec = synthetic(2000, [1.0, 0.5], 7);
        let fit = fit_modal_ecm(&spec, &EcmConfig::default()).unwrap();
        let se = fit.estimate("x").unwrap().se;
        assert!((fit.beta[1] - 0.5).abs() < 4.0 * se, "{} se {}", fit.beta[1], se);
        assert!((fit.beta[0] - 1.0).abs() < 0.2);
        assert_eq!(fit.estimates.len(), 5);
    }
}
