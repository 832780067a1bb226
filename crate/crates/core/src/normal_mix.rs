//! Two-component normal mixture fitted by EM, the baseline the FG family is
//! compared against.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::data::{mean, sd, DataSample};
use crate::ecm::{information_criteria, EcmConfig};
use crate::special::{log_add_exp, normal_cdf, normal_logpdf};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalMixParams {
    mu1: f64,
    mu2: f64,
    s1: f64,
    s2: f64,
    w: f64,
}

impl NormalMixParams {
    /// Weight `w` belongs to component 1. Output is canonicalized so that
    /// `mu1 <= mu2`.
    pub fn new(mu1: f64, mu2: f64, s1: f64, s2: f64, w: f64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite()) {
            return Err(Error::domain("means must be finite"));
        }
        if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) {
            return Err(Error::domain("standard deviations must be positive"));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::domain("w must lie in [0, 1]"));
        }
        let p = NormalMixParams { mu1, mu2, s1, s2, w };
        Ok(if mu1 > mu2 { NormalMixParams { mu1: mu2, mu2: mu1, s1: s2, s2: s1, w: 1.0 - w } } else { p })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
    pub fn s1(&self) -> f64 {
        self.s1
    }
    pub fn s2(&self) -> f64 {
        self.s2
    }
    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        let a = if self.w > 0.0 { log(self.w) + normal_logpdf(x, self.mu1, self.s1) } else { f64::NEG_INFINITY };
        let b = if self.w < 1.0 { log(1.0 - self.w) + normal_logpdf(x, self.mu2, self.s2) } else { f64::NEG_INFINITY };
        log_add_exp(a, b)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        exp(self.logpdf(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.w * normal_cdf((x - self.mu1) / self.s1) + (1.0 - self.w) * normal_cdf((x - self.mu2) / self.s2)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        if rng.random::<f64>() < self.w {
            self.mu1 + self.s1 * e
        } else {
            self.mu2 + self.s2 * e
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalMixFit {
    pub params: NormalMixParams,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub loglik: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub aic: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub bic: f64,
    /// Stationary within `max_iter` and no degenerate component.
    pub converged: bool,
    pub degenerate: bool,
    pub n_iter: usize,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::vec"))]
    pub loglik_trace: Vec<f64>,
    pub failure: Option<String>,
}

/// EM for a two-component normal mixture.
///
/// Starting values follow the common recipe of splitting the sorted sample
/// in halves: the half means and sds set the hyperparameters of random
/// initial sds (`1 / Exp(rate = half sd)`) and means (normal around the
/// half means). Stationarity means a log-likelihood increase below
/// `cfg.tol` (absolute). A component whose sd falls to `1e-6` times the
/// sample sd is degenerate and the fit is reported as not converged.
/// There are no restarts.
pub fn fit_normal_mixture_em(y: &DataSample, cfg: &EcmConfig) -> Result<NormalMixFit> {
    cfg.validate()?;
    let v = y.values();
    let n = v.len();
    if n < 5 {
        return Err(Error::TooFewObservations { needed: 5, got: n });
    }
    let sample_sd = sd(v);
    if !(sample_sd > 0.0) {
        return Err(Error::domain("sample has zero spread"));
    }
    let floor = 1e-6 * sample_sd;
    let mut rng = crate::rng_stream(cfg.seed, 0x4e4d);
    let sorted = y.sorted();
    let half = n / 2;
    let (lo, hi) = (&sorted[..half], &sorted[half..]);
    let hyp_mu = [mean(lo), mean(hi)];
    let hyp_s = [sd(lo), sd(hi)];
    let mut mu = [0.0; 2];
    let mut s = [0.0; 2];
    for k in 0..2 {
        let rate = if hyp_s[k] > 0.0 { hyp_s[k] } else { sample_sd };
        let e = Exp::new(rate).map(|d| d.sample(&mut rng)).unwrap_or(1.0);
        s[k] = (1.0 / e).max(floor);
        let z: f64 = StandardNormal.sample(&mut rng);
        mu[k] = hyp_mu[k] + s[k] * z;
    }
    let (u1, u2): (f64, f64) = (rng.random(), rng.random());
    let mut w = u1 / (u1 + u2);

    let mut resp = vec![0.0; n];
    let loglik_of = |mu: &[f64; 2], s: &[f64; 2], w: f64, resp: &mut [f64]| -> f64 {
        let (lw1, lw2) = (log(w), log(1.0 - w));
        let mut total = 0.0;
        for (i, &x) in v.iter().enumerate() {
            let a = lw1 + normal_logpdf(x, mu[0], s[0]);
            let b = lw2 + normal_logpdf(x, mu[1], s[1]);
            let l = log_add_exp(a, b);
            resp[i] = exp(a - l);
            total += l;
        }
        total
    };
    let mut ll = loglik_of(&mu, &s, w, &mut resp);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut degenerate = false;
    let mut failure = None;
    let mut n_iter = 0;
    while n_iter < cfg.max_iter {
        n_iter += 1;
        let r1: f64 = resp.iter().sum();
        let r2 = n as f64 - r1;
        w = r1 / n as f64;
        if r1 <= 0.0 || r2 <= 0.0 {
            degenerate = true;
            failure = Some(String::from("a component lost all weight"));
            break;
        }
        mu[0] = resp.iter().zip(v).map(|(r, x)| r * x).sum::<f64>() / r1;
        mu[1] = resp.iter().zip(v).map(|(r, x)| (1.0 - r) * x).sum::<f64>() / r2;
        let mut var = [0.0; 2];
        for (r, x) in resp.iter().zip(v) {
            var[0] += r * (x - mu[0]) * (x - mu[0]);
            var[1] += (1.0 - r) * (x - mu[1]) * (x - mu[1]);
        }
        s = [sqrt(var[0] / r1), sqrt(var[1] / r2)];
        if s[0] <= floor || s[1] <= floor {
            s = [s[0].max(floor), s[1].max(floor)];
            degenerate = true;
            failure = Some(format!("component sd collapsed below {floor:e}"));
        }
        let next = loglik_of(&mu, &s, w, &mut resp);
        trace.push(next);
        if !next.is_finite() {
            failure = Some(String::from("non-finite log-likelihood"));
            ll = next;
            break;
        }
        let diff = next - ll;
        ll = next;
        if degenerate {
            break;
        }
        if diff < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged && failure.is_none() {
        failure = Some(format!("not stationary within {} iterations", cfg.max_iter));
    }
    let params = NormalMixParams::new(mu[0], mu[1], s[0], s[1], w.clamp(0.0, 1.0))?;
    let (aic, bic) = information_criteria(ll, 5, n);
    Ok(NormalMixFit {
        params,
        loglik: ll,
        aic,
        bic,
        converged,
        degenerate,
        n_iter,
        loglik_trace: trace,
        failure,
    })
}
