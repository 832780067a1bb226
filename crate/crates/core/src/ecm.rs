//! Maximum likelihood for FG models by expectation-conditional
//! maximization.
//!
//! The engine here works for any linear location model `theta_i = x_iᵀ beta`;
//! the plain distribution fit is the intercept-only case. Each iteration
//! computes responsibilities, sets `w` to their mean, then maximizes the
//! expected complete-data log-likelihood over `beta`, `sigma1` and `sigma2`
//! in turn, each block conditional on the latest value of the others.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, fabs, log, sqrt};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{quantile_sorted, sd, shorth_midpoint, DataSample};
use crate::dist::FgParams;
use crate::linalg::Matrix;
use crate::optim::newton_maximize;
use crate::sandwich::sandwich_vcov;
use crate::{Error, Result};

/// Scales are kept inside `[SCALE_MIN, SCALE_MAX]`.
pub const SCALE_MIN: f64 = 1e-8;
pub const SCALE_MAX: f64 = 1e8;

const START_LEVELS: [(f64, f64); 9] = [
    (0.5, 0.5),
    (0.25, 0.2),
    (0.75, 0.8),
    (0.25, 0.8),
    (0.75, 0.2),
    (0.5, 0.2),
    (0.5, 0.8),
    (0.25, 0.5),
    (0.75, 0.5),
];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EcmConfig {
    pub max_iter: usize,
    /// Convergence threshold on the relative change of the observed-data
    /// log-likelihood.
    pub tol: f64,
    pub n_starts: usize,
    /// Tolerance of the inner one-dimensional and block maximizations.
    pub inner_tol: f64,
    pub seed: u64,
}

impl Default for EcmConfig {
    fn default() -> Self {
        EcmConfig { max_iter: 1000, tol: 1e-8, n_starts: 10, inner_tol: 1e-10, seed: 0 }
    }
}

impl EcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::domain("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("tol must be positive"));
        }
        if self.n_starts < 1 {
            return Err(Error::domain("n_starts must be at least 1"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::domain("inner_tol must be positive"));
        }
        Ok(())
    }
}

/// Result of [`fit_ecm`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub params: FgParams,
    /// Sandwich covariance in the order `(theta, sigma1, sigma2, w)`.
    pub vcov: Option<Matrix>,
    /// Why `vcov` is missing, when it is.
    pub vcov_error: Option<String>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub loglik: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub aic: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub bic: f64,
    pub converged: bool,
    pub n_iter: usize,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::vec"))]
    pub loglik_trace: Vec<f64>,
    /// Responsibilities from the final E-step; `params.w()` is their mean.
    pub responsibilities: Vec<f64>,
    /// A scale iterate was held at [`SCALE_MIN`].
    pub scale_clamped: bool,
    pub n_obs: usize,
    /// Which multi-start chain won.
    pub start_index: usize,
}

impl FitResult {
    /// Square roots of the sandwich variances.
    pub fn standard_errors(&self) -> Option<[f64; 4]> {
        let v = self.vcov.as_ref()?;
        Some([sqrt(v[(0, 0)]), sqrt(v[(1, 1)]), sqrt(v[(2, 2)]), sqrt(v[(3, 3)])])
    }
}

/// AIC and BIC for `k` free parameters.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> (f64, f64) {
    let k = k as f64;
    (-2.0 * loglik + 2.0 * k, -2.0 * loglik + k * log(n as f64))
}

/// Responsibilities `T_i = w f1(y_i) / (w f1(y_i) + (1-w) f2(y_i))`.
pub fn e_step(y: &DataSample, current: &FgParams) -> Vec<f64> {
    y.values().iter().map(|&v| current.responsibility(v)).collect()
}

/// Expected complete-data log-likelihood `Q(params | T)`.
pub fn q_function(y: &DataSample, t: &[f64], params: &FgParams) -> f64 {
    let x = Matrix::ones_column(y.len());
    let model = LocationModel::new(y.values(), &x);
    let loc = vec![params.theta(); y.len()];
    model.q_value(t, &loc, params.sigma1(), params.sigma2(), params.w())
}

/// Output of one conditional-maximization sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmOutcome {
    pub params: FgParams,
    pub scale_clamped: bool,
}

/// One CM sweep: `w`, then `theta`, `sigma1`, `sigma2`.
pub fn cm_step(y: &DataSample, t: &[f64], current: &FgParams, inner_tol: f64) -> Result<CmOutcome> {
    if t.len() != y.len() {
        return Err(Error::domain("responsibilities and data differ in length"));
    }
    let x = Matrix::ones_column(y.len());
    let model = LocationModel::new(y.values(), &x);
    let state = State::from_params(current);
    let (next, scale_clamped) = model.cm_step(t, &state, inner_tol);
    Ok(CmOutcome { params: next.to_params()?, scale_clamped })
}

/// Maximum likelihood estimate of FG parameters by multi-start ECM.
///
/// Returns the chain with the highest log-likelihood; `converged` reports
/// whether that chain met `cfg.tol` before `cfg.max_iter`.
pub fn fit_ecm(y: &DataSample, cfg: &EcmConfig) -> Result<FitResult> {
    cfg.validate()?;
    let n = y.len();
    if n < 5 {
        return Err(Error::TooFewObservations { needed: 5, got: n });
    }
    let x = Matrix::ones_column(n);
    let model = LocationModel::new(y.values(), &x);
    let starts = model.start_points(&[0.0], y.values(), cfg.n_starts, cfg.seed);
    let sorted = y.sorted();
    let mode_proxy = shorth_midpoint(&sorted);
    let best = model.fit_multistart(&starts, cfg, |s| fabs(s.beta[0] - mode_proxy));
    let params = best.state.to_params()?;
    let (vcov, vcov_error) = match sandwich_vcov(y, &params) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (aic, bic) = information_criteria(best.loglik, 4, n);
    Ok(FitResult {
        params,
        vcov,
        vcov_error,
        loglik: best.loglik,
        aic,
        bic,
        converged: best.converged,
        n_iter: best.n_iter,
        loglik_trace: best.trace,
        responsibilities: best.responsibilities,
        scale_clamped: best.clamped,
        n_obs: n,
        start_index: best.start_index,
    })
}

// ---------------------------------------------------------------------------
// Location-model engine shared with modal regression.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct State {
    pub beta: Vec<f64>,
    pub s1: f64,
    pub s2: f64,
    pub w: f64,
}

impl State {
    pub fn from_params(p: &FgParams) -> Self {
        State { beta: vec![p.theta()], s1: p.sigma1(), s2: p.sigma2(), w: p.w() }
    }

    pub fn to_params(&self) -> Result<FgParams> {
        FgParams::new(self.beta[0], self.s1, self.s2, self.w.clamp(0.0, 1.0))
    }

    pub fn at_location(&self, theta: f64) -> FgParams {
        // scales and weight are kept valid by the engine
        FgParams::new(theta, self.s1, self.s2, self.w.clamp(0.0, 1.0))
            .unwrap_or_else(|_| FgParams::new(0.0, 1.0, 1.0, 0.5).unwrap())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ChainOutcome {
    pub state: State,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub trace: Vec<f64>,
    pub responsibilities: Vec<f64>,
    pub clamped: bool,
    pub start_index: usize,
}

pub(crate) struct LocationModel<'a> {
    y: &'a [f64],
    x: &'a Matrix,
}

impl<'a> LocationModel<'a> {
    pub fn new(y: &'a [f64], x: &'a Matrix) -> Self {
        debug_assert_eq!(y.len(), x.rows());
        LocationModel { y, x }
    }

    pub fn locations(&self, beta: &[f64]) -> Vec<f64> {
        if self.x.cols() == 1 && beta.len() == 1 {
            // intercept-only fast path keeps the distribution fit exact
            let b = beta[0];
            return (0..self.y.len()).map(|i| self.x[(i, 0)] * b).collect();
        }
        self.x.mul_vec(beta)
    }

    pub fn loglik(&self, st: &State) -> f64 {
        let loc = self.locations(&st.beta);
        self.loglik_at(&loc, st)
    }

    pub fn loglik_at(&self, loc: &[f64], st: &State) -> f64 {
        let mut total = 0.0;
        for (&yi, &li) in self.y.iter().zip(loc) {
            total += st.at_location(li).logpdf(yi);
        }
        total
    }

    pub fn e_step(&self, loc: &[f64], st: &State) -> Vec<f64> {
        self.y.iter().zip(loc).map(|(&yi, &li)| st.at_location(li).responsibility(yi)).collect()
    }

    pub fn q_value(&self, t: &[f64], loc: &[f64], s1: f64, s2: f64, w: f64) -> f64 {
        let (lw, lwb) = (log(w), libm::log1p(-w));
        let mut total = 0.0;
        for i in 0..self.y.len() {
            let d = self.y[i] - loc[i];
            let z = d / s1;
            let u = d / s2;
            if t[i] > 0.0 {
                total += t[i] * (lw - log(s1) - z - exp(-z));
            }
            if t[i] < 1.0 {
                total += (1.0 - t[i]) * (lwb - log(s2) + u - exp(u));
            }
        }
        total
    }

    /// Location part of Q with its gradient and Hessian in `beta`.
    fn beta_objective(&self, t: &[f64], beta: &[f64], s1: f64, s2: f64) -> (f64, Vec<f64>, Matrix) {
        let p = beta.len();
        let loc = self.locations(beta);
        let mut val = 0.0;
        let mut grad = vec![0.0; p];
        let mut hess = Matrix::zeros(p, p);
        for i in 0..self.y.len() {
            let d = self.y[i] - loc[i];
            let z = d / s1;
            let u = d / s2;
            let ez = exp(-z);
            let eu = exp(u);
            let ti = t[i];
            let mut c = 0.0;
            let mut h = 0.0;
            if ti > 0.0 {
                val += ti * (-z - ez);
                c += ti * (1.0 - ez) / s1;
                h -= ti * ez / (s1 * s1);
            }
            if ti < 1.0 {
                val += (1.0 - ti) * (u - eu);
                c += (1.0 - ti) * (eu - 1.0) / s2;
                h -= (1.0 - ti) * eu / (s2 * s2);
            }
            let row = self.x.row(i);
            for a in 0..p {
                grad[a] += c * row[a];
                for b in 0..p {
                    hess[(a, b)] += h * row[a] * row[b];
                }
            }
        }
        (val, grad, hess)
    }

    /// Damped Newton ascent on the location block. The objective is concave
    /// in `beta`, and no accepted step decreases it.
    pub fn update_beta(&self, t: &[f64], beta: &[f64], s1: f64, s2: f64, tol: f64) -> Vec<f64> {
        let p = beta.len();
        let mut b = beta.to_vec();
        let (mut val, mut grad, mut hess) = self.beta_objective(t, &b, s1, s2);
        for _ in 0..100 {
            if !val.is_finite() {
                break;
            }
            let mut neg = hess.clone();
            neg.scale(-1.0);
            let mut step = match neg.solve_spd(&grad) {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => grad.iter().map(|g| 1e-3 * g).collect(),
            };
            let bmax = b.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
            let mut accepted = false;
            for _ in 0..60 {
                let cand: Vec<f64> = b.iter().zip(&step).map(|(x, s)| x + s).collect();
                let (v2, g2, h2) = self.beta_objective(t, &cand, s1, s2);
                if v2.is_finite() && v2 >= val {
                    let moved = step.iter().fold(0.0f64, |m, s| m.max(fabs(*s)));
                    b = cand;
                    val = v2;
                    grad = g2;
                    hess = h2;
                    accepted = moved > tol * (1.0 + bmax);
                    break;
                }
                for s in &mut step {
                    *s *= 0.5;
                }
            }
            if !accepted {
                break;
            }
        }
        debug_assert_eq!(b.len(), p);
        b
    }

    /// Maximize Q over one scale, on the log scale, by safeguarded Newton.
    /// Returns the new scale and whether it sits on the lower bound.
    pub fn update_scale(&self, t: &[f64], loc: &[f64], component: usize, scale: f64, tol: f64) -> (f64, bool) {
        let y = self.y;
        let objective = |s: f64| -> (f64, f64, f64) {
            let inv = exp(-s);
            let (mut v, mut g, mut h) = (0.0, 0.0, 0.0);
            for i in 0..y.len() {
                let wt = if component == 1 { t[i] } else { 1.0 - t[i] };
                if wt <= 0.0 {
                    continue;
                }
                let z = (y[i] - loc[i]) * inv;
                if component == 1 {
                    let e = exp(-z);
                    v += wt * (-s - z - e);
                    g += wt * (-1.0 + z * (1.0 - e));
                    h += wt * (-z * (1.0 - e) - z * z * e);
                } else {
                    let e = exp(z);
                    v += wt * (-s + z - e);
                    g += wt * (-1.0 + z * (e - 1.0));
                    h += wt * (-z * (e - 1.0) - z * z * e);
                }
            }
            (v, g, h)
        };
        let lo = log(SCALE_MIN);
        let hi = log(SCALE_MAX);
        let r = newton_maximize(objective, log(scale), lo, hi, 2.0, tol, 200);
        let s = exp(r.x).clamp(SCALE_MIN, SCALE_MAX);
        (s, r.x <= lo)
    }

    pub fn cm_step(&self, t: &[f64], st: &State, tol: f64) -> (State, bool) {
        let n = t.len().max(1) as f64;
        let w = (t.iter().sum::<f64>() / n).clamp(0.0, 1.0);
        let beta = self.update_beta(t, &st.beta, st.s1, st.s2, tol);
        let loc = self.locations(&beta);
        let (s1, c1) = self.update_scale(t, &loc, 1, st.s1, tol);
        let (s2, c2) = self.update_scale(t, &loc, 2, st.s2, tol);
        (State { beta, s1, s2, w }, c1 || c2)
    }

    pub fn run_chain(&self, start: &State, cfg: &EcmConfig, start_index: usize) -> ChainOutcome {
        let mut st = start.clone();
        let mut ll = self.loglik(&st);
        let mut trace = vec![ll];
        let mut responsibilities = Vec::new();
        let mut converged = false;
        let mut clamped = false;
        let mut n_iter = 0;
        while n_iter < cfg.max_iter {
            n_iter += 1;
            let loc = self.locations(&st.beta);
            let t = self.e_step(&loc, &st);
            let (next, c) = self.cm_step(&t, &st, cfg.inner_tol);
            clamped |= c;
            let ll_next = self.loglik(&next);
            trace.push(ll_next);
            let denom = if ll.is_finite() && ll != 0.0 { fabs(ll) } else { 1.0 };
            let rel = fabs(ll_next - ll) / denom;
            st = next;
            ll = ll_next;
            responsibilities = t;
            if rel < cfg.tol {
                converged = true;
                break;
            }
        }
        if responsibilities.is_empty() {
            let loc = self.locations(&st.beta);
            responsibilities = self.e_step(&loc, &st);
        }
        ChainOutcome { state: st, loglik: ll, converged, n_iter, trace, responsibilities, clamped, start_index }
    }

    /// Dispersed starting points. `base` is a coefficient vector whose
    /// residuals are `resid`; starts shift its first coefficient to residual
    /// quantiles and use moment-matched scales.
    pub fn start_points(&self, base: &[f64], resid: &[f64], n_starts: usize, seed: u64) -> Vec<State> {
        let mut sorted = resid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let spread = sd(resid);
        let sigma0 = if spread.is_finite() && spread > 0.0 {
            spread * sqrt(6.0) / core::f64::consts::PI
        } else {
            1.0
        };
        let mut rng = crate::rng_stream(seed, 0x5157_4152);
        let mut out = Vec::with_capacity(n_starts);
        for k in 0..n_starts {
            let (level, w, s1, s2) = if let Some(&(l, w)) = START_LEVELS.get(k) {
                (l, w, sigma0, sigma0)
            } else {
                let l = rng.random_range(0.2..0.8);
                let w = rng.random_range(0.1..0.9);
                let j1: f64 = StandardNormal.sample(&mut rng);
                let j2: f64 = StandardNormal.sample(&mut rng);
                (l, w, sigma0 * exp(0.5 * j1), sigma0 * exp(0.5 * j2))
            };
            let mut beta = base.to_vec();
            beta[0] += quantile_sorted(&sorted, level);
            out.push(State { beta, s1: s1.clamp(SCALE_MIN, SCALE_MAX), s2: s2.clamp(SCALE_MIN, SCALE_MAX), w });
        }
        out
    }

    /// Run every start; keep the highest log-likelihood, breaking ties
    /// (within 1e-10) by the smaller `tie_key`.
    pub fn fit_multistart<K: Fn(&State) -> f64>(&self, starts: &[State], cfg: &EcmConfig, tie_key: K) -> ChainOutcome {
        let mut best: Option<ChainOutcome> = None;
        for (k, s) in starts.iter().enumerate() {
            let out = self.run_chain(s, cfg, k);
            if !out.loglik.is_finite() {
                if best.is_none() {
                    best = Some(out);
                }
                continue;
            }
            best = Some(match best {
                None => out,
                Some(b) if !b.loglik.is_finite() => out,
                Some(b) => {
                    let diff = out.loglik - b.loglik;
                    if diff > 1e-10 || (fabs(diff) <= 1e-10 && tie_key(&out.state) < tie_key(&b.state)) {
                        out
                    } else {
                        b
                    }
                }
            });
        }
        best.expect("at least one start")
    }
}

/// Description of a fitted chain for diagnostics output.
pub fn describe(fit: &FitResult) -> String {
    format!(
        "theta={:.4} sigma1={:.4} sigma2={:.4} w={:.4} loglik={:.4} iters={} converged={}",
        fit.params.theta(),
        fit.params.sigma1(),
        fit.params.sigma2(),
        fit.params.w(),
        fit.loglik,
        fit.n_iter,
        fit.converged
    )
}
