//! Bayesian inference for FG models by data-augmented
//! Metropolis-within-Gibbs.
//!
//! One scan:
//! 1. draw the latent indicators `z_i ~ Bernoulli(T_i)`;
//! 2. draw `w ~ Beta(1 + Σz, n + 1 - Σz)`;
//! 3. random-walk Metropolis on each location coefficient;
//! 4. random-walk Metropolis on `sigma1`, then `sigma2`.
//!
//! Steps 3 and 4 target the FG likelihood with `z` integrated out,
//! conditional on the current `w` and the other parameters. Proposal
//! standard deviations adapt by Robbins–Monro toward the target acceptance
//! rate during burn-in only and are frozen afterwards.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::data::{quantile_sorted, sd, DataSample};
use crate::diagnostics::{ess_bulk, split_rhat};
use crate::dist::FgParams;
use crate::ecm::{LocationModel, State, SCALE_MAX};
use crate::linalg::Matrix;
use crate::special::normal_logpdf;
use crate::{Error, Result};

/// Independent priors: normal on each location coefficient, inverse-gamma
/// on each scale, uniform on `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorSpec {
    pub location_mean: f64,
    pub location_var: f64,
    pub scale_shape: f64,
    pub scale_rate: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec { location_mean: 0.0, location_var: 1e4, scale_shape: 1.0, scale_rate: 1.0 }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.location_var > 0.0 && self.scale_shape > 0.0 && self.scale_rate > 0.0) {
            return Err(Error::domain("prior hyperparameters must be positive"));
        }
        if !self.location_mean.is_finite() {
            return Err(Error::domain("prior location mean must be finite"));
        }
        Ok(())
    }

    pub fn log_location(&self, b: f64) -> f64 {
        normal_logpdf(b, self.location_mean, sqrt(self.location_var))
    }

    /// Inverse-gamma log density up to a constant; `-inf` for `s <= 0`.
    pub fn log_scale(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -(self.scale_shape + 1.0) * log(s) - self.scale_rate / s
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McmcConfig {
    /// Iterations per chain, burn-in included.
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    /// Initial proposal sds `(location, sigma1, sigma2)`; `None` derives them
    /// from the data.
    pub tau: Option<[f64; 3]>,
    pub adapt: bool,
    pub target_accept: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iter: 20_000,
            burn_in: 5_000,
            thin: 1,
            n_chains: 4,
            tau: None,
            adapt: true,
            target_accept: 0.23,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::domain("burn_in must be smaller than n_iter"));
        }
        if self.thin == 0 || self.n_chains == 0 {
            return Err(Error::domain("thin and n_chains must be at least 1"));
        }
        if let Some(t) = self.tau {
            if t.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::domain("proposal sds must be positive"));
            }
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::domain("target acceptance must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }
}

/// Marginal posterior summary of one parameter.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSummary {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub mean: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub se_mean: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub sd: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub median: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub q025: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub q05: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub q25: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub q75: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub q95: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub q975: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub rhat: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub ess_bulk: f64,
}

/// Draws kept by one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// Row per retained iteration, columns as in `names`.
    pub draws: Vec<Vec<f64>>,
    /// Post-burn-in acceptance rate per Metropolis move.
    pub accept_rates: Vec<f64>,
    pub final_tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorDraws {
    /// Location coefficients first, then `sigma1`, `sigma2`, `w`.
    pub names: Vec<String>,
    pub n_chains: usize,
    pub draws_per_chain: usize,
    /// Pooled draws, chain-major.
    pub draws: Matrix,
    /// Mean over chains of the post-burn-in acceptance rate of each
    /// Metropolis move (location coefficients, sigma1, sigma2).
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::vec"))]
    pub accept_rates: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::vec"))]
    pub rhat: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float::vec"))]
    pub ess_bulk: Vec<f64>,
    pub summaries: Vec<ParamSummary>,
    /// Diagnostics for chains aborted on a non-finite log posterior.
    pub failed_chains: Vec<String>,
}

impl PosteriorDraws {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.column(j)
    }

    pub fn chain_column(&self, chain: usize, j: usize) -> Vec<f64> {
        let start = chain * self.draws_per_chain;
        (start..start + self.draws_per_chain).map(|r| self.draws[(r, j)]).collect()
    }

    pub fn summary(&self, name: &str) -> Option<&ParamSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Posterior medians as FG parameters (intercept-only models).
    pub fn median_params(&self) -> Result<FgParams> {
        let k = self.summaries.len();
        if k != 4 {
            return Err(Error::domain("median_params needs a single location parameter"));
        }
        FgParams::new(self.summaries[0].median, self.summaries[1].median, self.summaries[2].median, self.summaries[3].median)
    }
}

#[inline]
fn accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    log(u) < log_ratio
}

/// Step 1: latent indicators, `z_i = true` for the Gumbel-for-maximum
/// component.
pub fn gibbs_z_update<R: Rng + ?Sized>(y: &DataSample, p: &FgParams, rng: &mut R) -> Vec<bool> {
    y.values().iter().map(|&v| rng.random::<f64>() < p.responsibility(v)).collect()
}

/// Step 2: conjugate draw `w ~ Beta(1 + Σz, n + 1 - Σz)`.
pub fn gibbs_w_update<R: Rng + ?Sized>(z: &[bool], rng: &mut R) -> f64 {
    let ones = z.iter().filter(|&&b| b).count() as f64;
    let n = z.len() as f64;
    draw_beta(1.0 + ones, n + 1.0 - ones, rng)
}

fn draw_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    // both shape parameters are >= 1 here
    let w = Beta::new(a, b).map(|d| d.sample(rng)).unwrap_or(0.5);
    w.clamp(0.0, 1.0)
}

fn fg_loglik(y: &[f64], p: &FgParams) -> f64 {
    y.iter().map(|&v| p.logpdf(v)).sum()
}

/// Log Metropolis ratio for moving the mode from `current.theta()` to
/// `proposal`.
pub fn location_log_ratio(y: &DataSample, current: &FgParams, proposal: f64, prior: &PriorSpec) -> f64 {
    let Ok(prop) = current.with_theta(proposal) else {
        return f64::NEG_INFINITY;
    };
    fg_loglik(y.values(), &prop) + prior.log_location(proposal)
        - fg_loglik(y.values(), current)
        - prior.log_location(current.theta())
}

/// Log Metropolis ratio for moving scale `j` (1 or 2) to `proposal`;
/// `-inf` for non-positive proposals.
pub fn scale_log_ratio(y: &DataSample, current: &FgParams, j: usize, proposal: f64, prior: &PriorSpec) -> f64 {
    if !(proposal > 0.0) {
        return f64::NEG_INFINITY;
    }
    let (s1, s2) = if j == 1 { (proposal, current.sigma2()) } else { (current.sigma1(), proposal) };
    let Ok(prop) = FgParams::new(current.theta(), s1, s2, current.w()) else {
        return f64::NEG_INFINITY;
    };
    let old = if j == 1 { current.sigma1() } else { current.sigma2() };
    fg_loglik(y.values(), &prop) + prior.log_scale(proposal) - fg_loglik(y.values(), current) - prior.log_scale(old)
}

/// Step 3: random-walk update of the mode. Returns the new value and
/// whether the proposal was accepted.
pub fn mh_location_update<R: Rng + ?Sized>(
    y: &DataSample,
    current: &FgParams,
    tau0: f64,
    prior: &PriorSpec,
    rng: &mut R,
) -> (f64, bool) {
    let e: f64 = StandardNormal.sample(rng);
    let proposal = current.theta() + tau0 * e;
    if accept(rng, location_log_ratio(y, current, proposal, prior)) {
        (proposal, true)
    } else {
        (current.theta(), false)
    }
}

/// Step 4: random-walk update of scale `j`; non-positive proposals are
/// rejected.
pub fn mh_scale_update<R: Rng + ?Sized>(
    y: &DataSample,
    current: &FgParams,
    j: usize,
    tau: f64,
    prior: &PriorSpec,
    rng: &mut R,
) -> (f64, bool) {
    let old = if j == 1 { current.sigma1() } else { current.sigma2() };
    let e: f64 = StandardNormal.sample(rng);
    let proposal = old + tau * e;
    if accept(rng, scale_log_ratio(y, current, j, proposal, prior)) {
        (proposal, true)
    } else {
        (old, false)
    }
}

/// Posterior sampling for the FG distribution (intercept-only model).
pub fn run_mcmc(y: &DataSample, prior: &PriorSpec, cfg: &McmcConfig) -> Result<PosteriorDraws> {
    let sampler = Sampler::distribution(y.values(), *prior, cfg)?;
    let chains: Vec<Result<ChainDraws>> = (0..cfg.n_chains).map(|c| sampler.run_chain(c)).collect();
    sampler.assemble(chains)
}

// ---------------------------------------------------------------------------

/// Metropolis-within-Gibbs sampler for a linear location model. Chains
/// are independent; [`Sampler::run_chain`] may be called from several
/// threads.
pub struct Sampler<'a> {
    y: &'a [f64],
    x: Matrix,
    prior: PriorSpec,
    cfg: McmcConfig,
    names: Vec<String>,
    tau0: Vec<f64>,
    starts: Vec<State>,
}

impl<'a> Sampler<'a> {
    pub fn distribution(y: &'a [f64], prior: PriorSpec, cfg: &McmcConfig) -> Result<Self> {
        let x = Matrix::ones_column(y.len());
        Self::build(y, x, vec![0.0], prior, cfg, vec!["theta".to_string()], None)
    }

    /// `base` is a reasonable coefficient vector (OLS), `coef_sd` rough
    /// posterior sds used as initial proposal scales.
    pub fn regression(
        y: &'a [f64],
        x: Matrix,
        base: Vec<f64>,
        coef_sd: Vec<f64>,
        names: Vec<String>,
        prior: PriorSpec,
        cfg: &McmcConfig,
    ) -> Result<Self> {
        Self::build(y, x, base, prior, cfg, names, Some(coef_sd))
    }

    fn build(
        y: &'a [f64],
        x: Matrix,
        base: Vec<f64>,
        prior: PriorSpec,
        cfg: &McmcConfig,
        mut names: Vec<String>,
        coef_sd: Option<Vec<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        prior.validate()?;
        let n = y.len();
        let p = x.cols();
        let model = LocationModel::new(y, &x);
        let resid: Vec<f64> = if n > 0 {
            let fitted = model.locations(&base);
            y.iter().zip(&fitted).map(|(a, b)| a - b).collect()
        } else {
            Vec::new()
        };
        let spread = if n >= 2 { sd(&resid) } else { f64::NAN };
        let mut tau0 = vec![0.0; p + 2];
        let starts = if n >= 2 && spread > 0.0 {
            let sn = sqrt(n as f64);
            let sigma0 = spread * sqrt(6.0) / core::f64::consts::PI;
            match (&cfg.tau, &coef_sd) {
                (Some(t), _) => {
                    tau0[..p].fill(t[0]);
                    tau0[p] = t[1];
                    tau0[p + 1] = t[2];
                }
                (None, Some(csd)) => {
                    tau0[..p].copy_from_slice(csd);
                    tau0[p] = sigma0 / sn;
                    tau0[p + 1] = sigma0 / sn;
                }
                (None, None) => {
                    tau0[..p].fill(spread / sn);
                    tau0[p] = sigma0 / sn;
                    tau0[p + 1] = sigma0 / sn;
                }
            }
            model.start_points(&base, &resid, cfg.n_chains, cfg.seed)
        } else {
            let t = cfg.tau.unwrap_or([sqrt(prior.location_var), 1.0, 1.0]);
            tau0[..p].fill(t[0]);
            tau0[p] = t[1];
            tau0[p + 1] = t[2];
            Vec::new()
        };
        for t in &mut tau0 {
            if !(*t > 0.0) || !t.is_finite() {
                *t = 1.0;
            }
        }
        names.extend(["sigma1", "sigma2", "w"].iter().map(|s| s.to_string()));
        Ok(Sampler { y, x, prior, cfg: cfg.clone(), names, tau0, starts })
    }

    pub fn n_chains(&self) -> usize {
        self.cfg.n_chains
    }

    fn loglik(&self, loc: &[f64], s1: f64, s2: f64, w: f64) -> f64 {
        let st = State { beta: Vec::new(), s1, s2, w };
        let mut total = 0.0;
        for (&yi, &li) in self.y.iter().zip(loc) {
            total += st.at_location(li).logpdf(yi);
        }
        total
    }

    fn initial_state<R: Rng + ?Sized>(&self, chain: usize, rng: &mut R) -> State {
        let p = self.x.cols();
        if let Some(s) = self.starts.get(chain) {
            return s.clone();
        }
        // prior draws when the data cannot seed a start
        let beta = (0..p)
            .map(|_| {
                let e: f64 = StandardNormal.sample(rng);
                self.prior.location_mean + sqrt(self.prior.location_var) * e
            })
            .collect();
        let draw_scale = |rng: &mut R| {
            let g = rand_distr::Gamma::new(self.prior.scale_shape, 1.0 / self.prior.scale_rate)
                .map(|d| d.sample(rng))
                .unwrap_or(1.0);
            (1.0 / g).clamp(1e-6, SCALE_MAX)
        };
        let s1 = draw_scale(rng);
        let s2 = draw_scale(rng);
        State { beta, s1, s2, w: rng.random() }
    }

    /// Run chain `chain` with its own RNG stream.
    pub fn run_chain(&self, chain: usize) -> Result<ChainDraws> {
        let cfg = &self.cfg;
        let mut rng = crate::rng_stream(cfg.seed, chain as u64 + 1);
        let n = self.y.len();
        let p = self.x.cols();
        let n_moves = p + 2;
        let mut st = self.initial_state(chain, &mut rng);
        let mut loc = if n > 0 { self.x.mul_vec(&st.beta) } else { Vec::new() };
        let mut log_tau: Vec<f64> = self.tau0.iter().map(|t| log(*t)).collect();
        let mut accepted = vec![0usize; n_moves];
        let mut proposed = vec![0usize; n_moves];
        let mut draws = Vec::with_capacity(cfg.retained_per_chain());
        let mut column = vec![0.0; n];

        for iter in 0..cfg.n_iter {
            let burning = iter < cfg.burn_in;
            // Steps 1-2
            let mut ones = 0usize;
            for (&li, &yi) in loc.iter().zip(self.y.iter()) {
                let t = st.at_location(li).responsibility(yi);
                if rng.random::<f64>() < t {
                    ones += 1;
                }
            }
            st.w = draw_beta(1.0 + ones as f64, n as f64 + 1.0 - ones as f64, &mut rng);
            let mut ll = self.loglik(&loc, st.s1, st.s2, st.w);
            if !ll.is_finite() {
                return Err(Error::NonFiniteChain { chain, iteration: iter });
            }
            let gain = if burning && cfg.adapt { libm::pow(iter as f64 + 1.0, -0.6) } else { 0.0 };

            // Step 3
            for j in 0..p {
                let e: f64 = StandardNormal.sample(&mut rng);
                let delta = exp(log_tau[j]) * e;
                let old = st.beta[j];
                let prop = old + delta;
                for i in 0..n {
                    column[i] = loc[i] + delta * self.x[(i, j)];
                }
                let ll_new = self.loglik(&column, st.s1, st.s2, st.w);
                let ratio = ll_new - ll + self.prior.log_location(prop) - self.prior.log_location(old);
                let ok = ll_new.is_finite() && accept(&mut rng, ratio);
                if ok {
                    st.beta[j] = prop;
                    loc.copy_from_slice(&column);
                    ll = ll_new;
                }
                self.record(j, ok, burning, gain, &mut log_tau, &mut accepted, &mut proposed);
            }

            // Step 4
            for comp in 1..=2 {
                let k = p + comp - 1;
                let e: f64 = StandardNormal.sample(&mut rng);
                let old = if comp == 1 { st.s1 } else { st.s2 };
                let prop = old + exp(log_tau[k]) * e;
                let ok = if prop > 0.0 && prop <= SCALE_MAX {
                    let (s1, s2) = if comp == 1 { (prop, st.s2) } else { (st.s1, prop) };
                    let ll_new = self.loglik(&loc, s1, s2, st.w);
                    let ratio = ll_new - ll + self.prior.log_scale(prop) - self.prior.log_scale(old);
                    if ll_new.is_finite() && accept(&mut rng, ratio) {
                        st.s1 = s1;
                        st.s2 = s2;
                        ll = ll_new;
                        true
                    } else {
                        false
                    }
                } else {
                    false
                };
                self.record(k, ok, burning, gain, &mut log_tau, &mut accepted, &mut proposed);
            }

            if !ll.is_finite() {
                return Err(Error::NonFiniteChain { chain, iteration: iter });
            }
            if !burning && (iter - cfg.burn_in).is_multiple_of(cfg.thin) {
                let mut row = st.beta.clone();
                row.extend_from_slice(&[st.s1, st.s2, st.w]);
                draws.push(row);
            }
        }
        let accept_rates = accepted
            .iter()
            .zip(&proposed)
            .map(|(&a, &p)| if p > 0 { a as f64 / p as f64 } else { f64::NAN })
            .collect();
        Ok(ChainDraws { draws, accept_rates, final_tau: log_tau.iter().map(|t| exp(*t)).collect() })
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        k: usize,
        ok: bool,
        burning: bool,
        gain: f64,
        log_tau: &mut [f64],
        accepted: &mut [usize],
        proposed: &mut [usize],
    ) {
        if burning {
            if self.cfg.adapt {
                let a = if ok { 1.0 } else { 0.0 };
                log_tau[k] = (log_tau[k] + gain * (a - self.cfg.target_accept)).clamp(-30.0, 30.0);
            }
        } else {
            proposed[k] += 1;
            if ok {
                accepted[k] += 1;
            }
        }
    }

    /// Pool chain outputs, drop failed chains, compute diagnostics and
    /// summaries.
    pub fn assemble(&self, chains: Vec<Result<ChainDraws>>) -> Result<PosteriorDraws> {
        let mut ok = Vec::new();
        let mut failed_chains = Vec::new();
        let mut first_err = None;
        for c in chains {
            match c {
                Ok(d) => ok.push(d),
                Err(e) => {
                    failed_chains.push(e.to_string());
                    first_err.get_or_insert(e);
                }
            }
        }
        if ok.is_empty() {
            return Err(first_err.unwrap_or_else(|| Error::Numerical("no chains".into())));
        }
        let k = self.names.len();
        let per = ok[0].draws.len();
        let mut data = Vec::with_capacity(ok.len() * per * k);
        for c in &ok {
            for row in &c.draws {
                data.extend_from_slice(row);
            }
        }
        let draws = Matrix::from_row_major(ok.len() * per, k, data);
        let n_moves = ok[0].accept_rates.len();
        let accept_rates = (0..n_moves)
            .map(|m| ok.iter().map(|c| c.accept_rates[m]).sum::<f64>() / ok.len() as f64)
            .collect();
        let mut rhat = Vec::with_capacity(k);
        let mut ess = Vec::with_capacity(k);
        let mut summaries = Vec::with_capacity(k);
        for j in 0..k {
            let per_chain: Vec<Vec<f64>> = ok.iter().map(|c| c.draws.iter().map(|r| r[j]).collect()).collect();
            let refs: Vec<&[f64]> = per_chain.iter().map(|c| c.as_slice()).collect();
            let r = if ok.len() * per >= 8 { split_rhat(&refs) } else { f64::NAN };
            let e = if per >= 8 { ess_bulk(&refs) } else { f64::NAN };
            rhat.push(r);
            ess.push(e);
            let mut pooled: Vec<f64> = per_chain.into_iter().flatten().collect();
            summaries.push(summarize(&self.names[j], &mut pooled, r, e));
        }
        Ok(PosteriorDraws {
            names: self.names.clone(),
            n_chains: ok.len(),
            draws_per_chain: per,
            draws,
            accept_rates,
            rhat,
            ess_bulk: ess,
            summaries,
            failed_chains,
        })
    }
}

fn summarize(name: &str, pooled: &mut [f64], rhat: f64, ess: f64) -> ParamSummary {
    let mean = crate::data::mean(pooled);
    let sdv = sd(pooled);
    pooled.sort_by(f64::total_cmp);
    let q = |p: f64| quantile_sorted(pooled, p);
    ParamSummary {
        name: name.to_string(),
        mean,
        se_mean: if ess > 0.0 { sdv / sqrt(ess) } else { f64::NAN },
        sd: sdv,
        median: q(0.5),
        q025: q(0.025),
        q05: q(0.05),
        q25: q(0.25),
        q75: q(0.75),
        q95: q(0.95),
        q975: q(0.975),
        rhat,
        ess_bulk: ess,
    }
}

/// Human-readable one-line summary.
pub fn describe(d: &PosteriorDraws) -> String {
    let mut s = String::new();
    for p in &d.summaries {
        s.push_str(&format!("{}: median={:.4} sd={:.4} rhat={:.3}; ", p.name, p.median, p.sd, p.rhat));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::fg_sample;

    #[test]
    fn config_validation() {
        let d = McmcConfig::default();
        assert!(McmcConfig { burn_in: d.n_iter, ..d.clone() }.validate().is_err());
        assert!(McmcConfig { tau: Some([1.0, 0.0, 1.0]), ..d }.validate().is_err());
        assert!(PriorSpec { location_var: 0.0, ..PriorSpec::default() }.validate().is_err());
    }

    #[test]
    fn z_all_ones_when_w_is_one() {
        let y = fg_sample(&FgParams::new(0.0, 1.0, 1.0, 0.5).unwrap(), 50, 1).unwrap();
        let p = FgParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        let mut rng = crate::rng_stream(1, 0);
        assert!(gibbs_z_update(&y, &p, &mut rng).iter().all(|&z| z));
    }

    #[test]
    fn zero_step_is_accepted() {
        let y = fg_sample(&FgParams::new(0.0, 1.0, 2.0, 0.5).unwrap(), 30, 2).unwrap();
        let p = FgParams::new(0.3, 1.0, 2.0, 0.5).unwrap();
        let prior = PriorSpec::default();
        let mut rng = crate::rng_stream(3, 0);
        for _ in 0..100 {
            assert_eq!(mh_location_update(&y, &p, 0.0, &prior, &mut rng), (0.3, true));
            assert_eq!(mh_scale_update(&y, &p, 2, 0.0, &prior, &mut rng), (2.0, true));
        }
    }

    #[test]
    fn negative_scale_proposals_rejected() {
        let y = fg_sample(&FgParams::new(0.0, 1.0, 2.0, 0.5).unwrap(), 30, 2).unwrap();
        let p = FgParams::new(0.0, 1e-3, 2.0, 0.5).unwrap();
        let prior = PriorSpec::default();
        assert_eq!(scale_log_ratio(&y, &p, 1, -0.5, &prior), f64::NEG_INFINITY);
        assert_eq!(scale_log_ratio(&y, &p, 2, 0.0, &prior), f64::NEG_INFINITY);
    }

    #[test]
    fn identical_seeds_identical_draws() {
        let y = fg_sample(&FgParams::new(0.0, 1.0, 2.0, 0.5).unwrap(), 40, 5).unwrap();
        let cfg = McmcConfig { n_iter: 600, burn_in: 200, n_chains: 2, seed: 9, ..McmcConfig::default() };
        let a = run_mcmc(&y, &PriorSpec::default(), &cfg).unwrap();
        let b = run_mcmc(&y, &PriorSpec::default(), &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.draws.rows(), 2 * 400);
        for r in 0..a.draws.rows() {
            let row = a.draws.row(r);
            assert!(FgParams::new(row[0], row[1], row[2], row[3]).is_ok());
        }
    }

    #[test]
    fn thinning_counts() {
        let cfg = McmcConfig { n_iter: 1000, burn_in: 100, thin: 7, ..McmcConfig::default() };
        assert_eq!(cfg.retained_per_chain(), 129);
    }
}
