//! Thread-pool drivers. `FG_THREADS` caps the number of worker threads.

use fgumbel_core::mcmc::{ChainDraws, Sampler};
use fgumbel_core::metrics::{ks_combine, ks_replicate, ks_statistic, BootstrapModel, KsConfig, KsTestResult};
use fgumbel_core::regression::{modal_bayes_sampler, summarize_modal_bayes, RegressionFit, RegressionSpec};
use fgumbel_core::{DataSample, McmcConfig, PosteriorDraws, PriorSpec};
use rayon::prelude::*;

use crate::error::{AppError, AppResult};

/// Worker count from `FG_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("FG_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Run `f` inside a pool honouring `FG_THREADS`.
pub fn with_pool<T: Send, F: FnOnce() -> T + Send>(f: F) -> AppResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| AppError::Other(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_chains(sampler: &Sampler<'_>) -> Vec<fgumbel_core::Result<ChainDraws>> {
    (0..sampler.n_chains()).into_par_iter().map(|c| sampler.run_chain(c)).collect()
}

/// Posterior sampling with chains in parallel. Output equals the
/// sequential [`fgumbel_core::run_mcmc`] for the same seed.
pub fn run_mcmc_par(y: &DataSample, prior: &PriorSpec, cfg: &McmcConfig) -> AppResult<PosteriorDraws> {
    let sampler = Sampler::distribution(y.values(), *prior, cfg)?;
    let chains = with_pool(|| run_chains(&sampler))?;
    Ok(sampler.assemble(chains)?)
}

pub fn fit_modal_bayes_par(
    spec: &RegressionSpec,
    prior: &PriorSpec,
    cfg: &McmcConfig,
) -> AppResult<(RegressionFit, PosteriorDraws)> {
    let sampler = modal_bayes_sampler(spec, prior, cfg)?;
    let chains = with_pool(|| run_chains(&sampler))?;
    let draws = sampler.assemble(chains)?;
    let fit = summarize_modal_bayes(spec, &draws)?;
    Ok((fit, draws))
}

/// Monte Carlo KS test with bootstrap replicates in parallel.
pub fn ks_test_par<M: BootstrapModel + Sync>(y: &DataSample, model: &M, cfg: &KsConfig) -> AppResult<KsTestResult> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(AppError::Data("empty sample".into()));
    }
    let stat = ks_statistic(y.values(), |x| model.cdf(x));
    let n = y.len();
    let reps: Vec<Option<f64>> =
        with_pool(|| (0..cfg.n_boot).into_par_iter().map(|b| ks_replicate(model, n, cfg, b)).collect())?;
    Ok(ks_combine(stat, &reps))
}
