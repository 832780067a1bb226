//! Empirical KL divergence and the Monte Carlo Kolmogorov–Smirnov test.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::fabs;

use crate::data::DataSample;
use crate::dist::FgParams;
use crate::ecm::{fit_ecm, EcmConfig};
use crate::normal_mix::{fit_normal_mixture_em, NormalMixParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KlResult {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub d_kl: f64,
    pub n_eval: usize,
    pub model_tag: String,
    /// Set when the fitted density vanished at an oracle point.
    pub diagnostic: Option<String>,
}

/// Mean of `log p(x) - log p̂(x)` over an oracle sample from the truth.
pub fn empirical_kl<P, Q>(true_logpdf: P, fitted_logpdf: Q, oracle: &[f64], model_tag: &str) -> KlResult
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let mut sum = 0.0;
    let mut diagnostic = None;
    for &x in oracle {
        let lq = fitted_logpdf(x);
        if lq == f64::NEG_INFINITY || lq.is_nan() {
            diagnostic = Some(format!("fitted density is zero at x = {x}"));
            sum = f64::INFINITY;
            break;
        }
        sum += true_logpdf(x) - lq;
    }
    let d_kl = if oracle.is_empty() { f64::NAN } else { sum / oracle.len() as f64 };
    KlResult { d_kl, n_eval: oracle.len(), model_tag: model_tag.to_string(), diagnostic }
}

/// `sup |F_n - F|` for the empirical CDF of `values`.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// A fitted model usable in the parametric bootstrap.
pub trait BootstrapModel: Sized {
    fn cdf(&self, x: f64) -> f64;
    fn sample(&self, n: usize, rng: &mut crate::Rng) -> Vec<f64>;
    /// Re-estimate on a bootstrap sample; `Err` drops the replicate.
    fn refit(&self, y: &DataSample, seed: u64) -> Result<Self>;
}

impl BootstrapModel for FgParams {
    fn cdf(&self, x: f64) -> f64 {
        FgParams::cdf(self, x)
    }
    fn sample(&self, n: usize, rng: &mut crate::Rng) -> Vec<f64> {
        self.draw_n(rng, n)
    }
    fn refit(&self, y: &DataSample, seed: u64) -> Result<Self> {
        let fit = fit_ecm(y, &EcmConfig { seed, ..EcmConfig::default() })?;
        if !fit.converged {
            return Err(Error::Numerical("ECM refit did not converge".into()));
        }
        Ok(fit.params)
    }
}

impl BootstrapModel for NormalMixParams {
    fn cdf(&self, x: f64) -> f64 {
        NormalMixParams::cdf(self, x)
    }
    fn sample(&self, n: usize, rng: &mut crate::Rng) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
    fn refit(&self, y: &DataSample, seed: u64) -> Result<Self> {
        let fit = fit_normal_mixture_em(y, &EcmConfig { seed, ..EcmConfig::default() })?;
        if !fit.converged {
            return Err(Error::Numerical(fit.failure.unwrap_or_else(|| "EM refit failed".into())));
        }
        Ok(fit.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KsConfig {
    pub n_boot: usize,
    /// Re-estimate the model on each bootstrap sample.
    pub refit: bool,
    pub seed: u64,
}

impl Default for KsConfig {
    fn default() -> Self {
        KsConfig { n_boot: 999, refit: true, seed: 0 }
    }
}

impl KsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_boot < 999 {
            return Err(Error::domain(format!("n_boot must be at least 999, got {}", self.n_boot)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KsTestResult {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub statistic: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_float"))]
    pub p_value: f64,
    pub n_boot: usize,
    pub n_dropped: usize,
    pub warning: Option<String>,
}

/// Statistic of bootstrap replicate `b`, or `None` when the refit fails.
pub fn ks_replicate<M: BootstrapModel>(model: &M, n: usize, cfg: &KsConfig, b: usize) -> Option<f64> {
    let mut rng = crate::rng_stream(cfg.seed, b as u64 + 1);
    let sample = model.sample(n, &mut rng);
    if !cfg.refit {
        return Some(ks_statistic(&sample, |x| model.cdf(x)));
    }
    let ds = DataSample::from_values(sample).ok()?;
    let refit = model.refit(&ds, cfg.seed.wrapping_add(b as u64)).ok()?;
    Some(ks_statistic(ds.values(), |x| refit.cdf(x)))
}

/// p-value `(1 + #{T_b >= T}) / (1 + B_used)` from replicate statistics.
pub fn ks_combine(statistic: f64, replicates: &[Option<f64>]) -> KsTestResult {
    let used: Vec<f64> = replicates.iter().flatten().copied().collect();
    let n_dropped = replicates.len() - used.len();
    let exceed = used.iter().filter(|&&t| t >= statistic).count();
    let p_value = (1.0 + exceed as f64) / (1.0 + used.len() as f64);
    let warning = if n_dropped * 10 > replicates.len() {
        Some(format!("{n_dropped} of {} bootstrap refits failed", replicates.len()))
    } else {
        None
    };
    KsTestResult { statistic, p_value, n_boot: replicates.len(), n_dropped, warning }
}

/// One-sample KS test with a parametric-bootstrap p-value.
pub fn ks_test_mc<M: BootstrapModel>(y: &DataSample, model: &M, cfg: &KsConfig) -> Result<KsTestResult> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let stat = ks_statistic(y.values(), |x| model.cdf(x));
    let reps: Vec<Option<f64>> = (0..cfg.n_boot).map(|b| ks_replicate(model, y.len(), cfg, b)).collect();
    Ok(ks_combine(stat, &reps))
}

/// Largest absolute CDF gap, used by tests as a coarse agreement check.
pub fn max_cdf_gap<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(grid: &[f64], f: F, g: G) -> f64 {
    grid.iter().map(|&x| fabs(f(x) - g(x))).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{normal_cdf, normal_logpdf};

    #[test]
    fn kl_of_identical_densities_is_zero() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 / 10.0 - 5.0).collect();
        let r = empirical_kl(|v| normal_logpdf(v, 0.0, 1.0), |v| normal_logpdf(v, 0.0, 1.0), &x, "same");
        assert_eq!(r.d_kl, 0.0);
    }

    #[test]
    fn kl_against_gaussian_closed_form() {
        let mut rng = crate::rng_stream(5, 0);
        let x: Vec<f64> = (0..50_000).map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng)).collect();
        let r = empirical_kl(|v| normal_logpdf(v, 0.0, 1.0), |v| normal_logpdf(v, 0.0, libm::sqrt(2.0)), &x, "n02");
        let exact = 0.5 * (0.5 - 1.0 + libm::log(2.0));
        assert!((exact - 0.0966).abs() < 1e-4);
        assert!((r.d_kl - exact).abs() < 0.01, "{}", r.d_kl);
    }

    #[test]
    fn kl_infinite_when_fitted_vanishes() {
        let r = empirical_kl(|_| 0.0, |v| if v > 0.0 { 0.0 } else { f64::NEG_INFINITY }, &[1.0, -1.0], "half");
        assert_eq!(r.d_kl, f64::INFINITY);
        assert!(r.diagnostic.is_some());
    }

    #[test]
    fn ks_statistic_bounds_and_invariance() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 - 25.0) / 10.0).collect();
        let d = ks_statistic(&x, normal_cdf);
        assert!((0.0..=1.0).contains(&d));
        let ex: Vec<f64> = x.iter().map(|v| libm::exp(*v)).collect();
        let d2 = ks_statistic(&ex, |v| normal_cdf(libm::log(v)));
        assert!((d - d2).abs() < 1e-12);
    }

    #[test]
    fn small_n_boot_rejected() {
        let y = DataSample::from_values(alloc::vec![0.0, 1.0, 2.0]).unwrap();
        let p = FgParams::new(0.0, 1.0, 1.0, 0.5).unwrap();
        assert!(ks_test_mc(&y, &p, &KsConfig { n_boot: 10, ..KsConfig::default() }).is_err());
    }

    #[test]
    fn combine_counts_drops() {
        let mut reps: Vec<Option<f64>> = (0..100).map(|i| Some(i as f64 / 100.0)).collect();
        for r in reps.iter_mut().take(20) {
            *r = None;
        }
        let res = ks_combine(0.5, &reps);
        assert_eq!(res.n_dropped, 20);
        assert!(res.warning.is_some());
        assert!((res.p_value - 51.0 / 81.0).abs() < 1e-15);
    }
}
