//! The flexible Gumbel distribution.
//!
//! Component 1 is the Gumbel distribution for the maximum (right-skewed),
//! component 2 the Gumbel distribution for the minimum (left-skewed). Both
//! have mode `theta`, so the mixture does too.

use alloc::format;
use alloc::vec::Vec;

use libm::{exp, expm1, log, sqrt};
use rand::Rng;
use rand_distr::Open01;

use crate::consts::{APERY, EULER_GAMMA, PI};
use crate::data::{DataSample, Source};
use crate::optim::brent_root;
use crate::special::log_add_exp;
use crate::{Error, Result};

/// Absolute tolerance on the CDF residual for [`FgParams::quantile`].
pub const QUANTILE_TOL: f64 = 1e-10;

// Unchecked component kernels. Callers guarantee sigma > 0.

#[inline]
pub(crate) fn max_logpdf(x: f64, theta: f64, sigma: f64) -> f64 {
    let z = (x - theta) / sigma;
    -log(sigma) - z - exp(-z)
}

#[inline]
pub(crate) fn min_logpdf(x: f64, theta: f64, sigma: f64) -> f64 {
    let u = (x - theta) / sigma;
    -log(sigma) + u - exp(u)
}

#[inline]
pub(crate) fn max_cdf(x: f64, theta: f64, sigma: f64) -> f64 {
    exp(-exp(-(x - theta) / sigma))
}

#[inline]
pub(crate) fn min_cdf(x: f64, theta: f64, sigma: f64) -> f64 {
    -expm1(-exp((x - theta) / sigma))
}

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("scale must be positive and finite, got {sigma}")))
    }
}

/// Gumbel-for-maximum density with mode `theta` and scale `sigma`.
pub fn gumbel_max_pdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    gumbel_max_logpdf(x, theta, sigma).map(exp)
}

pub fn gumbel_max_logpdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(max_logpdf(x, theta, sigma))
}

pub fn gumbel_max_cdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(max_cdf(x, theta, sigma))
}

/// Gumbel-for-minimum density; the mirror image of [`gumbel_max_pdf`]
/// about `theta`.
pub fn gumbel_min_pdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    gumbel_min_logpdf(x, theta, sigma).map(exp)
}

pub fn gumbel_min_logpdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(min_logpdf(x, theta, sigma))
}

pub fn gumbel_min_cdf(x: f64, theta: f64, sigma: f64) -> Result<f64> {
    check_scale(sigma)?;
    Ok(min_cdf(x, theta, sigma))
}

/// Parameters `(theta, sigma1, sigma2, w)` of an FG distribution.
///
/// `w` is the weight on the Gumbel-for-maximum component. Construction
/// validates; every method assumes a valid value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FgParams {
    theta: f64,
    sigma1: f64,
    sigma2: f64,
    w: f64,
}

/// Mean, variance and standardized shape of an FG distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
    pub fourth_central: f64,
    pub skewness: f64,
    /// Non-excess kurtosis (a Gumbel has 5.4).
    pub kurtosis: f64,
}

impl FgParams {
    pub fn new(theta: f64, sigma1: f64, sigma2: f64, w: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::domain(format!("mode must be finite, got {theta}")));
        }
        check_scale(sigma1)?;
        check_scale(sigma2)?;
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::domain(format!("weight must lie in [0, 1], got {w}")));
        }
        Ok(FgParams { theta, sigma1, sigma2, w })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// `[theta, sigma1, sigma2, w]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.theta, self.sigma1, self.sigma2, self.w]
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Same distribution with a different mode.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(theta, self.sigma1, self.sigma2, self.w)
    }

    /// Distribution of `2 theta - Y`: swaps the components.
    pub fn reflect(&self) -> Self {
        FgParams { theta: self.theta, sigma1: self.sigma2, sigma2: self.sigma1, w: 1.0 - self.w }
    }

    /// `(log(w f1(x)), log((1-w) f2(x)))`.
    #[inline]
    pub fn weighted_component_logpdfs(&self, x: f64) -> (f64, f64) {
        let a = if self.w > 0.0 { log(self.w) + max_logpdf(x, self.theta, self.sigma1) } else { f64::NEG_INFINITY };
        let b = if self.w < 1.0 {
            libm::log1p(-self.w) + min_logpdf(x, self.theta, self.sigma2)
        } else {
            f64::NEG_INFINITY
        };
        (a, b)
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        let (a, b) = self.weighted_component_logpdfs(x);
        log_add_exp(a, b)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        exp(self.logpdf(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mut c = 0.0;
        if self.w > 0.0 {
            c += self.w * max_cdf(x, self.theta, self.sigma1);
        }
        if self.w < 1.0 {
            c += (1.0 - self.w) * min_cdf(x, self.theta, self.sigma2);
        }
        c.clamp(0.0, 1.0)
    }

    /// Posterior probability that `x` came from the Gumbel-for-maximum
    /// component.
    #[inline]
    pub fn responsibility(&self, x: f64) -> f64 {
        let (a, b) = self.weighted_component_logpdfs(x);
        if a == f64::NEG_INFINITY {
            return 0.0;
        }
        if b == f64::NEG_INFINITY {
            return 1.0;
        }
        1.0 / (1.0 + exp(b - a))
    }

    /// `x` with `|F(x) - q| <= 1e-10`.
    ///
    /// The bracket starts at `theta ± max(sigma1, sigma2)` and doubles its
    /// half-width until it straddles `q`; Brent's method then refines.
    /// Degenerate weights use the closed-form Gumbel quantiles.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        if self.w == 1.0 {
            return Ok(self.theta - self.sigma1 * log(-log(q)));
        }
        if self.w == 0.0 {
            return Ok(self.theta + self.sigma2 * log(-libm::log1p(-q)));
        }
        let scale = self.sigma1.max(self.sigma2);
        let mut half = scale;
        let mut lo = self.theta - half;
        let mut hi = self.theta + half;
        while self.cdf(lo) > q || self.cdf(hi) < q {
            half *= 2.0;
            if !half.is_finite() || half > 1e300 {
                return Err(Error::Numerical(format!("could not bracket quantile {q}")));
            }
            if self.cdf(lo) > q {
                lo = self.theta - half;
            }
            if self.cdf(hi) < q {
                hi = self.theta + half;
            }
        }
        let f = |x: f64| self.cdf(x) - q;
        let x = brent_root(f, lo, hi, 0.01 * QUANTILE_TOL, 0.0, 500)
            .ok_or_else(|| Error::Numerical(format!("quantile solver failed at {q}")))?;
        Ok(x)
    }

    pub fn median(&self) -> f64 {
        // q = 0.5 is always a valid level
        self.quantile(0.5).unwrap_or(self.theta)
    }

    /// Closed-form moments.
    ///
    /// Each Gumbel component has mean `±sigma*gamma` relative to the mode,
    /// central moments `sigma² pi²/6`, `±2 zeta(3) sigma³` and
    /// `(3/20) pi⁴ sigma⁴`; the mixture's central moments follow from the
    /// binomial expansion of `(Y_k - mu_k + mu_k - mu)^j`.
    pub fn moments(&self) -> MomentSummary {
        let (w, s1, s2) = (self.w, self.sigma1, self.sigma2);
        let wb = 1.0 - w;
        let m1 = s1 * EULER_GAMMA;
        let m2 = -s2 * EULER_GAMMA;
        let mu = w * m1 + wb * m2;
        let c1 = [1.0, 0.0, s1 * s1 * PI * PI / 6.0, 2.0 * APERY * s1 * s1 * s1, 0.15 * (PI * PI * PI * PI) * (s1 * s1 * s1 * s1)];
        let c2 = [1.0, 0.0, s2 * s2 * PI * PI / 6.0, -2.0 * APERY * s2 * s2 * s2, 0.15 * (PI * PI * PI * PI) * (s2 * s2 * s2 * s2)];
        let central = |j: usize| -> f64 {
            let mut total = 0.0;
            for k in 0..=j {
                let binom = BINOM[j][k];
                total += binom * (w * c1[k] * libm::pow(m1 - mu, (j - k) as f64) + wb * c2[k] * libm::pow(m2 - mu, (j - k) as f64));
            }
            total
        };
        let variance = central(2);
        let third_central = central(3);
        let fourth_central = central(4);
        MomentSummary {
            mean: self.theta + mu,
            variance,
            third_central,
            fourth_central,
            skewness: third_central / (variance * sqrt(variance)),
            kurtosis: fourth_central / (variance * variance),
        }
    }

    /// One draw by composition: pick a component with probability `w`, then
    /// invert its CDF.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let pick_max = rng.random::<f64>() < self.w;
        let u: f64 = rng.sample(Open01);
        let g = log(-log(u));
        if pick_max {
            self.theta - self.sigma1 * g
        } else {
            self.theta + self.sigma2 * g
        }
    }

    pub fn draw_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

const BINOM: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

pub fn fg_pdf(x: f64, p: &FgParams) -> f64 {
    p.pdf(x)
}

pub fn fg_logpdf(x: f64, p: &FgParams) -> f64 {
    p.logpdf(x)
}

pub fn fg_cdf(x: f64, p: &FgParams) -> f64 {
    p.cdf(x)
}

pub fn fg_quantile(q: f64, p: &FgParams) -> Result<f64> {
    p.quantile(q)
}

pub fn fg_median(p: &FgParams) -> f64 {
    p.median()
}

pub fn fg_moments(p: &FgParams) -> MomentSummary {
    p.moments()
}

/// `n` draws from `p`, deterministic in `seed`.
pub fn fg_sample(p: &FgParams, n: usize, seed: u64) -> Result<DataSample> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut rng = crate::rng_stream(seed, 0);
    DataSample::new(p.draw_n(&mut rng, n), Source::Simulated { seed })
}

/// Observed-data log-likelihood.
pub fn fg_loglik(y: &[f64], p: &FgParams) -> f64 {
    y.iter().map(|&v| p.logpdf(v)).sum()
}

/// Identifiability determinant `F1(y1) F2(y2) - F2(y1) F1(y2)` for the two
/// component CDFs.
pub fn identifiability_determinant(theta: f64, sigma1: f64, sigma2: f64, y1: f64, y2: f64) -> f64 {
    max_cdf(y1, theta, sigma1) * min_cdf(y2, theta, sigma2) - min_cdf(y1, theta, sigma2) * max_cdf(y2, theta, sigma1)
}
