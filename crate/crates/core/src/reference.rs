//! Data-generating densities for the misspecification experiments.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{fabs, log, sqrt};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Open01, StandardNormal};

use crate::dist::max_logpdf;
use crate::special::{log_add_exp, student_t_logpdf};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Reference {
    Laplace { loc: f64, scale: f64 },
    /// `w * Gumbel_max(loc, s1) + (1 - w) * Gumbel_max(loc, s2)`.
    GumbelMaxMix { loc: f64, s1: f64, s2: f64, w: f64 },
    StudentT { df: f64 },
}

impl Reference {
    pub const E2: Reference = Reference::Laplace { loc: 0.0, scale: 2.0 };
    pub const E3: Reference = Reference::GumbelMaxMix { loc: 0.0, s1: 2.0, s2: 6.0, w: 0.5 };
    pub const E4: Reference = Reference::StudentT { df: 5.0 };

    /// Accepts `E2`/`E3`/`E4` or `laplace(0,2)`, `gumbelmax_mix(0;2,6;0.5)`,
    /// `student_t(5)`.
    pub fn parse(tag: &str) -> Result<Self> {
        let t: String = tag.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        match t.as_str() {
            "e2" | "laplace(0,2)" => Ok(Self::E2),
            "e3" | "gumbelmax_mix(0;2,6;0.5)" => Ok(Self::E3),
            "e4" | "student_t(5)" => Ok(Self::E4),
            _ => Err(Error::domain(format!("unknown reference density '{tag}'"))),
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            Reference::Laplace { loc, scale } => format!("laplace({loc},{scale})"),
            Reference::GumbelMaxMix { loc, s1, s2, w } => format!("gumbelmax_mix({loc};{s1},{s2};{w})"),
            Reference::StudentT { df } => format!("student_t({df})"),
        }
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        match *self {
            Reference::Laplace { loc, scale } => -log(2.0 * scale) - fabs(x - loc) / scale,
            Reference::GumbelMaxMix { loc, s1, s2, w } => {
                log_add_exp(log(w) + max_logpdf(x, loc, s1), log(1.0 - w) + max_logpdf(x, loc, s2))
            }
            Reference::StudentT { df } => student_t_logpdf(x, df),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Reference::Laplace { loc, scale } => {
                let u: f64 = rng.sample(Open01);
                let u = u - 0.5;
                loc - scale * u.signum() * log(1.0 - 2.0 * fabs(u))
            }
            Reference::GumbelMaxMix { loc, s1, s2, w } => {
                let s = if rng.random::<f64>() < w { s1 } else { s2 };
                let u: f64 = rng.sample(Open01);
                loc - s * log(-log(u))
            }
            Reference::StudentT { df } => {
                let z: f64 = StandardNormal.sample(rng);
                let c = ChiSquared::new(df).map(|d| d.sample(rng)).unwrap_or(df);
                z / sqrt(c / df)
            }
        }
    }

    pub fn draw_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::exp;

    #[test]
    fn known_density_values() {
        assert!((exp(Reference::E2.logpdf(0.0)) - 0.25).abs() < 1e-15);
        let e3 = 0.5 * (exp(-1.0) / 2.0) + 0.5 * (exp(-1.0) / 6.0);
        assert!((exp(Reference::E3.logpdf(0.0)) - e3).abs() < 1e-14);
        assert!((e3 - 0.1226).abs() < 1e-4);
    }

    #[test]
    fn tags_round_trip() {
        for r in [Reference::E2, Reference::E3, Reference::E4] {
            assert_eq!(Reference::parse(&r.tag()).unwrap(), r);
        }
        assert!(Reference::parse("cauchy").is_err());
    }

    #[test]
    fn laplace_sample_moments() {
        let mut rng = crate::rng_stream(1, 0);
        let x = Reference::E2.draw_n(&mut rng, 200_000);
        let m = crate::data::mean(&x);
        let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / x.len() as f64;
        assert!(m.abs() < 0.03 && (v - 8.0).abs() < 0.15, "{m} {v}");
    }
}
