//! Observation containers and basic sample statistics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Source {
    Simulated { seed: u64 },
    File { path: String, column: String },
    Other(String),
}

/// An ordered collection of finite observations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DataSample {
    values: Vec<f64>,
    source: Source,
}

impl DataSample {
    /// Rejects non-finite values. An empty sample is allowed (prior-only
    /// MCMC runs use one); fitting routines check their own minimum size.
    pub fn new(values: Vec<f64>, source: Source) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(alloc::format!("observation {i} is not finite")));
        }
        Ok(DataSample { values, source })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Source::Other(String::new()))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn sd(&self) -> f64 {
        sd(&self.values)
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    libm::sqrt(ss / (v.len() - 1) as f64)
}

/// Linear-interpolation quantile (R type 7) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Midpoint of the shortest interval covering half the sorted data; a
/// cheap mode proxy.
pub fn shorth_midpoint(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let k = (n / 2).max(1);
    let mut best = (f64::INFINITY, sorted[0]);
    for i in 0..n.saturating_sub(k) {
        let width = sorted[i + k] - sorted[i];
        if width < best.0 {
            best = (width, 0.5 * (sorted[i] + sorted[i + k]));
        }
    }
    if best.0.is_infinite() {
        sorted[n / 2]
    } else {
        best.1
    }
}
