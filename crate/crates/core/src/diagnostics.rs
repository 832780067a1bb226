//! MCMC convergence diagnostics: rank-normalized split-Rhat and bulk
//! effective sample size.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::special::normal_quantile;

/// Split every chain into two halves (dropping the middle draw of odd
/// lengths).
pub fn split_chains(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replace pooled draws by normal scores of their fractional ranks,
/// `Φ⁻¹((r - 3/8) / (S + 1/4))`, with ties given the average rank.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(Vec::len).sum();
    let mut idx: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (c, chain) in chains.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            idx.push((v, c, i));
        }
    }
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let s = total as f64;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && idx[end].0 == idx[start].0 {
            end += 1;
        }
        // ranks are 1-based; average over the tie block
        let rank = 0.5 * ((start + 1) as f64 + end as f64);
        let z = normal_quantile((rank - 0.375) / (s + 0.25));
        for &(_, c, i) in &idx[start..end] {
            out[c][i] = z;
        }
        start = end;
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Classic potential scale reduction on already-split chains.
pub fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    if m < 2 {
        return f64::NAN;
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return f64::NAN;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = chains.iter().map(|c| var(c)).sum::<f64>() / m as f64;
    let between = n as f64 * var(&means);
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * within + between / n as f64;
    sqrt(var_plus / within)
}

/// Rank-normalized split-Rhat: the larger of the bulk value and the value
/// for draws folded about the median.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let split = split_chains(chains);
    if split.iter().any(|c| c.len() < 2) {
        return f64::NAN;
    }
    let bulk = rhat_basic(&rank_normalize(&split));
    let mut pooled: Vec<f64> = split.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let median = crate::data::quantile_sorted(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|v| fabs(v - median)).collect()).collect();
    let tail = rhat_basic(&rank_normalize(&folded));
    bulk.max(tail)
}

fn autocovariance(c: &[f64], mean: f64, lag: usize) -> f64 {
    let n = c.len();
    let mut s = 0.0;
    for i in 0..n - lag {
        s += (c[i] - mean) * (c[i + lag] - mean);
    }
    s / n as f64
}

/// Effective sample size of (already split / normalized) chains with
/// Geyer's initial monotone positive sequence.
pub fn ess_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    if m == 0 {
        return f64::NAN;
    }
    let n = chains[0].len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return f64::NAN;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov0: Vec<f64> = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu, 0)).collect();
    let nf = n as f64;
    let mean_var = acov0.iter().sum::<f64>() / m as f64 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += var(&means);
    }
    if !(var_plus > 0.0) {
        return (m * n) as f64;
    }
    let rho = |lag: usize| -> f64 {
        let acov = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu, lag)).sum::<f64>() / m as f64;
        1.0 - (mean_var - acov) / var_plus
    };
    let mut rho_even = 1.0;
    let mut rho_odd = rho(1);
    let mut tau_sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n && rho_even + rho_odd > 0.0 {
        let pair = (rho_even + rho_odd).min(prev_pair);
        tau_sum += pair;
        prev_pair = pair;
        t += 2;
        if t + 1 >= n {
            break;
        }
        rho_even = rho(t);
        rho_odd = rho(t + 1);
    }
    let tau = (-1.0 + 2.0 * tau_sum).max(1.0 / libm::log10((m * n) as f64).max(1.0));
    (m * n) as f64 / tau
}

/// Bulk effective sample size: ESS of rank-normalized split chains.
pub fn ess_bulk(chains: &[&[f64]]) -> f64 {
    let split = split_chains(chains);
    ess_basic(&rank_normalize(&split))
}
