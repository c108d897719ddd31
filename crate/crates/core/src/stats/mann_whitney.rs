//! Two-sided Mann-Whitney U test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest pooled size for which the null distribution is enumerated.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwResult {
    /// U of the first sample: pairs with x > y, ties counting one half.
    pub u: f64,
    pub p: f64,
    pub exact: bool,
}

pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<MwResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientData(
            "Mann-Whitney needs both samples non-empty".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample value".into()));
    }
    let (n1, n2) = (x.len(), y.len());
    let n = n1 + n2;
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // doubled midranks keep everything integral
    let mut rank2 = vec![0u64; n];
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1..=j+1, doubled midrank = i + j + 2
        for r in &mut rank2[i..=j] {
            *r = (i + j + 2) as u64;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    let r2_x: u64 = (0..n).filter(|&k| pooled[k].1).map(|k| rank2[k]).sum();
    let u = r2_x as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean = (n1 * n2) as f64 / 2.0;

    if pooled[0].0 == pooled[n - 1].0 {
        return Ok(MwResult { u, p: 1.0, exact: n <= EXACT_MAX_N });
    }

    if n <= EXACT_MAX_N {
        let p = exact_p(&rank2, n1, r2_x);
        return Ok(MwResult { u, p, exact: true });
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_sum / (nf * (nf - 1.0)));
    let dev = ((u - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(MwResult { u, p, exact: false })
}

/// Share of `n1`-subsets whose doubled rank sum is at least as far from its
/// mean as the observed one.
fn exact_p(rank2: &[u64], n1: usize, observed: u64) -> f64 {
    let max_sum: usize = rank2.iter().map(|&r| r as usize).sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; n1 + 1];
    counts[0][0] = 1;
    for &r in rank2 {
        let r = r as usize;
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                counts[k][s] += counts[k - 1][s - r];
            }
        }
    }
    // mean of the doubled rank sum is n1 (N + 1); compare doubled deviations
    let center = (n1 * (rank2.len() + 1)) as i64;
    let obs_dev = (observed as i64 - center).abs();
    let total: u64 = counts[n1].iter().sum();
    let hits: u64 = counts[n1]
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - center).abs() >= obs_dev)
        .map(|(_, &c)| c)
        .sum();
    hits as f64 / total as f64
}
