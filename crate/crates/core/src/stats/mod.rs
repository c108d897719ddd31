//! Popularity binning, kernel density curves and two-sample tests.

mod anderson;
mod binning;
mod kde;
mod mann_whitney;

pub use anderson::{ad_statistic, ad_test_2sample, table_p_value, AdResult, PMethod, PERMUTATION_TIE_EPS};
pub use binning::{bin_by_popularity, Bin, PopularityBinning};
pub use kde::{
    kde, linspace, padded_grid, DensityCurve, DEFAULT_BANDWIDTH, DEFAULT_GRID_PAD,
    DEFAULT_GRID_POINTS,
};
pub use mann_whitney::{mann_whitney, MwResult, EXACT_MAX_N};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Bonferroni adjustment: `min(1, m·p)` for each p.
pub fn bonferroni(pvals: &[f64], m: usize) -> Vec<f64> {
    pvals.iter().map(|p| (p * m as f64).min(1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub label: String,
    pub n: usize,
    pub mean: Option<f64>,
    /// Absent for empty bins. Left out of JSON; curves go to CSV.
    #[serde(skip_serializing, default)]
    pub curve: Option<DensityCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub standardized: f64,
    pub p_raw: f64,
    pub p_bonferroni: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub bandwidth: f64,
    pub bins: Vec<BinSummary>,
    pub tests: Vec<PairwiseTest>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    pub bandwidth: f64,
    pub grid_points: usize,
    pub grid_pad: f64,
    pub p_method: PMethod,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            bandwidth: DEFAULT_BANDWIDTH,
            grid_points: DEFAULT_GRID_POINTS,
            grid_pad: DEFAULT_GRID_PAD,
            p_method: PMethod::Table,
        }
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Per-bin means and densities on one shared grid, plus Anderson-Darling
/// tests between every pair of bins. The Bonferroni factor is the number of
/// bin pairs; pairs involving a bin with fewer than 2 samples are skipped.
pub fn bin_summary(bins: &[Bin], opts: &SummaryOptions) -> Result<DistributionSummary> {
    let grid = padded_grid(
        bins.iter().flat_map(|b| &b.samples),
        opts.bandwidth,
        opts.grid_pad,
        opts.grid_points,
    );
    let mut notices = Vec::new();
    let mut summaries = Vec::with_capacity(bins.len());
    for b in bins {
        let curve = match &grid {
            Some(g) if !b.samples.is_empty() => Some(kde(&b.samples, opts.bandwidth, g)?),
            _ => None,
        };
        if b.samples.len() < 2 && bins.len() > 1 {
            notices.push(format!(
                "bin {} has {} sample(s); tests involving it skipped",
                b.label,
                b.samples.len()
            ));
        }
        summaries.push(BinSummary {
            label: b.label.clone(),
            n: b.samples.len(),
            mean: mean(&b.samples),
            curve,
        });
    }

    let pairs: Vec<(usize, usize)> = (0..bins.len())
        .flat_map(|i| (i + 1..bins.len()).map(move |j| (i, j)))
        .collect();
    let m = pairs.len();
    let tests = pairs
        .par_iter()
        .filter(|&&(i, j)| bins[i].samples.len() >= 2 && bins[j].samples.len() >= 2)
        .map(|&(i, j)| {
            let r = ad_test_2sample(&bins[i].samples, &bins[j].samples, opts.p_method)?;
            Ok(PairwiseTest {
                a: bins[i].label.clone(),
                b: bins[j].label.clone(),
                a2: r.a2,
                standardized: r.standardized,
                p_raw: r.p,
                p_bonferroni: bonferroni(&[r.p], m)[0],
                exact: r.exact,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DistributionSummary {
        bandwidth: opts.bandwidth,
        bins: summaries,
        tests,
        notices,
    })
}

/// Writes `bin,grid_x,density` rows for every bin that has a curve.
pub fn write_distribution_csv<W: std::io::Write>(summary: &DistributionSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "grid_x", "density"])?;
    for b in &summary.bins {
        if let Some(c) = &b.curve {
            for (x, d) in c.grid.iter().zip(&c.density) {
                w.write_record([b.label.as_str(), &x.to_string(), &d.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
