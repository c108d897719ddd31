use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BANDWIDTH: f64 = 5.0;
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Default grid padding beyond the sample range, in bandwidths.
pub const DEFAULT_GRID_PAD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
}

impl DensityCurve {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

/// `points` evenly spaced values over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Evenly spaced grid over `[min − pad·h, max + pad·h]` of all samples.
pub fn padded_grid<'a>(
    samples: impl IntoIterator<Item = &'a f64>,
    bandwidth: f64,
    pad: f64,
    points: usize,
) -> Option<Vec<f64>> {
    let (lo, hi) = samples
        .into_iter()
        .fold(None, |acc: Option<(f64, f64)>, &x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
        })?;
    Some(linspace(lo - pad * bandwidth, hi + pad * bandwidth, points))
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn kde(samples: &[f64], bandwidth: f64, grid: &[f64]) -> Result<DensityCurve> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("KDE needs at least one sample".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let density = grid
        .par_iter()
        .map(|&x| {
            norm * samples
                .iter()
                .map(|&s| (-(x - s) * (x - s) * inv_two_h2).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve {
        grid: grid.to_vec(),
        density,
        bandwidth,
        n_samples: samples.len(),
    })
}
