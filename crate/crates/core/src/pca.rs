//! Principal component analysis keeping the fewest components that reach a
//! target fraction of total variance.

use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows per partial covariance block. Fixed so that the floating-point
/// reduction order does not depend on the thread pool.
const COV_BLOCK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k orthonormal rows of length D.
    pub components: Vec<Vec<f64>>,
    /// Variance along each kept component, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// `components · (v − mean)`
    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: v.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(v.iter().zip(&self.mean))
                    .map(|(ci, (vi, mi))| ci * (vi - mi))
                    .sum()
            })
            .collect())
    }

    /// `mean + componentsᵀ · y`
    pub fn inverse_transform(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: y.len(),
            });
        }
        let mut out = self.mean.clone();
        for (c, &yi) in self.components.iter().zip(y) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += ci * yi;
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::input(path, e.to_string()))
    }
}

/// Fits a PCA on `rows` (n × D, covariance normalized by n − 1) and keeps the
/// smallest k whose cumulative explained variance reaches
/// `variance_fraction` of the total.
pub fn fit_pca<R: AsRef<[f64]> + Sync>(rows: &[R], variance_fraction: f64) -> Result<PcaModel> {
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "variance fraction must lie in (0, 1], got {variance_fraction}"
        )));
    }
    fit(rows, Some(variance_fraction))
}

/// Fits a PCA keeping all D components, null directions included.
pub fn fit_pca_full<R: AsRef<[f64]> + Sync>(rows: &[R]) -> Result<PcaModel> {
    fit(rows, None)
}

fn fit<R: AsRef<[f64]> + Sync>(rows: &[R], variance_fraction: Option<f64>) -> Result<PcaModel> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let d = rows[0].as_ref().len();
    if d == 0 {
        return Err(Error::InvalidArgument("PCA input has dimension 0".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.as_ref().len(),
        });
    }

    let mean = column_mean(rows, d);
    let cov = covariance(rows, &mean);
    let eig = SymmetricEigen::new(cov);

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            fix_sign(&mut v);
            (eig.eigenvalues[j].max(0.0), v)
        })
        .collect();
    let top = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    // numerical rank: eigenvalues at round-off level are exact zeros
    for p in &mut pairs {
        if p.0 <= top * 1e-12 {
            p.0 = 0.0;
        }
    }
    pairs.sort_by(|a, b| compare_components(a, b, top));

    let total: f64 = pairs.iter().map(|p| p.0).sum();
    let k = if let Some(variance_fraction) = variance_fraction.filter(|_| total > 0.0) {
        let target = variance_fraction * total;
        let mut cum = 0.0;
        let mut k = d;
        for (i, p) in pairs.iter().enumerate() {
            cum += p.0;
            if cum >= target {
                k = i + 1;
                break;
            }
        }
        k
    } else if variance_fraction.is_some() {
        1
    } else {
        d
    };
    pairs.truncate(k);
    let (explained_variance, components) = pairs.into_iter().unzip();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

fn column_mean<R: AsRef<[f64]> + Sync>(rows: &[R], d: usize) -> Vec<f64> {
    let sums: Vec<Vec<f64>> = rows
        .par_chunks(COV_BLOCK)
        .map(|block| {
            let mut s = vec![0.0; d];
            for r in block {
                for (acc, x) in s.iter_mut().zip(r.as_ref()) {
                    *acc += x;
                }
            }
            s
        })
        .collect();
    let mut mean = vec![0.0; d];
    for s in sums {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    let n = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

fn covariance<R: AsRef<[f64]> + Sync>(rows: &[R], mean: &[f64]) -> DMatrix<f64> {
    let d = mean.len();
    let partials: Vec<DMatrix<f64>> = rows
        .par_chunks(COV_BLOCK)
        .map(|block| {
            let mut centered = DMatrix::<f64>::zeros(block.len(), d);
            for (i, r) in block.iter().enumerate() {
                for (j, (x, m)) in r.as_ref().iter().zip(mean).enumerate() {
                    centered[(i, j)] = x - m;
                }
            }
            centered.tr_mul(&centered)
        })
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for p in partials {
        cov += p;
    }
    cov /= (rows.len() - 1) as f64;
    // exact symmetry for the eigen solver
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    cov
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenvalue descending; eigenvalues equal up to round-off are ordered by
/// their sign-fixed vectors, lexicographically descending.
fn compare_components(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>), scale: f64) -> Ordering {
    let tol = scale * 1e-10;
    if (a.0 - b.0).abs() > tol {
        return b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal);
    }
    for (x, y) in a.1.iter().zip(&b.1) {
        match y.partial_cmp(x) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}
