//! Two-sample Anderson-Darling test (Scholz & Stephens k-sample form with
//! k = 2, midrank version for ties).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance levels of the tabulated critical values.
const TABLE_SIG: [f64; 7] = [0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001];
/// Interpolation coefficients for the critical values: b0 + b1/√m + b2/m.
const TABLE_B0: [f64; 7] = [0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085];
const TABLE_B1: [f64; 7] = [-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615];
const TABLE_B2: [f64; 7] = [-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154];

/// Relative slack when deciding whether a permuted statistic is at least as
/// large as the observed one; absorbs round-off between equal statistics.
pub const PERMUTATION_TIE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    /// Interpolation in the Scholz-Stephens critical value table. Capped at
    /// 0.25 and floored at 0.001.
    Table,
    /// Permutation of the pooled sample: all splits when there are at most
    /// `n_perm` of them, otherwise `n_perm` seeded random splits.
    Permutation { n_perm: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdResult {
    /// Midrank statistic A²_akN.
    pub a2: f64,
    /// Standardized statistic (A² − 1) / σ_N.
    pub standardized: f64,
    pub p: f64,
    /// Whether p came from full enumeration of splits.
    pub exact: bool,
}

/// Pooled sample in sorted order with its distinct-value structure. The
/// statistic of any split into two groups is computed from a membership
/// mask over sorted positions in O(N).
struct Pooled {
    n: usize,
    /// distinct value index of each sorted position
    group: Vec<usize>,
    /// multiplicity of each distinct value
    mult: Vec<f64>,
    /// B_aj: values below z*_j plus half the multiplicity of z*_j
    b_mid: Vec<f64>,
}

impl Pooled {
    fn new(sorted: &[f64]) -> Self {
        let mut group = Vec::with_capacity(sorted.len());
        let mut mult: Vec<f64> = Vec::new();
        for (i, &z) in sorted.iter().enumerate() {
            if i == 0 || z != sorted[i - 1] {
                mult.push(0.0);
            }
            *mult.last_mut().unwrap() += 1.0;
            group.push(mult.len() - 1);
        }
        let mut below = 0.0;
        let b_mid = mult
            .iter()
            .map(|&l| {
                let b = below + l / 2.0;
                below += l;
                b
            })
            .collect();
        Pooled {
            n: sorted.len(),
            group,
            mult,
            b_mid,
        }
    }

    fn distinct(&self) -> usize {
        self.mult.len()
    }

    /// A²_akN for the split where sorted position `i` is in the first sample
    /// iff `in_first[i]`; `n1` is the size of the first sample.
    fn statistic(&self, in_first: impl Fn(usize) -> bool, n1: usize) -> f64 {
        let n = self.n as f64;
        let sizes = [n1 as f64, (self.n - n1) as f64];
        let mut f1 = vec![0.0; self.distinct()];
        for i in 0..self.n {
            if in_first(i) {
                f1[self.group[i]] += 1.0;
            }
        }
        let mut m = [0.0f64; 2];
        let mut total = 0.0;
        for j in 0..self.distinct() {
            let l = self.mult[j];
            let b = self.b_mid[j];
            let denom = b * (n - b) - n * l / 4.0;
            let f = [f1[j], l - f1[j]];
            for s in 0..2 {
                let ma = m[s] + f[s] / 2.0;
                if denom > 0.0 {
                    let dev = n * ma - b * sizes[s];
                    total += l * dev * dev / denom / sizes[s];
                }
                m[s] += f[s];
            }
        }
        total * (n - 1.0) / (n * n)
    }
}

/// Standard deviation of A²_kN under the null for k = 2.
fn null_sigma(n1: usize, n2: usize) -> f64 {
    let n = (n1 + n2) as f64;
    let k = 2.0;
    let big_h = 1.0 / n1 as f64 + 1.0 / n2 as f64;
    let nn = n1 + n2;
    // h = Σ_{i=1}^{N−1} 1/i
    let h: f64 = (1..nn).map(|i| 1.0 / i as f64).sum();
    // g = Σ_{i=1}^{N−2} Σ_{j=i+1}^{N−1} 1/((N−i) j) = Σ_i (h_{N−1} − h_i)/(N−i)
    let mut g = 0.0;
    let mut h_i = 0.0;
    for i in 1..nn.saturating_sub(1) {
        h_i += 1.0 / i as f64;
        g += (h - h_i) / (n - i as f64);
    }
    let a = (4.0 * g - 6.0) * (k - 1.0) + (10.0 - 6.0 * g) * big_h;
    let b = (2.0 * g - 4.0) * k * k + 8.0 * h * k + (2.0 * g - 14.0 * h - 4.0) * big_h - 8.0 * h
        + 4.0 * g
        - 6.0;
    let c = (6.0 * h + 2.0 * g - 2.0) * k * k + (4.0 * h - 4.0 * g + 6.0) * k
        + (2.0 * h - 6.0) * big_h
        + 4.0 * h;
    let d = (2.0 * h + 6.0) * k * k - 4.0 * h * k;
    let var = (a * n.powi(3) + b * n * n + c * n + d) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    var.sqrt()
}

/// Least-squares quadratic through (critical value, ln significance) for
/// m = k − 1 = 1, highest power first.
fn table_fit() -> ([f64; 7], [f64; 3]) {
    let m = 1.0f64;
    let crit: [f64; 7] =
        std::array::from_fn(|i| TABLE_B0[i] + TABLE_B1[i] / m.sqrt() + TABLE_B2[i] / m);
    // normal equations for y = c0 x² + c1 x + c2
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (x, s) in crit.iter().zip(TABLE_SIG) {
        let row = [x * x, *x, 1.0];
        let y = s.ln();
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            aty[r] += row[r] * y;
        }
    }
    (crit, solve3(ata, aty))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Table p-value for a standardized statistic.
pub fn table_p_value(standardized: f64) -> f64 {
    let (crit, coef) = table_fit();
    let lo = crit.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = crit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if standardized < lo {
        TABLE_SIG[0]
    } else if standardized > hi {
        TABLE_SIG[6]
    } else {
        let x = standardized;
        (coef[0] * x * x + coef[1] * x + coef[2]).exp()
    }
}

/// Number of ways to choose `k` of `n`, saturating.
pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    c
}

/// Calls `f` with every k-subset of `0..n` as a sorted index slice.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + n - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn at_least(stat: f64, observed: f64) -> bool {
    stat >= observed - PERMUTATION_TIE_EPS * (1.0 + observed.abs())
}

/// A²_akN of two samples (no p-value).
pub fn ad_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    let (pooled, in_x) = pool(x, y)?;
    Ok(pooled.statistic(|i| in_x[i], x.len()))
}

fn pool(x: &[f64], y: &[f64]) -> Result<(Pooled, Vec<bool>)> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Anderson-Darling needs at least 2 samples per group, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample value".into()));
    }
    let mut tagged: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = tagged.iter().map(|t| t.0).collect();
    let in_x = tagged.iter().map(|t| t.1).collect();
    Ok((Pooled::new(&sorted), in_x))
}

/// Two-sample Anderson-Darling test.
pub fn ad_test_2sample(x: &[f64], y: &[f64], method: PMethod) -> Result<AdResult> {
    let (pooled, in_x) = pool(x, y)?;
    let (n1, n2) = (x.len(), y.len());
    if pooled.distinct() < 2 {
        return Ok(AdResult {
            a2: 0.0,
            standardized: 0.0,
            p: 1.0,
            exact: false,
        });
    }
    let a2 = pooled.statistic(|i| in_x[i], n1);
    let standardized = (a2 - 1.0) / null_sigma(n1, n2);
    let (p, exact) = match method {
        PMethod::Table => (table_p_value(standardized), false),
        PMethod::Permutation { n_perm, seed } => permutation_p(&pooled, n1, a2, n_perm, seed),
    };
    Ok(AdResult {
        a2,
        standardized,
        p,
        exact,
    })
}

fn permutation_p(pooled: &Pooled, n1: usize, observed: f64, n_perm: usize, seed: u64) -> (f64, bool) {
    let n = pooled.n;
    let total = binomial(n, n1);
    if total <= n_perm.max(1) as u128 {
        let mut hits: u64 = 0;
        let mut mask = vec![false; n];
        for_each_combination(n, n1, |idx| {
            mask.iter_mut().for_each(|m| *m = false);
            for &i in idx {
                mask[i] = true;
            }
            if at_least(pooled.statistic(|i| mask[i], n1), observed) {
                hits += 1;
            }
        });
        return (hits as f64 / total as f64, true);
    }
    // one independent stream per resample, so any worker count gives the
    // same count
    let hits: usize = (0..n_perm as u64)
        .into_par_iter()
        .filter(|&b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in 0..n1 {
                let j = rng.random_range(i..n);
                perm.swap(i, j);
            }
            let mut mask = vec![false; n];
            for &i in &perm[..n1] {
                mask[i] = true;
            }
            at_least(pooled.statistic(|i| mask[i], n1), observed)
        })
        .count();
    ((hits + 1) as f64 / (n_perm + 1) as f64, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_statistics() {
        // reference values from scipy.stats.anderson_ksamp (midrank)
        let x = [1.2, 3.4, 0.5, 2.2, 5.1, 3.3, 0.9];
        let y = [4.4, 6.1, 2.9, 7.7, 5.5, 3.8];
        let r = ad_test_2sample(&x, &y, PMethod::Table).unwrap();
        assert!((r.standardized - 2.997_407_444_348_578_3).abs() < 1e-12, "{}", r.standardized);
        assert!((r.p - 0.019_519_599_928_106_993).abs() < 1e-12, "{}", r.p);

        let x = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 7.0];
        let y = [2.0, 3.0, 4.0, 4.0, 5.0];
        let r = ad_test_2sample(&x, &y, PMethod::Table).unwrap();
        assert!((r.standardized - 0.273_058_328_940_758_65).abs() < 1e-12, "{}", r.standardized);
        assert_eq!(r.p, 0.25);
    }

    #[test]
    fn table_cap_and_floor() {
        assert_eq!(table_p_value(-5.0), 0.25);
        assert_eq!(table_p_value(50.0), 0.001);
        let mid = table_p_value(2.0);
        assert!(mid > 0.025 && mid < 0.1);
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = ad_test_2sample(&x, &x, PMethod::Permutation { n_perm: 1000, seed: 1 }).unwrap();
        assert!(r.exact);
        assert!(r.p >= 0.5);
    }

    #[test]
    fn degenerate_pool() {
        let r = ad_test_2sample(&[2.0, 2.0], &[2.0, 2.0, 2.0], PMethod::Table).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn too_few() {
        assert!(ad_test_2sample(&[1.0], &[1.0, 2.0], PMethod::Table).is_err());
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..25).map(|i| (i as f64 * 0.91).cos() + 0.3).collect();
        let m = PMethod::Permutation { n_perm: 499, seed: 11 };
        let a = ad_test_2sample(&x, &y, m).unwrap();
        let b = ad_test_2sample(&x, &y, m).unwrap();
        assert!(!a.exact);
        assert_eq!(a.p, b.p);
        assert!(a.p > 0.0 && a.p <= 1.0);
    }

    #[test]
    fn combinations_enumerated() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen, [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]);
        let mut count = 0;
        for_each_combination(8, 4, |_| count += 1);
        assert_eq!(count, 70);
        assert_eq!(binomial(8, 4), 70);
        let mut count = 0;
        for_each_combination(3, 3, |_| count += 1);
        assert_eq!(count, 1);
    }
}
