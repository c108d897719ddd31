use serde::{Deserialize, Serialize};

use crate::cloud::EccentricityRecord;
use crate::error::{Error, Result};

/// Like-count bins. Bin `i` holds counts in `(thresholds[i-1], thresholds[i]]`;
/// the last bin holds everything above the largest threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityBinning {
    thresholds: Vec<u64>,
    labels: Vec<String>,
}

impl PopularityBinning {
    pub fn new(thresholds: Vec<u64>) -> Result<Self> {
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "bin thresholds must be strictly ascending, got {thresholds:?}"
            )));
        }
        let labels = default_labels(&thresholds);
        Ok(PopularityBinning { thresholds, labels })
    }

    pub fn with_labels(thresholds: Vec<u64>, labels: Vec<String>) -> Result<Self> {
        let mut b = Self::new(thresholds)?;
        if labels.len() != b.thresholds.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} thresholds need {} labels, got {}",
                b.thresholds.len(),
                b.thresholds.len() + 1,
                labels.len()
            )));
        }
        b.labels = labels;
        Ok(b)
    }

    /// Parses "10,100" style threshold lists; an empty string is one bin.
    pub fn parse(spec: &str) -> Result<Self> {
        let thresholds = spec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad bin threshold {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(thresholds)
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn bin_of(&self, likes: u64) -> usize {
        self.thresholds.partition_point(|&t| t < likes)
    }
}

fn default_labels(thresholds: &[u64]) -> Vec<String> {
    match thresholds {
        [] => vec!["All".into()],
        [_] => vec!["Low".into(), "High".into()],
        [_, _] => vec!["Low".into(), "Medium".into(), "High".into()],
        _ => {
            let mut labels = Vec::with_capacity(thresholds.len() + 1);
            let mut lo = 0;
            for &t in thresholds {
                labels.push(format!("{lo}-{t}"));
                lo = t + 1;
            }
            labels.push(format!(">{}", thresholds[thresholds.len() - 1]));
            labels
        }
    }
}

/// Eccentricities of one popularity level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub samples: Vec<f64>,
}

/// Groups defined eccentricities by like count, bins in ascending order.
pub fn bin_by_popularity(records: &[EccentricityRecord], binning: &PopularityBinning) -> Vec<Bin> {
    let mut bins: Vec<Bin> = binning
        .labels()
        .iter()
        .map(|l| Bin {
            label: l.clone(),
            samples: Vec::new(),
        })
        .collect();
    for r in records {
        if let Some(e) = r.eccentricity {
            bins[binning.bin_of(r.likes)].samples.push(e);
        }
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(likes: u64, e: Option<f64>) -> EccentricityRecord {
        EccentricityRecord {
            post_id: format!("p{likes}"),
            author: "a".into(),
            created_at: 0,
            likes,
            eccentricity: e,
            self_eccentricity: None,
            cloud_size: 1,
            self_cloud_size: 0,
        }
    }

    #[test]
    fn three_levels() {
        let b = PopularityBinning::parse("10,100").unwrap();
        assert_eq!(b.labels(), ["Low", "Medium", "High"]);
        assert_eq!(b.bin_of(10), 0);
        assert_eq!(b.bin_of(11), 1);
        assert_eq!(b.bin_of(100), 1);
        assert_eq!(b.bin_of(101), 2);
        assert_eq!(b.bin_of(0), 0);
    }

    #[test]
    fn two_levels() {
        let b = PopularityBinning::parse("2").unwrap();
        assert_eq!(b.labels(), ["Low", "High"]);
        assert_eq!(b.bin_of(2), 0);
        assert_eq!(b.bin_of(3), 1);
        assert_eq!(b.bin_of(0), 0);
    }

    #[test]
    fn empty_thresholds_single_bin() {
        let b = PopularityBinning::parse("").unwrap();
        assert_eq!(b.labels(), ["All"]);
        assert_eq!(b.bin_of(12345), 0);
    }

    #[test]
    fn generic_labels() {
        let b = PopularityBinning::parse("1,5,9").unwrap();
        assert_eq!(b.labels(), ["0-1", "2-5", "6-9", ">9"]);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(PopularityBinning::parse("100,10").is_err());
        assert!(PopularityBinning::parse("5,5").is_err());
        assert!(PopularityBinning::parse("x").is_err());
        assert!(PopularityBinning::with_labels(vec![3], vec!["a".into()]).is_err());
    }

    #[test]
    fn undefined_excluded() {
        let b = PopularityBinning::parse("10,100").unwrap();
        let bins = bin_by_popularity(
            &[rec(0, Some(1.0)), rec(50, None), rec(500, Some(3.0)), rec(11, Some(2.0))],
            &b,
        );
        assert_eq!(bins[0].samples, [1.0]);
        assert_eq!(bins[1].samples, [2.0]);
        assert_eq!(bins[2].samples, [3.0]);
    }
}
