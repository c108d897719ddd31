//! Per-user eccentricity dynamics. The F-score is a gap-weighted mean of
//! absolute consecutive changes, the G-score the same mean of signed
//! changes; positive G means the series drifts upward.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cloud::EccentricityRecord;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_GAP_SECONDS: f64 = 1.0;

/// Turns clamped inter-post gaps into non-negative weights, one per step.
pub trait GapWeighting {
    fn weights(&self, gaps: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// `mean_gap / gap`: quick successive changes count more.
    #[default]
    InverseGap,
    /// `gap / mean_gap`: changes after long silences count more.
    ProportionalGap,
    Uniform,
}

impl GapWeighting for Weighting {
    fn weights(&self, gaps: &[f64]) -> Vec<f64> {
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        match self {
            Weighting::InverseGap => gaps.iter().map(|g| mean / g).collect(),
            Weighting::ProportionalGap => gaps.iter().map(|g| g / mean).collect(),
            Weighting::Uniform => vec![1.0; gaps.len()],
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::InverseGap => "inverse-gap",
            Weighting::ProportionalGap => "proportional-gap",
            Weighting::Uniform => "uniform",
        })
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse-gap" => Ok(Weighting::InverseGap),
            "proportional-gap" => Ok(Weighting::ProportionalGap),
            "uniform" => Ok(Weighting::Uniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown F/G weighting {other:?} (inverse-gap | proportional-gap | uniform)"
            ))),
        }
    }
}

/// F and G of a time-sorted `(seconds, value)` series. Gaps are clamped
/// below by `min_gap`. `None` for fewer than two points.
pub fn fg_scores(
    series: &[(f64, f64)],
    min_gap: f64,
    weighting: &dyn GapWeighting,
) -> Option<(f64, f64)> {
    if series.len() < 2 {
        return None;
    }
    let gaps: Vec<f64> = series
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).max(min_gap))
        .collect();
    let weights = weighting.weights(&gaps);
    let mut total = 0.0;
    let mut f = 0.0;
    let mut g = 0.0;
    for (w, pair) in weights.iter().zip(series.windows(2)) {
        let de = pair[1].1 - pair[0].1;
        total += w;
        f += w * de.abs();
        g += w * de;
    }
    if total <= 0.0 {
        return Some((0.0, 0.0));
    }
    let f = f / total;
    // |G| ≤ F holds exactly; the clamp only absorbs round-off
    let g = (g / total).clamp(-f, f);
    Some((f, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserDynamics {
    pub user: String,
    /// Posts with a defined eccentricity.
    pub n: usize,
    pub f_ecc: Option<f64>,
    pub g_ecc: Option<f64>,
    pub f_self: Option<f64>,
    pub g_self: Option<f64>,
    /// Mean gap between consecutive posts of the user, all posts counted.
    pub mean_gap_seconds: Option<f64>,
}

/// F/G of every author's eccentricity and self-eccentricity series, built
/// from defined values only. Sorted by user id.
pub fn user_dynamics(
    records: &[EccentricityRecord],
    min_gap: f64,
    weighting: &dyn GapWeighting,
) -> Vec<UserDynamics> {
    let mut by_user: BTreeMap<&str, Vec<&EccentricityRecord>> = BTreeMap::new();
    for r in records {
        by_user.entry(&r.author).or_default().push(r);
    }
    by_user
        .into_iter()
        .map(|(user, mut recs)| {
            recs.sort_by(|a, b| (a.created_at, &a.post_id).cmp(&(b.created_at, &b.post_id)));
            let ecc: Vec<(f64, f64)> = recs
                .iter()
                .filter_map(|r| r.eccentricity.map(|e| (r.created_at as f64, e)))
                .collect();
            let slf: Vec<(f64, f64)> = recs
                .iter()
                .filter_map(|r| r.self_eccentricity.map(|e| (r.created_at as f64, e)))
                .collect();
            let fe = fg_scores(&ecc, min_gap, weighting);
            let fs = fg_scores(&slf, min_gap, weighting);
            let mean_gap = (recs.len() >= 2).then(|| {
                let span = recs[recs.len() - 1].created_at - recs[0].created_at;
                span as f64 / (recs.len() - 1) as f64
            });
            UserDynamics {
                user: user.to_string(),
                n: ecc.len(),
                f_ecc: fe.map(|x| x.0),
                g_ecc: fe.map(|x| x.1),
                f_self: fs.map(|x| x.0),
                g_self: fs.map(|x| x.1),
                mean_gap_seconds: mean_gap,
            }
        })
        .collect()
}

pub const DYNAMICS_HEADER: [&str; 7] = [
    "user",
    "n",
    "f_ecc",
    "g_ecc",
    "f_self",
    "g_self",
    "mean_gap_seconds",
];

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_dynamics(path: impl AsRef<Path>, rows: &[UserDynamics]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(DYNAMICS_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.user.clone(),
            r.n.to_string(),
            fmt_opt(r.f_ecc),
            fmt_opt(r.g_ecc),
            fmt_opt(r.f_self),
            fmt_opt(r.g_self),
            fmt_opt(r.mean_gap_seconds),
        ])
        .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_dynamics(path: impl AsRef<Path>) -> Result<Vec<UserDynamics>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r
        .headers()
        .map_err(|e| Error::input(path, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != DYNAMICS_HEADER {
        return Err(Error::input(path, "unexpected dynamics CSV header"));
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::input(path, e.to_string()))?;
        let opt = |j: usize| -> Result<Option<f64>> {
            let s = &row[j];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| {
                Error::input(path, format!("row {}: bad {}", i + 1, DYNAMICS_HEADER[j]))
            })
        };
        out.push(UserDynamics {
            user: row[0].to_string(),
            n: row[1]
                .parse()
                .map_err(|_| Error::input(path, format!("row {}: bad n", i + 1)))?,
            f_ecc: opt(2)?,
            g_ecc: opt(3)?,
            f_self: opt(4)?,
            g_self: opt(5)?,
            mean_gap_seconds: opt(6)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DAY: f64 = 86_400.0;
    const ALL: [Weighting; 3] = [
        Weighting::InverseGap,
        Weighting::ProportionalGap,
        Weighting::Uniform,
    ];

    fn series(ts: &[f64], es: &[f64]) -> Vec<(f64, f64)> {
        ts.iter().copied().zip(es.iter().copied()).collect()
    }

    #[test]
    fn constant_series() {
        for w in ALL {
            let s = series(&[0.0, 13.0, 9_000.0], &[5.0, 5.0, 5.0]);
            assert_eq!(fg_scores(&s, 1.0, &w), Some((0.0, 0.0)));
        }
    }

    #[test]
    fn steady_rise() {
        let s = series(&[0.0, DAY, 2.0 * DAY], &[0.0, 1.0, 2.0]);
        for w in ALL {
            assert_eq!(fg_scores(&s, 1.0, &w), Some((1.0, 1.0)));
        }
    }

    #[test]
    fn up_and_down() {
        let s = series(&[0.0, DAY, 2.0 * DAY], &[0.0, 1.0, 0.0]);
        for w in ALL {
            assert_eq!(fg_scores(&s, 1.0, &w), Some((1.0, 0.0)));
        }
    }

    #[test]
    fn inverse_gap_hand_evaluation() {
        // gaps 1 and 3, mean 2: weights 2 and 2/3; changes +3 and −1
        let s = series(&[0.0, 1.0, 4.0], &[0.0, 3.0, 2.0]);
        let (f, g) = fg_scores(&s, 1.0, &Weighting::InverseGap).unwrap();
        assert!((f - (2.0 * 3.0 + 2.0 / 3.0) / (8.0 / 3.0)).abs() < 1e-15);
        assert!((g - (2.0 * 3.0 - 2.0 / 3.0) / (8.0 / 3.0)).abs() < 1e-15);
        let (f, g) = fg_scores(&s, 1.0, &Weighting::ProportionalGap).unwrap();
        assert!((f - 1.5).abs() < 1e-15 && g.abs() < 1e-15);
    }

    #[test]
    fn same_second_posts_are_clamped() {
        let s = series(&[0.0, 0.0, 10.0], &[0.0, 1.0, 1.0]);
        let (f, g) = fg_scores(&s, 1.0, &Weighting::InverseGap).unwrap();
        assert!(f.is_finite() && g.is_finite());
        assert!((f - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn too_short() {
        assert_eq!(fg_scores(&[], 1.0, &Weighting::Uniform), None);
        assert_eq!(fg_scores(&[(0.0, 1.0)], 1.0, &Weighting::Uniform), None);
    }

    #[test]
    fn weighting_names() {
        for w in ALL {
            assert_eq!(w.to_string().parse::<Weighting>().unwrap(), w);
        }
        assert!("nope".parse::<Weighting>().is_err());
    }

    fn rec(id: &str, author: &str, t: i64, e: Option<f64>, s: Option<f64>) -> EccentricityRecord {
        EccentricityRecord {
            post_id: id.into(),
            author: author.into(),
            created_at: t,
            likes: 0,
            eccentricity: e,
            self_eccentricity: s,
            cloud_size: usize::from(e.is_some()),
            self_cloud_size: usize::from(s.is_some()),
        }
    }

    #[test]
    fn user_with_one_defined_point() {
        let recs = [
            rec("p1", "a", 0, None, None),
            rec("p2", "a", 10, Some(1.0), None),
            rec("p3", "a", 20, None, Some(2.0)),
        ];
        let d = &user_dynamics(&recs, 1.0, &Weighting::InverseGap)[0];
        assert_eq!(d.n, 1);
        assert_eq!((d.f_ecc, d.g_ecc, d.f_self, d.g_self), (None, None, None, None));
        assert_eq!(d.mean_gap_seconds, Some(10.0));
    }

    #[test]
    fn gaps_skip_undefined_points() {
        let recs = [
            rec("p1", "a", 0, Some(0.0), None),
            rec("p2", "a", 5, None, None),
            rec("p3", "a", 10, Some(2.0), None),
            rec("p4", "b", 3, Some(7.0), None),
        ];
        let out = user_dynamics(&recs, 1.0, &Weighting::InverseGap);
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].user.as_str(), out[0].f_ecc, out[0].g_ecc), ("a", Some(2.0), Some(2.0)));
        assert_eq!(out[1].mean_gap_seconds, None);
    }

    #[test]
    fn dynamics_csv_round_trip() {
        let recs = [
            rec("p1", "a", 0, Some(0.5), Some(1.0)),
            rec("p2", "a", 7, Some(0.25), Some(3.0)),
            rec("p3", "b", 3, None, None),
        ];
        let rows = user_dynamics(&recs, 1.0, &Weighting::InverseGap);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_dynamics(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("user,n,f_ecc,g_ecc,f_self,g_self,mean_gap_seconds\n"));
        assert!(text.contains("\nb,0,,,,,\n"));
        assert_eq!(read_dynamics(&p).unwrap(), rows);
    }

    fn arb_series() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((0.0f64..1e5, -10.0f64..10.0), 2..40).prop_map(|mut v| {
            v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            v
        })
    }

    proptest! {
        #[test]
        fn g_bounded_by_f(s in arb_series()) {
            for w in ALL {
                let (f, g) = fg_scores(&s, 1.0, &w).unwrap();
                prop_assert!(f >= 0.0 && g.abs() <= f);
            }
        }

        #[test]
        fn reversal_negates_g_on_equal_gaps(es in proptest::collection::vec(-10.0f64..10.0, 2..40)) {
            let s: Vec<(f64, f64)> = es.iter().enumerate().map(|(i, &e)| (i as f64 * 3600.0, e)).collect();
            let mut rev_vals = es.clone();
            rev_vals.reverse();
            let r: Vec<(f64, f64)> = rev_vals.iter().enumerate().map(|(i, &e)| (i as f64 * 3600.0, e)).collect();
            for w in ALL {
                let (f1, g1) = fg_scores(&s, 1.0, &w).unwrap();
                let (f2, g2) = fg_scores(&r, 1.0, &w).unwrap();
                prop_assert!((f1 - f2).abs() <= 1e-12);
                prop_assert!((g1 + g2).abs() <= 1e-12);
            }
        }

        #[test]
        fn shift_and_scale(s in arb_series(), c in -100.0f64..100.0, k in 0.01f64..100.0) {
            for w in ALL {
                let (f, g) = fg_scores(&s, 1.0, &w).unwrap();
                let shifted: Vec<_> = s.iter().map(|&(t, e)| (t, e + c)).collect();
                let (fs, gs) = fg_scores(&shifted, 1.0, &w).unwrap();
                prop_assert!((f - fs).abs() <= 1e-12 && (g - gs).abs() <= 1e-12);
                let scaled: Vec<_> = s.iter().map(|&(t, e)| (t, e * k)).collect();
                let (fk, gk) = fg_scores(&scaled, 1.0, &w).unwrap();
                prop_assert!((fk - k * f).abs() <= 1e-12 * (1.0 + k * f));
                prop_assert!((gk - k * g).abs() <= 1e-12 * (1.0 + k * f));
            }
        }
    }
}
