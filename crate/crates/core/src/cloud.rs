//! Windowed knowledge bases and per-post eccentricity.
//!
//! Every user owns a knowledge base: the posts authored by their ego
//! neighborhood during the last `window_seconds`. A post's eccentricity is
//! its L2 distance from the centroid of its author's knowledge base just
//! before the post is made; self-eccentricity uses only the author's own
//! recent posts. Clouds are half-open windows `[t − W, t)`, so a post never
//! sees itself or a same-second post.
//!
//! Replay is organized per owner. Each owner's knowledge base depends only
//! on the immutable post log and that owner's neighborhood, so owners are
//! processed in parallel and the output does not depend on the worker count.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embed::{l2_distance, VectorSet};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;
/// Five days.
pub const DEFAULT_WINDOW_SECONDS: i64 = 5 * SECONDS_PER_DAY;

/// Allowed gap between the incremental running sum and a fresh sum,
/// relative to the summed entry norms.
pub const RUNNING_SUM_TOLERANCE: f64 = 1e-9;

/// Post vectors laid out row-major in corpus order.
#[derive(Debug, Clone)]
pub struct VectorTable {
    dim: usize,
    data: Vec<f64>,
}

impl VectorTable {
    /// Aligns `vectors` to the posts of `corpus`. Every post needs a vector.
    pub fn for_corpus(corpus: &Corpus, vectors: &VectorSet) -> Result<Self> {
        let dim = vectors.dim().unwrap_or(0);
        let mut data = Vec::with_capacity(dim * corpus.posts().len());
        for p in corpus.posts() {
            let v = vectors
                .get(&p.id)
                .ok_or_else(|| Error::MissingVector(p.id.clone()))?;
            data.extend_from_slice(v);
        }
        Ok(VectorTable { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Time-windowed idea cloud with an incrementally maintained sum.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    owner: String,
    window_seconds: i64,
    /// (post index, created_at), oldest first.
    entries: VecDeque<(usize, i64)>,
    running_sum: Vec<f64>,
    removed_since_rebuild: usize,
}

impl KnowledgeBase {
    pub fn new(owner: impl Into<String>, dim: usize, window_seconds: i64) -> Self {
        KnowledgeBase {
            owner: owner.into(),
            window_seconds,
            entries: VecDeque::new(),
            running_sum: vec![0.0; dim],
            removed_since_rebuild: 0,
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn window_seconds(&self) -> i64 {
        self.window_seconds
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn running_sum(&self) -> &[f64] {
        &self.running_sum
    }

    /// (post index, created_at) of every entry, oldest first.
    pub fn entries(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.entries.iter().copied()
    }

    /// Entries must arrive in non-decreasing time order.
    pub fn insert(&mut self, post: usize, created_at: i64, table: &VectorTable) {
        debug_assert!(self.entries.back().is_none_or(|&(_, t)| t <= created_at));
        for (s, x) in self.running_sum.iter_mut().zip(table.row(post)) {
            *s += x;
        }
        self.entries.push_back((post, created_at));
    }

    /// Drops every entry with `created_at < now − window`.
    pub fn expire(&mut self, now: i64, table: &VectorTable) {
        let cutoff = now - self.window_seconds;
        while let Some(&(post, t)) = self.entries.front() {
            if t >= cutoff {
                break;
            }
            self.entries.pop_front();
            for (s, x) in self.running_sum.iter_mut().zip(table.row(post)) {
                *s -= x;
            }
            self.removed_since_rebuild += 1;
        }
        if self.entries.is_empty() {
            self.running_sum.iter_mut().for_each(|s| *s = 0.0);
            self.removed_since_rebuild = 0;
        } else if self.removed_since_rebuild >= self.entries.len().max(32) {
            // amortized O(1): at least as many removals as the rebuild costs
            self.rebuild(table);
        }
    }

    fn fresh_sum(&self, table: &VectorTable) -> Vec<f64> {
        let mut sum = vec![0.0; self.running_sum.len()];
        for &(post, _) in &self.entries {
            for (s, x) in sum.iter_mut().zip(table.row(post)) {
                *s += x;
            }
        }
        sum
    }

    fn rebuild(&mut self, table: &VectorTable) {
        self.running_sum = self.fresh_sum(table);
        self.removed_since_rebuild = 0;
    }

    /// Mean of the entries.
    pub fn centroid(&self) -> Result<Vec<f64>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = self.entries.len() as f64;
        Ok(self.running_sum.iter().map(|s| s / n).collect())
    }

    /// Distance between the running sum and a freshly computed sum, divided
    /// by `max(1, Σ‖v‖)` over the entries.
    pub fn running_sum_drift(&self, table: &VectorTable) -> f64 {
        let fresh = self.fresh_sum(table);
        let scale: f64 = self
            .entries
            .iter()
            .map(|&(p, _)| table.row(p).iter().map(|x| x * x).sum::<f64>().sqrt())
            .sum();
        l2_distance(&fresh, &self.running_sum) / scale.max(1.0)
    }
}

/// Per-post output of a replay. `None` marks an undefined value (empty
/// cloud).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EccentricityRecord {
    pub post_id: String,
    pub author: String,
    pub created_at: i64,
    pub likes: u64,
    pub eccentricity: Option<f64>,
    pub self_eccentricity: Option<f64>,
    pub cloud_size: usize,
    pub self_cloud_size: usize,
}

/// Records plus the final state of every owner's knowledge bases.
#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub records: Vec<EccentricityRecord>,
    /// Neighborhood knowledge base of every user, indexed like the graph.
    pub knowledge_bases: Vec<KnowledgeBase>,
    /// Own-post history of every user.
    pub self_histories: Vec<KnowledgeBase>,
    pub table: VectorTable,
}

struct Measured {
    post: usize,
    distance: Option<f64>,
    size: usize,
}

/// Sweeps `stream` (post indices in corpus order) through `kb`, measuring
/// each post accepted by `is_target` against the cloud of strictly earlier
/// posts. Posts enter the cloud only once time has moved past them.
fn sweep(
    kb: &mut KnowledgeBase,
    stream: &[usize],
    times: &[i64],
    table: &VectorTable,
    is_target: impl Fn(usize) -> bool,
) -> Vec<Measured> {
    let mut out = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    for &q in stream {
        let t = times[q];
        if pending.first().is_some_and(|&p| times[p] < t) {
            for p in pending.drain(..) {
                kb.insert(p, times[p], table);
            }
        }
        if is_target(q) {
            kb.expire(t, table);
            let distance = kb.centroid().ok().map(|c| l2_distance(table.row(q), &c));
            out.push(Measured {
                post: q,
                distance,
                size: kb.count(),
            });
        }
        pending.push(q);
    }
    if let Some(&last) = stream.last() {
        for p in pending.drain(..) {
            kb.insert(p, times[p], table);
        }
        kb.expire(times[last], table);
    }
    out
}

fn check_window(window_seconds: i64) -> Result<()> {
    if window_seconds <= 0 {
        return Err(Error::InvalidArgument(format!(
            "window must be positive, got {window_seconds} s"
        )));
    }
    Ok(())
}

/// Replays the post log and returns one record per post, in corpus order.
pub fn replay(
    corpus: &Corpus,
    vectors: &VectorSet,
    window_seconds: i64,
) -> Result<Vec<EccentricityRecord>> {
    replay_detailed(corpus, vectors, window_seconds).map(|o| o.records)
}

/// Like [`replay`], also returning the final knowledge bases. Fails with
/// [`Error::Invariant`] if any running sum drifted from its entries.
pub fn replay_detailed(
    corpus: &Corpus,
    vectors: &VectorSet,
    window_seconds: i64,
) -> Result<ReplayOutput> {
    check_window(window_seconds)?;
    let table = VectorTable::for_corpus(corpus, vectors)?;
    let g = corpus.graph();
    let posts = corpus.posts();
    let times: Vec<i64> = posts.iter().map(|p| p.created_at).collect();
    let author: Vec<usize> = posts
        .iter()
        .map(|p| g.user_index(&p.author).expect("corpus authors are graph users"))
        .collect();
    let mut by_author: Vec<Vec<usize>> = vec![Vec::new(); g.user_count()];
    for (i, &a) in author.iter().enumerate() {
        by_author[a].push(i);
    }

    let per_owner: Vec<(KnowledgeBase, KnowledgeBase, Vec<Measured>, Vec<Measured>)> = (0..g
        .user_count())
        .into_par_iter()
        .map(|u| {
            let name = &g.users()[u];
            let mut kb = KnowledgeBase::new(name.clone(), table.dim(), window_seconds);
            let mut own = KnowledgeBase::new(name.clone(), table.dim(), window_seconds);
            if by_author[u].is_empty() {
                return (kb, own, Vec::new(), Vec::new());
            }
            let mut stream: Vec<usize> = g
                .ego_indices(u)
                .into_iter()
                .flat_map(|a| by_author[a].iter().copied())
                .collect();
            stream.sort_unstable();
            let ecc = sweep(&mut kb, &stream, &times, &table, |q| author[q] == u);
            let slf = sweep(&mut own, &by_author[u], &times, &table, |_| true);
            (kb, own, ecc, slf)
        })
        .collect();

    let mut ecc = vec![(None, 0); posts.len()];
    let mut slf = vec![(None, 0); posts.len()];
    let mut knowledge_bases = Vec::with_capacity(per_owner.len());
    let mut self_histories = Vec::with_capacity(per_owner.len());
    for (kb, own, e, s) in per_owner {
        for kb in [&kb, &own] {
            let drift = kb.running_sum_drift(&table);
            if drift > RUNNING_SUM_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "running sum of {:?} drifted by {drift:e}",
                    kb.owner()
                )));
            }
        }
        for m in e {
            ecc[m.post] = (m.distance, m.size);
        }
        for m in s {
            slf[m.post] = (m.distance, m.size);
        }
        knowledge_bases.push(kb);
        self_histories.push(own);
    }

    let records = posts
        .iter()
        .zip(ecc.into_iter().zip(slf))
        .map(|(p, ((e, n), (s, m)))| EccentricityRecord {
            post_id: p.id.clone(),
            author: p.author.clone(),
            created_at: p.created_at,
            likes: p.likes,
            eccentricity: e,
            self_eccentricity: s,
            cloud_size: n,
            self_cloud_size: m,
        })
        .collect();
    Ok(ReplayOutput {
        records,
        knowledge_bases,
        self_histories,
        table,
    })
}

/// Brute-force eccentricity and self-eccentricity of one post: a full scan
/// of the post log with no incremental state.
pub fn eccentricity_oracle(
    corpus: &Corpus,
    vectors: &VectorSet,
    window_seconds: i64,
    post_id: &str,
) -> Result<(Option<f64>, Option<f64>)> {
    check_window(window_seconds)?;
    let target = corpus
        .posts()
        .iter()
        .find(|p| p.id == post_id)
        .ok_or_else(|| Error::UnknownPost(post_id.to_string()))?;
    let v = vectors
        .get(&target.id)
        .ok_or_else(|| Error::MissingVector(target.id.clone()))?;
    let hood = crate::corpus::ego_neighborhood(corpus.graph(), &target.author)?;
    let t = target.created_at;
    let in_window = |c: i64| c >= t - window_seconds && c < t;

    let mean_distance = |keep: &dyn Fn(&str) -> bool| -> Result<Option<f64>> {
        let mut sum = vec![0.0; v.dim()];
        let mut n = 0usize;
        for p in corpus.posts() {
            if in_window(p.created_at) && keep(&p.author) {
                let w = vectors
                    .get(&p.id)
                    .ok_or_else(|| Error::MissingVector(p.id.clone()))?;
                for (s, x) in sum.iter_mut().zip(w.iter()) {
                    *s += x;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Ok(None);
        }
        let center: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        Ok(Some(v.distance(&center)))
    };
    let ecc = mean_distance(&|a| hood.contains(a))?;
    let slf = mean_distance(&|a| a == target.author)?;
    Ok((ecc, slf))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const RECORD_HEADER: [&str; 8] = [
    "post_id",
    "author",
    "created_at",
    "likes",
    "eccentricity",
    "self_eccentricity",
    "cloud_size",
    "self_cloud_size",
];

/// Writes records as CSV; undefined values are empty fields.
pub fn write_records(path: impl AsRef<Path>, records: &[EccentricityRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(RECORD_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.post_id.clone(),
            r.author.clone(),
            r.created_at.to_string(),
            r.likes.to_string(),
            fmt_opt(r.eccentricity),
            fmt_opt(r.self_eccentricity),
            r.cloud_size.to_string(),
            r.self_cloud_size.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<EccentricityRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r
        .headers()
        .map_err(|e| Error::input(path, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != RECORD_HEADER {
        return Err(Error::input(path, "unexpected eccentricity CSV header"));
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::input(path, e.to_string()))?;
        let bad = |what: &str| Error::input(path, format!("row {}: bad {what}", i + 1));
        let opt = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(what))
            }
        };
        out.push(EccentricityRecord {
            post_id: row[0].to_string(),
            author: row[1].to_string(),
            created_at: row[2].parse().map_err(|_| bad("created_at"))?,
            likes: row[3].parse().map_err(|_| bad("likes"))?,
            eccentricity: opt(&row[4], "eccentricity")?,
            self_eccentricity: opt(&row[5], "self_eccentricity")?,
            cloud_size: row[6].parse().map_err(|_| bad("cloud_size"))?,
            self_cloud_size: row[7].parse().map_err(|_| bad("self_cloud_size"))?,
        });
    }
    Ok(out)
}
