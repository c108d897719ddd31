//! Post log and follow graph: loading, validation, component extraction,
//! seeded user sampling and ego-neighborhood queries.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One authored idea.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Post {
    pub id: String,
    pub author: String,
    pub created_at: i64,
    pub text: String,
    pub likes: u64,
}

impl Post {
    fn sort_key(&self) -> (i64, &str) {
        (self.created_at, &self.id)
    }
}

/// Result of a tolerant line-oriented load.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub skipped: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeLine {
    follower: String,
    followee: String,
}

#[derive(Debug, Serialize)]
struct EdgeLineRef<'a> {
    follower: &'a str,
    followee: &'a str,
}

/// Directed follow graph. Users are kept sorted; edges are stored as sorted
/// out-adjacency lists over user indices. Self-loops are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialGraph {
    users: Vec<String>,
    index: HashMap<String, usize>,
    out_adj: Vec<Vec<usize>>,
}

impl SocialGraph {
    /// Builds a graph from a user set and a list of (follower, followee)
    /// pairs. Edge endpoints are added to the user set; self-loops and
    /// duplicates are dropped.
    pub fn new<U, E, S>(users: U, edges: E) -> Self
    where
        U: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let edges: Vec<(String, String)> = edges
            .into_iter()
            .map(|(a, b)| (a.into(), b.into()))
            .collect();
        let mut set: BTreeSet<String> = users.into_iter().map(Into::into).collect();
        for (a, b) in &edges {
            set.insert(a.clone());
            set.insert(b.clone());
        }
        let users: Vec<String> = set.into_iter().collect();
        let index: HashMap<String, usize> = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        let mut out_adj = vec![Vec::new(); users.len()];
        for (a, b) in &edges {
            if a == b {
                continue;
            }
            out_adj[index[a]].push(index[b]);
        }
        for adj in &mut out_adj {
            adj.sort_unstable();
            adj.dedup();
        }
        SocialGraph {
            users,
            index,
            out_adj,
        }
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn contains(&self, user: &str) -> bool {
        self.index.contains_key(user)
    }

    pub fn user_index(&self, user: &str) -> Option<usize> {
        self.index.get(user).copied()
    }

    /// Sorted out-neighbor indices of user `idx`.
    pub fn followees_of(&self, idx: usize) -> &[usize] {
        &self.out_adj[idx]
    }

    pub fn out_degree(&self, user: &str) -> Result<usize> {
        let idx = self
            .user_index(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        Ok(self.out_adj[idx].len())
    }

    /// All edges as (follower, followee), sorted.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.out_adj.iter().enumerate().flat_map(move |(a, adj)| {
            adj.iter()
                .map(move |&b| (self.users[a].as_str(), self.users[b].as_str()))
        })
    }

    pub fn has_edge(&self, follower: &str, followee: &str) -> bool {
        match (self.user_index(follower), self.user_index(followee)) {
            (Some(a), Some(b)) => self.out_adj[a].binary_search(&b).is_ok(),
            _ => false,
        }
    }

    /// Adds an isolated user if not present.
    pub fn with_users<'a>(mut self, extra: impl IntoIterator<Item = &'a str>) -> Self {
        let missing: Vec<&str> = extra.into_iter().filter(|u| !self.contains(u)).collect();
        if missing.is_empty() {
            return self;
        }
        let edges: Vec<(String, String)> = self
            .edges()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let mut users = std::mem::take(&mut self.users);
        users.extend(missing.into_iter().map(str::to_string));
        SocialGraph::new(users, edges)
    }

    /// Subgraph induced on `keep` (unknown ids are ignored).
    pub fn induced(&self, keep: &HashSet<&str>) -> SocialGraph {
        let users = self.users.iter().filter(|u| keep.contains(u.as_str())).cloned();
        let edges: Vec<(String, String)> = self
            .edges()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b))
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        SocialGraph::new(users.collect::<Vec<_>>(), edges)
    }

    /// `{u}` plus everyone `u` follows, as sorted user indices.
    pub fn ego_indices(&self, idx: usize) -> Vec<usize> {
        let mut out = self.out_adj[idx].clone();
        if let Err(pos) = out.binary_search(&idx) {
            out.insert(pos, idx);
        }
        out
    }

    /// For every user `w`, the users whose ego neighborhood contains `w`
    /// (`w` itself plus its followers). Sorted.
    pub fn reverse_ego_indices(&self) -> Vec<Vec<usize>> {
        let mut rev: Vec<Vec<usize>> = (0..self.users.len()).map(|i| vec![i]).collect();
        for (a, adj) in self.out_adj.iter().enumerate() {
            for &b in adj {
                rev[b].push(a);
            }
        }
        for r in &mut rev {
            r.sort_unstable();
        }
        rev
    }
}

/// Ego neighborhood of `user`: the user together with everyone they follow.
/// Followers who are not followees are not included.
pub fn ego_neighborhood(g: &SocialGraph, user: &str) -> Result<BTreeSet<String>> {
    let idx = g
        .user_index(user)
        .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    Ok(g.ego_indices(idx)
        .into_iter()
        .map(|i| g.users[i].clone())
        .collect())
}

/// Induced subgraph on the largest weakly connected component. Ties go to
/// the component holding the lexicographically smallest user id.
pub fn largest_connected_component(g: &SocialGraph) -> SocialGraph {
    let n = g.user_count();
    if n == 0 {
        return SocialGraph::default();
    }
    let mut uf = UnionFind::new(n);
    for (a, adj) in g.out_adj.iter().enumerate() {
        for &b in adj {
            uf.union(a, b);
        }
    }
    let mut size = vec![0usize; n];
    // Users are sorted, so the first index seen for a root is its smallest id.
    let mut first = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        size[r] += 1;
        if first[r] == usize::MAX {
            first[r] = i;
        }
    }
    let best = (0..n)
        .filter(|&r| size[r] > 0)
        .max_by(|&a, &b| size[a].cmp(&size[b]).then(first[b].cmp(&first[a])))
        .expect("non-empty graph has a component");
    let keep: HashSet<&str> = (0..n)
        .filter(|&i| uf.find(i) == best)
        .map(|i| g.users[i].as_str())
        .collect();
    g.induced(&keep)
}

/// Induced subgraph on `ceil(fraction * |users|)` users drawn without
/// replacement from a generator seeded with `seed`.
pub fn sample_users(g: &SocialGraph, fraction: f64, seed: u64) -> Result<SocialGraph> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = g.user_count();
    let k = ((fraction * n as f64).ceil() as usize).min(n);
    if k == n {
        return Ok(g.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, n, k);
    let keep: HashSet<&str> = picked.iter().map(|i| g.users[i].as_str()).collect();
    Ok(g.induced(&keep))
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Time-ordered posts plus the follow graph they were authored on.
#[derive(Debug, Clone)]
pub struct Corpus {
    posts: Vec<Post>,
    graph: SocialGraph,
}

impl Corpus {
    /// Sorts posts by `(created_at, id)`, rejects duplicate ids and adds
    /// authors missing from the graph as isolated users.
    pub fn new(mut posts: Vec<Post>, graph: SocialGraph) -> Result<Self> {
        sort_posts(&mut posts);
        check_unique_ids(&posts)?;
        if let Some(p) = posts.iter().find(|p| p.created_at < 0) {
            return Err(Error::InvalidArgument(format!(
                "post {:?} has negative created_at",
                p.id
            )));
        }
        let graph = graph.with_users(posts.iter().map(|p| p.author.as_str()));
        Ok(Corpus { posts, graph })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    /// Keeps posts whose author is in `graph`, and replaces the graph.
    pub fn restrict_to(&self, graph: SocialGraph) -> Corpus {
        let posts = self
            .posts
            .iter()
            .filter(|p| graph.contains(&p.author))
            .cloned()
            .collect();
        Corpus { posts, graph }
    }
}

pub(crate) fn sort_posts(posts: &mut [Post]) {
    posts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

fn check_unique_ids(posts: &[Post]) -> Result<()> {
    let mut seen = HashSet::with_capacity(posts.len());
    for p in posts {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::DuplicatePostId(p.id.clone()));
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads a posts JSONL file. Malformed lines are skipped with a warning;
/// a duplicate id is fatal. Output is sorted by `(created_at, id)`.
pub fn load_posts(path: impl AsRef<Path>) -> Result<Loaded<Vec<Post>>> {
    let path = path.as_ref();
    let mut posts = Vec::new();
    let mut skipped = 0;
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Post>(&line) {
            Ok(p) if p.created_at >= 0 => posts.push(p),
            Ok(_) => {
                warn!("{}:{}: negative created_at, skipped", path.display(), lineno + 1);
                skipped += 1;
            }
            Err(e) => {
                warn!("{}:{}: {e}, skipped", path.display(), lineno + 1);
                skipped += 1;
            }
        }
    }
    sort_posts(&mut posts);
    check_unique_ids(&posts)?;
    if skipped > 0 {
        warn!("{}: skipped {skipped} malformed line(s)", path.display());
    }
    Ok(Loaded {
        value: posts,
        skipped,
    })
}

/// Reads an edges JSONL file into a graph. Duplicate edges collapse,
/// self-loops are dropped (their user is kept), malformed lines are skipped.
pub fn load_edges(path: impl AsRef<Path>) -> Result<Loaded<SocialGraph>> {
    let path = path.as_ref();
    let mut users = Vec::new();
    let mut edges = Vec::new();
    let mut skipped = 0;
    for (lineno, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EdgeLine>(&line) {
            Ok(e) if e.follower == e.followee => users.push(e.follower),
            Ok(e) => edges.push((e.follower, e.followee)),
            Err(e) => {
                warn!("{}:{}: {e}, skipped", path.display(), lineno + 1);
                skipped += 1;
            }
        }
    }
    Ok(Loaded {
        value: SocialGraph::new(users, edges),
        skipped,
    })
}

/// Loads posts and edges and assembles a validated corpus.
pub fn load_corpus(posts: impl AsRef<Path>, edges: impl AsRef<Path>) -> Result<Corpus> {
    let posts = load_posts(posts)?.value;
    let graph = load_edges(edges)?.value;
    Corpus::new(posts, graph)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_posts(path: impl AsRef<Path>, posts: &[Post]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for p in posts {
        let line = serde_json::to_string(p).expect("post serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes edges as JSONL. Isolated users are emitted as self-loop lines so
/// that they survive a round trip through `load_edges`.
pub fn write_edges(path: impl AsRef<Path>, g: &SocialGraph) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut touched = vec![false; g.user_count()];
    for (a, adj) in g.out_adj.iter().enumerate() {
        if !adj.is_empty() {
            touched[a] = true;
        }
        for &b in adj {
            touched[b] = true;
        }
    }
    for (a, b) in g.edges() {
        let line = serde_json::to_string(&EdgeLineRef {
            follower: a,
            followee: b,
        })
        .expect("edge serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    for (i, u) in g.users.iter().enumerate() {
        if !touched[i] {
            let line = serde_json::to_string(&EdgeLineRef {
                follower: u,
                followee: u,
            })
            .expect("edge serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
