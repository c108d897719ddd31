//! Dense idea vectors: a deterministic signed feature-hashing TF-IDF
//! vectorizer, plus import/export of externally computed vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};
use crate::textprep::TokenList;

/// Mixed into the hash seed to derive the independent sign hash.
const SIGN_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

/// Dense vector for one post in semantic space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdeaVector(pub Vec<f64>);

impl IdeaVector {
    pub fn zeros(dim: usize) -> Self {
        IdeaVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        l2_distance(&self.0, other)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for IdeaVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for IdeaVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for IdeaVector {
    fn from(v: Vec<f64>) -> Self {
        IdeaVector(v)
    }
}

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerModel {
    pub dim: usize,
    pub min_count: usize,
    pub hash_seed: u64,
    /// Smoothed inverse document frequency of every vocabulary token.
    pub idf: BTreeMap<String, f64>,
}

impl VectorizerModel {
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.idf.keys().map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.idf.contains_key(token)
    }

    /// Bucket and sign for a token.
    pub fn hash_token(&self, token: &str) -> (usize, f64) {
        let bucket = (xxh64(token.as_bytes(), self.hash_seed) % self.dim as u64) as usize;
        let sign_bits = xxh64(token.as_bytes(), self.hash_seed ^ SIGN_SEED_MIX);
        let sign = if sign_bits >> 63 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }

    /// Signed hashed tf-idf of `tokens`, L2-normalized. Out-of-vocabulary
    /// tokens are ignored; a text with none in vocabulary maps to zero.
    pub fn embed(&self, tokens: &TokenList) -> IdeaVector {
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens.tokens() {
            if self.contains(t) {
                *tf.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut v = vec![0.0; self.dim];
        for (tok, count) in tf {
            let (bucket, sign) = self.hash_token(tok);
            v[bucket] += count as f64 * self.idf[tok] * sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        IdeaVector(v)
    }
}

/// Builds the vocabulary (tokens occurring at least `min_count` times over
/// all documents) and its idf, `ln((1 + N) / (1 + df)) + 1`.
pub fn fit_vectorizer(
    docs: &[TokenList],
    dim: usize,
    min_count: usize,
    hash_seed: u64,
) -> Result<VectorizerModel> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be at least 1".into()));
    }
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    let mut total: HashMap<&str, usize> = HashMap::new();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let mut seen = HashSet::new();
        for t in doc.tokens() {
            *total.entry(t).or_default() += 1;
            if seen.insert(t.as_str()) {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    let n = docs.len() as f64;
    let idf = total
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, _)| {
            let d = df[t] as f64;
            (t.to_string(), ((1.0 + n) / (1.0 + d)).ln() + 1.0)
        })
        .collect();
    Ok(VectorizerModel {
        dim,
        min_count,
        hash_seed,
        idf,
    })
}

/// Vectors keyed by post id, all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorSet {
    dim: Option<usize>,
    vectors: HashMap<String, IdeaVector>,
}

impl VectorSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dimension, or `None` while the set is empty.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IdeaVector> {
        self.vectors.get(id)
    }

    pub fn insert(&mut self, id: impl Into<String>, v: IdeaVector) -> Result<()> {
        let id = id.into();
        if let Some(d) = self.dim {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: v.dim(),
                });
            }
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite component in vector for {id:?}"
            )));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicatePostId(id));
        }
        self.dim = Some(v.dim());
        self.vectors.insert(id, v);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IdeaVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Ids in sorted order, for deterministic output.
    pub fn sorted_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorLine {
    id: String,
    vec: Vec<f64>,
}

/// Reads `{"id": ..., "vec": [...]}` lines. Every problem is fatal: a
/// missing or mismatched vector would silently corrupt later stages.
pub fn load_external_vectors(path: impl AsRef<Path>) -> Result<VectorSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut set = VectorSet::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: VectorLine = serde_json::from_str(&line)
            .map_err(|e| Error::input(path, format!("line {}: {e}", lineno + 1)))?;
        set.insert(parsed.id, IdeaVector(parsed.vec))
            .map_err(|e| Error::input(path, format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(set)
}

/// Writes vectors in the order of `ids`.
pub fn write_vectors<'a>(
    path: impl AsRef<Path>,
    ids: impl IntoIterator<Item = &'a str>,
    set: &VectorSet,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for id in ids {
        let v = set.get(id).ok_or_else(|| Error::MissingVector(id.to_string()))?;
        let line = serde_json::to_string(&VectorLine {
            id: id.to_string(),
            vec: v.0.clone(),
        })
        .expect("vector serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
