//! Python bindings. Inputs and outputs are plain Python values: lists of
//! floats, dicts keyed by post id, dicts per record.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use eccentric::cloud::{self, EccentricityRecord, SECONDS_PER_DAY};
use eccentric::corpus::{self, Post, SocialGraph};
use eccentric::dynamics::{self, Weighting};
use eccentric::embed::{self, IdeaVector, VectorSet, VectorizerModel};
use eccentric::pca::{self, PcaModel};
use eccentric::stats::{self, PMethod};
use eccentric::synth::{self, SynthConfig};
use eccentric::textprep::{self, StopWords, TokenList};
use eccentric::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn vector_set(vectors: HashMap<String, Vec<f64>>) -> PyResult<VectorSet> {
    let mut keys: Vec<_> = vectors.into_iter().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    let mut set = VectorSet::new();
    for (id, v) in keys {
        set.insert(id, IdeaVector(v)).map_err(py_err)?;
    }
    Ok(set)
}

fn window_seconds(window_days: f64) -> PyResult<i64> {
    let s = (window_days * SECONDS_PER_DAY as f64).round();
    if !(s >= 1.0 && s.is_finite()) {
        return Err(PyValueError::new_err("window_days must be positive"));
    }
    Ok(s as i64)
}

/// Lowercase, strip punctuation and digits, drop stopwords and stem.
#[pyfunction]
#[pyo3(signature = (text, stopwords=None))]
fn clean(text: &str, stopwords: Option<Vec<String>>) -> Vec<String> {
    let sw = match stopwords {
        Some(words) => StopWords::from_words(words),
        None => StopWords::english(),
    };
    textprep::clean(text, &sw).0
}

/// Porter stem of a single lowercase word.
#[pyfunction]
fn stem(word: &str) -> String {
    textprep::stem(word)
}

/// Hashed tf-idf vectorizer.
#[pyclass(name = "Vectorizer", module = "eccentric", frozen)]
struct PyVectorizer(VectorizerModel);

#[pymethods]
impl PyVectorizer {
    #[staticmethod]
    #[pyo3(signature = (docs, dim=300, min_count=10, hash_seed=0))]
    fn fit(docs: Vec<Vec<String>>, dim: usize, min_count: usize, hash_seed: u64) -> PyResult<Self> {
        let docs: Vec<TokenList> = docs.into_iter().map(TokenList).collect();
        embed::fit_vectorizer(&docs, dim, min_count, hash_seed)
            .map(PyVectorizer)
            .map_err(py_err)
    }

    fn embed(&self, tokens: Vec<String>) -> Vec<f64> {
        self.0.embed(&TokenList(tokens)).into_inner()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.0.vocabulary().map(String::from).collect()
    }

    fn __repr__(&self) -> String {
        format!("Vectorizer(dim={}, vocabulary={})", self.0.dim, self.0.idf.len())
    }
}

#[pyclass(name = "Pca", module = "eccentric", frozen)]
struct PyPca(PcaModel);

#[pymethods]
impl PyPca {
    /// Keeps the fewest components reaching `variance` of the total, or all
    /// of them when `variance` is None.
    #[staticmethod]
    #[pyo3(signature = (rows, variance=Some(0.9)))]
    fn fit(rows: Vec<Vec<f64>>, variance: Option<f64>) -> PyResult<Self> {
        match variance {
            Some(f) => pca::fit_pca(&rows, f),
            None => pca::fit_pca_full(&rows),
        }
        .map(PyPca)
        .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        PcaModel::load(path).map(PyPca).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(py_err)
    }

    fn transform(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.transform(&v).map_err(py_err)
    }

    fn inverse_transform(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.inverse_transform(&y).map_err(py_err)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.mean.clone()
    }

    #[getter]
    fn components(&self) -> Vec<Vec<f64>> {
        self.0.components.clone()
    }

    #[getter]
    fn explained_variance(&self) -> Vec<f64> {
        self.0.explained_variance.clone()
    }

    fn __repr__(&self) -> String {
        format!("Pca(k={}, input_dim={})", self.0.k(), self.0.input_dim())
    }
}

fn record_dict<'py>(py: Python<'py>, r: &EccentricityRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("post_id", &r.post_id)?;
    d.set_item("author", &r.author)?;
    d.set_item("created_at", r.created_at)?;
    d.set_item("likes", r.likes)?;
    d.set_item("eccentricity", r.eccentricity)?;
    d.set_item("self_eccentricity", r.self_eccentricity)?;
    d.set_item("cloud_size", r.cloud_size)?;
    d.set_item("self_cloud_size", r.self_cloud_size)?;
    Ok(d)
}

fn record_from(d: &Bound<'_, PyDict>) -> PyResult<EccentricityRecord> {
    fn get<'py, T: for<'a> FromPyObject<'a, 'py>>(d: &Bound<'py, PyDict>, key: &str) -> PyResult<T>
    where
        for<'a> <T as FromPyObject<'a, 'py>>::Error: Into<PyErr>,
    {
        match d.get_item(key)? {
            Some(v) => v.extract::<T>().map_err(Into::into),
            None => Err(PyValueError::new_err(format!("record lacks {key:?}"))),
        }
    }
    Ok(EccentricityRecord {
        post_id: get(d, "post_id")?,
        author: get(d, "author")?,
        created_at: get(d, "created_at")?,
        likes: get(d, "likes")?,
        eccentricity: get(d, "eccentricity")?,
        self_eccentricity: get(d, "self_eccentricity")?,
        cloud_size: get(d, "cloud_size").unwrap_or(0),
        self_cloud_size: get(d, "self_cloud_size").unwrap_or(0),
    })
}

/// Posts plus follow graph.
#[pyclass(name = "Corpus", module = "eccentric", frozen)]
struct PyCorpus(corpus::Corpus);

#[pymethods]
impl PyCorpus {
    /// `posts`: dicts with id, author, created_at and optional text, likes.
    /// `edges`: (follower, followee) pairs.
    #[new]
    #[pyo3(signature = (posts, edges, users=None))]
    fn new(
        posts: Vec<Bound<'_, PyDict>>,
        edges: Vec<(String, String)>,
        users: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let posts = posts
            .iter()
            .map(|d| {
                let req = |k: &str| {
                    d.get_item(k)?
                        .ok_or_else(|| PyValueError::new_err(format!("post lacks {k:?}")))
                };
                Ok(Post {
                    id: req("id")?.extract()?,
                    author: req("author")?.extract()?,
                    created_at: req("created_at")?.extract()?,
                    text: match d.get_item("text")? {
                        Some(t) => t.extract()?,
                        None => String::new(),
                    },
                    likes: match d.get_item("likes")? {
                        Some(l) => l.extract()?,
                        None => 0,
                    },
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let graph = SocialGraph::new(users.unwrap_or_default(), edges);
        corpus::Corpus::new(posts, graph).map(PyCorpus).map_err(py_err)
    }

    #[staticmethod]
    fn load(posts: PathBuf, edges: PathBuf) -> PyResult<Self> {
        corpus::load_corpus(posts, edges).map(PyCorpus).map_err(py_err)
    }

    fn save(&self, posts: PathBuf, edges: PathBuf) -> PyResult<()> {
        corpus::write_posts(posts, self.0.posts()).map_err(py_err)?;
        corpus::write_edges(edges, self.0.graph()).map_err(py_err)
    }

    /// Corpus restricted to the largest weakly connected component.
    fn largest_connected_component(&self) -> Self {
        PyCorpus(self.0.restrict_to(corpus::largest_connected_component(self.0.graph())))
    }

    /// Corpus restricted to a seeded random fraction of users.
    #[pyo3(signature = (fraction=0.1, seed=0))]
    fn sample_users(&self, fraction: f64, seed: u64) -> PyResult<Self> {
        let g = corpus::sample_users(self.0.graph(), fraction, seed).map_err(py_err)?;
        Ok(PyCorpus(self.0.restrict_to(g)))
    }

    /// The user and everyone they follow.
    fn ego_neighborhood(&self, user: &str) -> PyResult<Vec<String>> {
        corpus::ego_neighborhood(self.0.graph(), user)
            .map(|s| s.into_iter().collect())
            .map_err(py_err)
    }

    #[getter]
    fn users(&self) -> Vec<String> {
        self.0.graph().users().to_vec()
    }

    #[getter]
    fn edges(&self) -> Vec<(String, String)> {
        self.0
            .graph()
            .edges()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    /// Posts in replay order as dicts.
    #[getter]
    fn posts<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .posts()
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("id", &p.id)?;
                d.set_item("author", &p.author)?;
                d.set_item("created_at", p.created_at)?;
                d.set_item("text", &p.text)?;
                d.set_item("likes", p.likes)?;
                Ok(d)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.posts().len()
    }

    /// One record per post; undefined values are None.
    #[pyo3(signature = (vectors, window_days=5.0))]
    fn replay<'py>(
        &self,
        py: Python<'py>,
        vectors: HashMap<String, Vec<f64>>,
        window_days: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let set = vector_set(vectors)?;
        let window = window_seconds(window_days)?;
        let records = py
            .detach(|| cloud::replay(&self.0, &set, window))
            .map_err(py_err)?;
        records.iter().map(|r| record_dict(py, r)).collect()
    }

    /// Brute-force (eccentricity, self_eccentricity) of one post.
    #[pyo3(signature = (vectors, post_id, window_days=5.0))]
    fn eccentricity_oracle(
        &self,
        vectors: HashMap<String, Vec<f64>>,
        post_id: &str,
        window_days: f64,
    ) -> PyResult<(Option<f64>, Option<f64>)> {
        let set = vector_set(vectors)?;
        cloud::eccentricity_oracle(&self.0, &set, window_seconds(window_days)?, post_id)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(posts={}, users={}, edges={})",
            self.0.posts().len(),
            self.0.graph().user_count(),
            self.0.graph().edge_count()
        )
    }
}

fn weighting(name: &str) -> PyResult<Weighting> {
    name.parse().map_err(py_err)
}

/// (F, G) of a time-sorted [(seconds, value)] series, or None if it has
/// fewer than two points.
#[pyfunction]
#[pyo3(signature = (series, min_gap=1.0, weighting="inverse-gap"))]
fn fg_scores(series: Vec<(f64, f64)>, min_gap: f64, weighting: &str) -> PyResult<Option<(f64, f64)>> {
    let w = self::weighting(weighting)?;
    Ok(dynamics::fg_scores(&series, min_gap, &w))
}

/// Per-user F/G scores from replay records.
#[pyfunction]
#[pyo3(signature = (records, min_gap=1.0, weighting="inverse-gap"))]
fn user_dynamics<'py>(
    py: Python<'py>,
    records: Vec<Bound<'py, PyDict>>,
    min_gap: f64,
    weighting: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let w = self::weighting(weighting)?;
    let recs = records.iter().map(record_from).collect::<PyResult<Vec<_>>>()?;
    dynamics::user_dynamics(&recs, min_gap, &w)
        .iter()
        .map(|u| {
            let d = PyDict::new(py);
            d.set_item("user", &u.user)?;
            d.set_item("n", u.n)?;
            d.set_item("f_ecc", u.f_ecc)?;
            d.set_item("g_ecc", u.g_ecc)?;
            d.set_item("f_self", u.f_self)?;
            d.set_item("g_self", u.g_self)?;
            d.set_item("mean_gap_seconds", u.mean_gap_seconds)?;
            Ok(d)
        })
        .collect()
}

/// Gaussian kernel density of `samples` on `grid`.
#[pyfunction]
#[pyo3(signature = (samples, grid, bandwidth=5.0))]
fn kde(samples: Vec<f64>, grid: Vec<f64>, bandwidth: f64) -> PyResult<Vec<f64>> {
    stats::kde(&samples, bandwidth, &grid)
        .map(|c| c.density)
        .map_err(py_err)
}

/// Two-sample Anderson-Darling test. `method` is "table" or "permutation".
#[pyfunction]
#[pyo3(signature = (x, y, method="table", n_perm=9999, seed=0))]
fn anderson_darling<'py>(
    py: Python<'py>,
    x: Vec<f64>,
    y: Vec<f64>,
    method: &str,
    n_perm: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = match method {
        "table" => PMethod::Table,
        "permutation" => PMethod::Permutation { n_perm, seed },
        _ => return Err(PyValueError::new_err(format!("unknown method {method:?}"))),
    };
    let r = py
        .detach(|| stats::ad_test_2sample(&x, &y, m))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("a2", r.a2)?;
    d.set_item("standardized", r.standardized)?;
    d.set_item("p", r.p)?;
    d.set_item("exact", r.exact)?;
    Ok(d)
}

/// Two-sided Mann-Whitney test: (U, p).
#[pyfunction]
fn mann_whitney(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    stats::mann_whitney(&x, &y)
        .map(|r| (r.u, r.p))
        .map_err(py_err)
}

#[pyfunction]
fn bonferroni(pvals: Vec<f64>, m: usize) -> Vec<f64> {
    stats::bonferroni(&pvals, m)
}

/// Synthetic corpus: returns (Corpus, {post_id: vector}). Keyword
/// arguments are the generator settings, e.g. n_users=300,
/// effect="elevator-drift".
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn synthesize(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<(PyCorpus, HashMap<String, Vec<f64>>)> {
    let mut cfg = SynthConfig::default();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            match key.as_str() {
                "n_users" => cfg.n_users = v.extract()?,
                "follow_prob" => cfg.follow_prob = v.extract()?,
                "n_days" => cfg.n_days = v.extract()?,
                "posts_per_user_per_day" => cfg.posts_per_user_per_day = v.extract()?,
                "dim" => cfg.dim = v.extract()?,
                "seed" => cfg.seed = v.extract()?,
                "effect" => cfg.effect = v.extract::<String>()?.parse().map_err(py_err)?,
                "effect_strength" => cfg.effect_strength = v.extract()?,
                "user_spread" => cfg.user_spread = v.extract()?,
                "noise" => cfg.noise = v.extract()?,
                "min_posts_per_user" => cfg.min_posts_per_user = v.extract()?,
                "base_likes" => cfg.base_likes = v.extract()?,
                "likes_dispersion" => cfg.likes_dispersion = v.extract()?,
                "with_text" => cfg.with_text = v.extract()?,
                other => return Err(PyValueError::new_err(format!("unknown setting {other:?}"))),
            }
        }
    }
    let (corpus, vectors) = synth::gen_corpus(&cfg).map_err(py_err)?;
    let vectors = vectors
        .iter()
        .map(|(id, v)| (id.to_string(), v.0.clone()))
        .collect();
    Ok((PyCorpus(corpus), vectors))
}

#[pymodule]
#[pyo3(name = "eccentric")]
fn eccentric_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyVectorizer>()?;
    m.add_class::<PyPca>()?;
    m.add_function(wrap_pyfunction!(clean, m)?)?;
    m.add_function(wrap_pyfunction!(stem, m)?)?;
    m.add_function(wrap_pyfunction!(fg_scores, m)?)?;
    m.add_function(wrap_pyfunction!(user_dynamics, m)?)?;
    m.add_function(wrap_pyfunction!(kde, m)?)?;
    m.add_function(wrap_pyfunction!(anderson_darling, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    Ok(())
}
