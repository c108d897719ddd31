//! Command-line pipeline. Each subcommand reads files, writes files plus a
//! manifest, and nothing else.

mod config;
mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

pub use config::{FileConfig, Preset};
pub use manifest::{manifest_path_for, sha256_file, Manifest};

use crate::cloud::{read_records, replay, write_records, SECONDS_PER_DAY};
use crate::corpus::{
    largest_connected_component, load_corpus, load_edges, load_posts, sample_users, write_edges,
    write_posts, Corpus,
};
use crate::dynamics::{read_dynamics, user_dynamics, write_dynamics, UserDynamics, Weighting, DEFAULT_MIN_GAP_SECONDS};
use crate::embed::{fit_vectorizer, load_external_vectors, write_vectors, IdeaVector, VectorSet};
use crate::error::{Error, Result};
use crate::pca::fit_pca;
use crate::stats::{
    bin_by_popularity, bin_summary, mann_whitney, write_distribution_csv, DistributionSummary,
    PMethod, PopularityBinning, SummaryOptions, DEFAULT_BANDWIDTH, DEFAULT_GRID_POINTS,
};
use crate::synth::{gen_corpus, Effect, SynthConfig};
use crate::textprep::{clean, StopWords, TokenList};
use config::{pick, require_path};

pub const DEFAULT_WINDOW_DAYS: f64 = 5.0;
pub const DEFAULT_VARIANCE: f64 = 0.9;
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.1;
pub const DEFAULT_N_PERM: usize = 9999;

#[derive(Debug, Parser)]
#[command(name = "eccentric", version, about = "Idea eccentricity pipeline")]
pub struct Cli {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Default parameter set for dim, min-count and bins.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalize raw posts and edges.
    Ingest(CorpusIo),
    /// Keep the largest weakly connected component.
    Lcc(CorpusIo),
    /// Keep a random fraction of users.
    Sample(SampleArgs),
    /// Clean post text and embed it with hashed tf-idf.
    Embed(EmbedArgs),
    /// Reduce vectors by PCA.
    Pca(PcaArgs),
    /// Replay posts and measure eccentricity and self-eccentricity.
    Eccentricity(EccentricityArgs),
    /// Per-user F/G scores.
    Dynamics(DynamicsArgs),
    /// Popularity-binned densities and pairwise tests.
    Distributions(DistributionsArgs),
    /// Generate a synthetic corpus with vectors.
    Synth(SynthArgs),
    /// Combined summary and plot-ready tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CorpusIo {
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Directory for posts.jsonl, edges.jsonl and manifest.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub io: CorpusIo,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub posts: Option<PathBuf>,
    /// Output vectors.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the fitted vectorizer as JSON.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// One stopword per line; replaces the built-in English list.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub hash_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Fraction of variance to keep.
    #[arg(long)]
    pub variance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EccentricityArgs {
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub window_days: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// inverse-gap, proportional-gap or uniform.
    #[arg(long)]
    pub fg_weighting: Option<String>,
    /// Smallest gap in seconds between consecutive posts.
    #[arg(long)]
    pub min_gap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Like-count thresholds, e.g. "10,100".
    #[arg(long)]
    pub bins: Option<String>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// table or permutation.
    #[arg(long)]
    pub p_method: Option<String>,
    #[arg(long)]
    pub n_perm: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DistributionsArgs {
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Directory for distribution.csv, summary.json and manifest.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub tests: TestArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for posts.jsonl, edges.jsonl, vectors.jsonl and manifest.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub follow_prob: Option<f64>,
    #[arg(long)]
    pub n_days: Option<f64>,
    #[arg(long)]
    pub posts_per_user_per_day: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// attention-coupling, elevator-drift or null.
    #[arg(long)]
    pub effect: Option<String>,
    #[arg(long)]
    pub effect_strength: Option<f64>,
    #[arg(long)]
    pub user_spread: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub min_posts_per_user: Option<usize>,
    #[arg(long)]
    pub base_likes: Option<f64>,
    #[arg(long)]
    pub likes_dispersion: Option<f64>,
    #[arg(long)]
    pub with_text: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub dynamics: Option<PathBuf>,
    /// Directory for summary.json, density.csv, bin_means.csv, scores.csv
    /// and manifest.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub tests: TestArgs,
}

/// Parses arguments, runs one stage and returns the process exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    file: FileConfig,
    preset: Preset,
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("thread pool already initialized; --threads ignored");
        }
    }
    let preset = pick(cli.preset, file.preset, Preset::default());
    let ctx = Ctx { file, preset };
    match cli.command {
        Command::Ingest(a) => ctx.ingest(a),
        Command::Lcc(a) => ctx.lcc(a),
        Command::Sample(a) => ctx.sample(a),
        Command::Embed(a) => ctx.embed(a),
        Command::Pca(a) => ctx.pca(a),
        Command::Eccentricity(a) => ctx.eccentricity(a),
        Command::Dynamics(a) => ctx.dynamics(a),
        Command::Distributions(a) => ctx.distributions(a),
        Command::Synth(a) => ctx.synth(a),
        Command::Report(a) => ctx.report(a),
    }
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_weighting(s: &str) -> Result<Weighting> {
    s.parse()
}

fn parse_p_method(s: &str, n_perm: usize, seed: u64) -> Result<PMethod> {
    match s {
        "table" => Ok(PMethod::Table),
        "permutation" => {
            if n_perm == 0 {
                return Err(Error::InvalidArgument("--n-perm must be positive".into()));
            }
            Ok(PMethod::Permutation { n_perm, seed })
        }
        _ => Err(Error::InvalidArgument(format!(
            "unknown p-value method {s:?} (expected table or permutation)"
        ))),
    }
}

fn window_seconds(days: f64) -> Result<i64> {
    let secs = (days * SECONDS_PER_DAY as f64).round();
    if !(secs >= 1.0 && secs.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "window must be at least one second, got {days} days"
        )));
    }
    Ok(secs as i64)
}

struct ResolvedTests {
    binning: PopularityBinning,
    opts: SummaryOptions,
    config: Map<String, Value>,
}

impl Ctx {
    fn write_corpus(&self, corpus: &Corpus, out_dir: &Path) -> Result<Vec<PathBuf>> {
        create_dir(out_dir)?;
        let posts = out_dir.join("posts.jsonl");
        let edges = out_dir.join("edges.jsonl");
        write_posts(&posts, corpus.posts())?;
        write_edges(&edges, corpus.graph())?;
        info!(
            "wrote {} posts, {} users, {} edges to {}",
            corpus.posts().len(),
            corpus.graph().user_count(),
            corpus.graph().edge_count(),
            out_dir.display()
        );
        Ok(vec![posts, edges])
    }

    fn corpus_io(&self, io: &CorpusIo) -> Result<(PathBuf, PathBuf, PathBuf)> {
        Ok((
            require_path(&io.posts, &self.file.posts, "posts")?,
            require_path(&io.edges, &self.file.edges, "edges")?,
            require_path(&io.out_dir, &self.file.out_dir, "out-dir")?,
        ))
    }

    fn ingest(&self, a: CorpusIo) -> Result<()> {
        let (posts, edges, out_dir) = self.corpus_io(&a)?;
        let p = load_posts(&posts)?;
        let g = load_edges(&edges)?;
        let corpus = Corpus::new(p.value, g.value)?;
        let outputs = self.write_corpus(&corpus, &out_dir)?;
        Manifest::new("ingest", &[posts, edges], Map::new(), &outputs)?
            .write(&out_dir.join("manifest.json"))
    }

    fn lcc(&self, a: CorpusIo) -> Result<()> {
        let (posts, edges, out_dir) = self.corpus_io(&a)?;
        let corpus = load_corpus(&posts, &edges)?;
        let lcc = largest_connected_component(corpus.graph());
        let corpus = corpus.restrict_to(lcc);
        let outputs = self.write_corpus(&corpus, &out_dir)?;
        Manifest::new("lcc", &[posts, edges], Map::new(), &outputs)?
            .write(&out_dir.join("manifest.json"))
    }

    fn sample(&self, a: SampleArgs) -> Result<()> {
        let (posts, edges, out_dir) = self.corpus_io(&a.io)?;
        let fraction = pick(a.fraction, self.file.fraction, DEFAULT_SAMPLE_FRACTION);
        let seed = pick(a.seed, self.file.seed, 0);
        let corpus = load_corpus(&posts, &edges)?;
        let kept = sample_users(corpus.graph(), fraction, seed)?;
        let corpus = corpus.restrict_to(kept);
        let outputs = self.write_corpus(&corpus, &out_dir)?;
        let config = obj(json!({ "fraction": fraction, "seed": seed }));
        Manifest::new("sample", &[posts, edges], config, &outputs)?
            .write(&out_dir.join("manifest.json"))
    }

    fn embed(&self, a: EmbedArgs) -> Result<()> {
        let posts_path = require_path(&a.posts, &self.file.posts, "posts")?;
        let out = require_path(&a.out, &self.file.out, "out")?;
        let model_out = a.model_out.or_else(|| self.file.model_out.clone());
        let stop_path = a.stopwords.or_else(|| self.file.stopwords.clone());
        let dim = pick(a.dim, self.file.dim, self.preset.dim());
        let min_count = pick(a.min_count, self.file.min_count, self.preset.min_count());
        let hash_seed = pick(a.hash_seed, self.file.hash_seed, 0);

        let stopwords = match &stop_path {
            Some(p) => StopWords::from_file(p)?,
            None => StopWords::english(),
        };
        let posts = load_posts(&posts_path)?.value;
        let docs: Vec<TokenList> = posts.par_iter().map(|p| clean(&p.text, &stopwords)).collect();
        let model = fit_vectorizer(&docs, dim, min_count, hash_seed)?;
        info!("vocabulary: {} tokens", model.idf.len());
        let embedded: Vec<IdeaVector> = docs.par_iter().map(|d| model.embed(d)).collect();
        let mut set = VectorSet::new();
        for (p, v) in posts.iter().zip(embedded) {
            set.insert(p.id.clone(), v)?;
        }
        write_vectors(&out, posts.iter().map(|p| p.id.as_str()), &set)?;
        let mut outputs = vec![out.clone()];
        if let Some(m) = &model_out {
            write_json(m, &model)?;
            outputs.push(m.clone());
        }
        let mut inputs = vec![posts_path];
        inputs.extend(stop_path);
        let config = obj(json!({ "dim": dim, "min_count": min_count, "hash_seed": hash_seed }));
        Manifest::new("embed", &inputs, config, &outputs)?.write(&manifest_path_for(&out))
    }

    fn pca(&self, a: PcaArgs) -> Result<()> {
        let vectors = require_path(&a.vectors, &self.file.vectors, "vectors")?;
        let out = require_path(&a.out, &self.file.out, "out")?;
        let model_out = a.model_out.or_else(|| self.file.model_out.clone());
        let variance = pick(a.variance, self.file.variance, DEFAULT_VARIANCE);
        let set = load_external_vectors(&vectors)?;
        let ids = set.sorted_ids();
        let rows: Vec<&[f64]> = ids.iter().map(|id| &set.get(id).expect("listed id")[..]).collect();
        let model = fit_pca(&rows, variance)?;
        info!(
            "kept {} of {} components",
            model.k(),
            model.input_dim()
        );
        let mut reduced = VectorSet::new();
        for (id, row) in ids.iter().zip(&rows) {
            reduced.insert(*id, IdeaVector(model.transform(row)?))?;
        }
        write_vectors(&out, ids.iter().copied(), &reduced)?;
        let mut outputs = vec![out.clone()];
        if let Some(m) = &model_out {
            model.save(m)?;
            outputs.push(m.clone());
        }
        let config = obj(json!({ "variance": variance }));
        Manifest::new("pca", &[vectors], config, &outputs)?.write(&manifest_path_for(&out))
    }

    fn eccentricity(&self, a: EccentricityArgs) -> Result<()> {
        let posts = require_path(&a.posts, &self.file.posts, "posts")?;
        let edges = require_path(&a.edges, &self.file.edges, "edges")?;
        let vectors = require_path(&a.vectors, &self.file.vectors, "vectors")?;
        let out = require_path(&a.out, &self.file.out, "out")?;
        let days = pick(a.window_days, self.file.window_days, DEFAULT_WINDOW_DAYS);
        let window = window_seconds(days)?;
        let corpus = load_corpus(&posts, &edges)?;
        let set = load_external_vectors(&vectors)?;
        let records = replay(&corpus, &set, window)?;
        let undefined = records.iter().filter(|r| r.eccentricity.is_none()).count();
        info!("{} posts replayed, {undefined} with an empty cloud", records.len());
        write_records(&out, &records)?;
        let config = obj(json!({ "window_days": days }));
        Manifest::new("eccentricity", &[posts, edges, vectors], config, &[out.clone()])?
            .write(&manifest_path_for(&out))
    }

    fn dynamics(&self, a: DynamicsArgs) -> Result<()> {
        let records_path = require_path(&a.records, &self.file.records, "records")?;
        let out = require_path(&a.out, &self.file.out, "out")?;
        let weighting = parse_weighting(&pick(
            a.fg_weighting,
            self.file.fg_weighting.clone(),
            Weighting::default().to_string(),
        ))?;
        let min_gap = pick(a.min_gap, self.file.min_gap, DEFAULT_MIN_GAP_SECONDS);
        if !(min_gap > 0.0 && min_gap.is_finite()) {
            return Err(Error::InvalidArgument(format!("--min-gap must be positive, got {min_gap}")));
        }
        let records = read_records(&records_path)?;
        let rows = user_dynamics(&records, min_gap, &weighting);
        write_dynamics(&out, &rows)?;
        let config = obj(json!({ "fg_weighting": weighting.to_string(), "min_gap": min_gap }));
        Manifest::new("dynamics", &[records_path], config, &[out.clone()])?
            .write(&manifest_path_for(&out))
    }

    fn resolve_tests(&self, a: TestArgs) -> Result<ResolvedTests> {
        let bins = pick(a.bins, self.file.bins.clone(), self.preset.bins().to_string());
        let bandwidth = pick(a.bandwidth, self.file.bandwidth, DEFAULT_BANDWIDTH);
        let grid_points = pick(a.grid_points, self.file.grid_points, DEFAULT_GRID_POINTS);
        let method = pick(a.p_method, self.file.p_method.clone(), "table".to_string());
        let n_perm = pick(a.n_perm, self.file.n_perm, DEFAULT_N_PERM);
        let seed = pick(a.seed, self.file.seed, 0);
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("--bandwidth must be positive, got {bandwidth}")));
        }
        if grid_points < 2 {
            return Err(Error::InvalidArgument("--grid-points must be at least 2".into()));
        }
        let p_method = parse_p_method(&method, n_perm, seed)?;
        let binning = PopularityBinning::parse(&bins)?;
        let mut config = obj(json!({
            "bins": bins,
            "bandwidth": bandwidth,
            "grid_points": grid_points,
            "p_method": method,
        }));
        if let PMethod::Permutation { .. } = p_method {
            config.insert("n_perm".into(), json!(n_perm));
            config.insert("seed".into(), json!(seed));
        }
        Ok(ResolvedTests {
            binning,
            opts: SummaryOptions {
                bandwidth,
                grid_points,
                p_method,
                ..Default::default()
            },
            config,
        })
    }

    fn distributions(&self, a: DistributionsArgs) -> Result<()> {
        let records_path = require_path(&a.records, &self.file.records, "records")?;
        let out_dir = require_path(&a.out_dir, &self.file.out_dir, "out-dir")?;
        let t = self.resolve_tests(a.tests)?;
        let records = read_records(&records_path)?;
        let summary = bin_summary(&bin_by_popularity(&records, &t.binning), &t.opts)?;
        for n in &summary.notices {
            warn!("{n}");
        }
        create_dir(&out_dir)?;
        let csv_path = out_dir.join("distribution.csv");
        let json_path = out_dir.join("summary.json");
        write_density(&summary, &csv_path)?;
        write_json(&json_path, &summary)?;
        Manifest::new("distributions", &[records_path], t.config, &[csv_path, json_path])?
            .write(&out_dir.join("manifest.json"))
    }

    fn synth(&self, a: SynthArgs) -> Result<()> {
        let out_dir = require_path(&a.out_dir, &self.file.out_dir, "out-dir")?;
        let f = &self.file;
        let d = SynthConfig::default();
        let effect: Effect = match a.effect.or_else(|| f.effect.clone()) {
            Some(s) => s.parse()?,
            None => d.effect,
        };
        let cfg = SynthConfig {
            n_users: pick(a.n_users, f.n_users, d.n_users),
            follow_prob: pick(a.follow_prob, f.follow_prob, d.follow_prob),
            n_days: pick(a.n_days, f.n_days, d.n_days),
            posts_per_user_per_day: pick(a.posts_per_user_per_day, f.posts_per_user_per_day, d.posts_per_user_per_day),
            dim: pick(a.dim, f.dim, d.dim),
            seed: pick(a.seed, f.seed, d.seed),
            effect,
            effect_strength: pick(a.effect_strength, f.effect_strength, d.effect_strength),
            user_spread: pick(a.user_spread, f.user_spread, d.user_spread),
            noise: pick(a.noise, f.noise, d.noise),
            min_posts_per_user: pick(a.min_posts_per_user, f.min_posts_per_user, d.min_posts_per_user),
            base_likes: pick(a.base_likes, f.base_likes, d.base_likes),
            likes_dispersion: pick(a.likes_dispersion, f.likes_dispersion, d.likes_dispersion),
            with_text: pick(a.with_text, f.with_text, d.with_text),
        };
        let (corpus, vectors) = gen_corpus(&cfg)?;
        let mut outputs = self.write_corpus(&corpus, &out_dir)?;
        let vec_path = out_dir.join("vectors.jsonl");
        write_vectors(&vec_path, corpus.posts().iter().map(|p| p.id.as_str()), &vectors)?;
        outputs.push(vec_path);
        let config = obj(serde_json::to_value(&cfg).expect("config serializes"));
        Manifest::new("synth", &[], config, &outputs)?.write(&out_dir.join("manifest.json"))
    }

    fn report(&self, a: ReportArgs) -> Result<()> {
        let records_path = require_path(&a.records, &self.file.records, "records")?;
        let dynamics_path = require_path(&a.dynamics, &self.file.dynamics, "dynamics")?;
        let out_dir = require_path(&a.out_dir, &self.file.out_dir, "out-dir")?;
        let t = self.resolve_tests(a.tests)?;
        let records = read_records(&records_path)?;
        let dynamics = read_dynamics(&dynamics_path)?;
        let distributions = bin_summary(&bin_by_popularity(&records, &t.binning), &t.opts)?;
        for n in &distributions.notices {
            warn!("{n}");
        }
        let report = Report {
            dynamics: summarize_dynamics(&dynamics),
            g_comparison: compare_g(&dynamics)?,
            distributions,
        };

        create_dir(&out_dir)?;
        let summary = out_dir.join("summary.json");
        let density = out_dir.join("density.csv");
        let means = out_dir.join("bin_means.csv");
        let scores = out_dir.join("scores.csv");
        write_json(&summary, &report)?;
        write_density(&report.distributions, &density)?;
        write_bin_means(&report.distributions, &means)?;
        write_scores(&dynamics, &scores)?;
        Manifest::new(
            "report",
            &[records_path, dynamics_path],
            t.config,
            &[summary, density, means, scores],
        )?
        .write(&out_dir.join("manifest.json"))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::input(path, format!("{other:?}")),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn write_density(summary: &DistributionSummary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_distribution_csv(summary, std::io::BufWriter::new(file)).map_err(|e| csv_err(path, e))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_bin_means(summary: &DistributionSummary, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let res: csv::Result<()> = (|| {
        w.write_record(["bin", "n", "mean"])?;
        for b in &summary.bins {
            w.write_record([b.label.clone(), b.n.to_string(), fmt_opt(b.mean)])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_err(path, e))
}

fn write_scores(rows: &[UserDynamics], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let res: csv::Result<()> = (|| {
        w.write_record(["user", "f_ecc", "g_ecc", "f_self", "g_self"])?;
        for r in rows {
            w.write_record([
                r.user.clone(),
                fmt_opt(r.f_ecc),
                fmt_opt(r.g_ecc),
                fmt_opt(r.f_self),
                fmt_opt(r.g_self),
            ])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_err(path, e))
}

#[derive(Debug, Serialize)]
struct ScoreStats {
    n: usize,
    mean: Option<f64>,
    median: Option<f64>,
    frac_positive: Option<f64>,
}

fn score_stats(values: impl Iterator<Item = f64>) -> ScoreStats {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return ScoreStats {
            n,
            mean: None,
            median: None,
            frac_positive: None,
        };
    }
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    ScoreStats {
        n,
        mean: Some(v.iter().sum::<f64>() / n as f64),
        median: Some(median),
        frac_positive: Some(v.iter().filter(|x| **x > 0.0).count() as f64 / n as f64),
    }
}

#[derive(Debug, Serialize)]
struct DynamicsSummary {
    users: usize,
    f_ecc: ScoreStats,
    g_ecc: ScoreStats,
    f_self: ScoreStats,
    g_self: ScoreStats,
}

fn summarize_dynamics(rows: &[UserDynamics]) -> DynamicsSummary {
    DynamicsSummary {
        users: rows.len(),
        f_ecc: score_stats(rows.iter().filter_map(|r| r.f_ecc)),
        g_ecc: score_stats(rows.iter().filter_map(|r| r.g_ecc)),
        f_self: score_stats(rows.iter().filter_map(|r| r.f_self)),
        g_self: score_stats(rows.iter().filter_map(|r| r.g_self)),
    }
}

/// Mann-Whitney comparison of self and neighborhood G over users that have
/// both, so the two samples have equal size.
#[derive(Debug, Serialize)]
struct GComparison {
    n: usize,
    mean_g_self: f64,
    mean_g_ecc: f64,
    u: f64,
    p: f64,
    exact: bool,
}

fn compare_g(rows: &[UserDynamics]) -> Result<Option<GComparison>> {
    let (g_self, g_ecc): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.g_self?, r.g_ecc?)))
        .unzip();
    if g_self.is_empty() {
        return Ok(None);
    }
    let mw = mann_whitney(&g_self, &g_ecc)?;
    let n = g_self.len();
    Ok(Some(GComparison {
        n,
        mean_g_self: g_self.iter().sum::<f64>() / n as f64,
        mean_g_ecc: g_ecc.iter().sum::<f64>() / n as f64,
        u: mw.u,
        p: mw.p,
        exact: mw.exact,
    }))
}

#[derive(Debug, Serialize)]
struct Report {
    distributions: DistributionSummary,
    dynamics: DynamicsSummary,
    g_comparison: Option<GComparison>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verifies_cli() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn window_conversion() {
        assert_eq!(window_seconds(5.0).unwrap(), 432_000);
        assert!(window_seconds(0.0).is_err());
        assert!(window_seconds(-1.0).is_err());
    }

    #[test]
    fn p_methods() {
        assert_eq!(parse_p_method("table", 0, 0).unwrap(), PMethod::Table);
        assert_eq!(
            parse_p_method("permutation", 99, 4).unwrap(),
            PMethod::Permutation { n_perm: 99, seed: 4 }
        );
        assert!(parse_p_method("permutation", 0, 4).is_err());
        assert!(parse_p_method("bootstrap", 9, 4).is_err());
    }

    #[test]
    fn stats_median() {
        let s = score_stats([3.0, -1.0, 2.0, 10.0].into_iter());
        assert_eq!(s.median, Some(2.5));
        assert_eq!(s.frac_positive, Some(0.75));
        assert_eq!(score_stats(std::iter::empty()).mean, None);
    }
}
