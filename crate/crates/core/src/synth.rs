//! Seeded synthetic corpora with planted effects.
//!
//! Every mode draws the same random numbers in the same order; the effect
//! and its strength only change how those draws are combined. Attention
//! coupling with strength 0 and elevator drift with strength 0 therefore
//! reproduce the null corpus exactly for the same seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::SECONDS_PER_DAY;
use crate::corpus::{Corpus, Post, SocialGraph};
use crate::embed::{IdeaVector, VectorSet};
use crate::error::{Error, Result};

pub const MAX_LIKES: u64 = 500;
const VOCAB_SIZE: usize = 2000;
const TOKENS_PER_POST: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Effect {
    /// Expected likes grow with a post's deviation from its neighborhood
    /// center.
    AttentionCoupling,
    /// All users' idea means move together at a constant velocity.
    ElevatorDrift,
    #[default]
    Null,
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Effect::AttentionCoupling => "attention-coupling",
            Effect::ElevatorDrift => "elevator-drift",
            Effect::Null => "null",
        })
    }
}

impl FromStr for Effect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention-coupling" => Ok(Effect::AttentionCoupling),
            "elevator-drift" => Ok(Effect::ElevatorDrift),
            "null" => Ok(Effect::Null),
            _ => Err(Error::InvalidArgument(format!(
                "unknown effect {s:?} (expected attention-coupling, elevator-drift or null)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    /// Probability of each directed follow edge.
    pub follow_prob: f64,
    pub n_days: f64,
    pub posts_per_user_per_day: f64,
    pub dim: usize,
    pub seed: u64,
    pub effect: Effect,
    /// Attention coupling: log-likes per standard deviation of planted
    /// deviation. Elevator drift: displacement per day.
    pub effect_strength: f64,
    /// Standard deviation of user means around the origin, per coordinate.
    pub user_spread: f64,
    /// Standard deviation of per-post noise, per coordinate.
    pub noise: f64,
    /// Lower bound on each user's post count.
    pub min_posts_per_user: usize,
    /// Median of the uncoupled like rate.
    pub base_likes: f64,
    /// Log-scale spread of the like rate.
    pub likes_dispersion: f64,
    /// Also synthesize post text.
    pub with_text: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 300,
            follow_prob: 0.03,
            n_days: 10.0,
            posts_per_user_per_day: 5.0,
            dim: 16,
            seed: 0,
            effect: Effect::Null,
            effect_strength: 1.0,
            user_spread: 1.0,
            noise: 0.1,
            min_posts_per_user: 0,
            base_likes: 5.0,
            likes_dispersion: 1.0,
            with_text: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_users == 0 || self.dim == 0 {
            return bad("n_users and dim must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.follow_prob) {
            return bad(format!("follow_prob must be in [0, 1], got {}", self.follow_prob));
        }
        if !(self.n_days > 0.0 && self.n_days.is_finite()) {
            return bad(format!("n_days must be positive, got {}", self.n_days));
        }
        if !(self.posts_per_user_per_day > 0.0 && self.posts_per_user_per_day.is_finite()) {
            return bad(format!(
                "posts_per_user_per_day must be positive, got {}",
                self.posts_per_user_per_day
            ));
        }
        for (name, v) in [
            ("effect_strength", self.effect_strength),
            ("user_spread", self.user_spread),
            ("noise", self.noise),
            ("likes_dispersion", self.likes_dispersion),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.base_likes > 0.0 && self.base_likes.is_finite()) {
            return bad(format!("base_likes must be positive, got {}", self.base_likes));
        }
        Ok(())
    }
}

/// Generated corpus with the quantities the effects were planted on.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub vectors: VectorSet,
    /// Distance of each post (corpus order) from the mean of its author's
    /// ego-neighborhood user means, both taken at the post's time.
    pub planted_deviation: Vec<f64>,
    /// Unit direction of the elevator drift; drawn in every mode.
    pub drift_direction: Vec<f64>,
}

pub fn gen_corpus(cfg: &SynthConfig) -> Result<(Corpus, VectorSet)> {
    gen_corpus_detailed(cfg).map(|o| (o.corpus, o.vectors))
}

fn normal_vec(rng: &mut ChaCha8Rng, dim: usize, sd: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

fn user_id(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("u{i:0width$}")
}

fn word(i: usize) -> String {
    const CONS: &[u8] = b"bdfgklmnprstvz";
    const VOW: &[u8] = b"aeiou";
    let mut s = String::new();
    let mut x = i + 1;
    while x > 0 {
        s.push(CONS[x % CONS.len()] as char);
        x /= CONS.len();
        s.push(VOW[x % VOW.len()] as char);
        x /= VOW.len();
    }
    s.push('x');
    s
}

pub fn gen_corpus_detailed(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_users;
    let d = cfg.dim;
    let users: Vec<String> = (0..n).map(|i| user_id(i, n)).collect();

    let mut followees: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, adj) in followees.iter_mut().enumerate() {
        for b in 0..n {
            if a != b && rng.random_bool(cfg.follow_prob) {
                adj.push(b);
            }
        }
    }

    let drift_direction = {
        let v = normal_vec(&mut rng, d, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter().map(|x| x / norm).collect()
        } else {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        }
    };
    let means: Vec<Vec<f64>> = (0..n)
        .map(|_| normal_vec(&mut rng, d, cfg.user_spread))
        .collect();
    // ego-neighborhood center of user means; drift moves everyone alike, so
    // it is added per post below
    let centers: Vec<Vec<f64>> = (0..n)
        .map(|u| {
            let mut c = means[u].clone();
            for &f in &followees[u] {
                for (ci, mi) in c.iter_mut().zip(&means[f]) {
                    *ci += mi;
                }
            }
            let k = (followees[u].len() + 1) as f64;
            c.iter_mut().for_each(|x| *x /= k);
            c
        })
        .collect();

    let horizon = cfg.n_days * SECONDS_PER_DAY as f64;
    let count_dist = Poisson::new(cfg.posts_per_user_per_day * cfg.n_days)
        .map_err(|e| Error::InvalidArgument(format!("post rate: {e}")))?;
    struct Raw {
        user: usize,
        t: i64,
        vec: Vec<f64>,
        deviation: f64,
        popularity: f64,
    }
    let mut raw: Vec<Raw> = Vec::new();
    let drift = match cfg.effect {
        Effect::ElevatorDrift => cfg.effect_strength,
        _ => 0.0,
    };
    for u in 0..n {
        let count = (count_dist.sample(&mut rng) as usize).max(cfg.min_posts_per_user);
        let mut times: Vec<i64> = (0..count)
            .map(|_| (rng.random::<f64>() * horizon).floor() as i64)
            .collect();
        times.sort_unstable();
        for t in times {
            let eps = normal_vec(&mut rng, d, cfg.noise);
            let popularity: f64 = StandardNormal.sample(&mut rng);
            let shift = drift * t as f64 / SECONDS_PER_DAY as f64;
            let vec: Vec<f64> = (0..d)
                .map(|i| means[u][i] + shift * drift_direction[i] + eps[i])
                .collect();
            let deviation = (0..d)
                .map(|i| {
                    let x = vec[i] - centers[u][i] - shift * drift_direction[i];
                    x * x
                })
                .sum::<f64>()
                .sqrt();
            raw.push(Raw {
                user: u,
                t,
                vec,
                deviation,
                popularity,
            });
        }
    }

    let coupling = match cfg.effect {
        Effect::AttentionCoupling => cfg.effect_strength,
        _ => 0.0,
    };
    let m = raw.len().max(1) as f64;
    let mean_dev = raw.iter().map(|r| r.deviation).sum::<f64>() / m;
    let sd_dev = (raw.iter().map(|r| (r.deviation - mean_dev).powi(2)).sum::<f64>() / m).sqrt();
    let likes: Vec<u64> = raw
        .iter()
        .map(|r| {
            let z = if sd_dev > 0.0 {
                (r.deviation - mean_dev) / sd_dev
            } else {
                0.0
            };
            let rate = (cfg.base_likes.ln() + cfg.likes_dispersion * r.popularity + coupling * z)
                .exp()
                .min(1e6);
            let k = Poisson::new(rate)
                .map(|p| p.sample(&mut rng) as u64)
                .unwrap_or(0);
            k.min(MAX_LIKES)
        })
        .collect();

    // text comes from its own stream so it never perturbs the numbers above
    let mut text_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    text_rng.set_stream(1);

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by_key(|&i| (raw[i].t, raw[i].user));
    let width = raw.len().saturating_sub(1).to_string().len();
    let mut posts = Vec::with_capacity(raw.len());
    let mut vectors = VectorSet::new();
    let mut planted_deviation = Vec::with_capacity(raw.len());
    for (rank, &i) in order.iter().enumerate() {
        let r = &raw[i];
        let id = format!("s{rank:0width$}");
        let text = if cfg.with_text {
            synth_text(&mut text_rng, &r.vec)
        } else {
            String::new()
        };
        posts.push(Post {
            id: id.clone(),
            author: users[r.user].clone(),
            created_at: r.t,
            text,
            likes: likes[i],
        });
        vectors.insert(id, IdeaVector(r.vec.clone()))?;
        planted_deviation.push(r.deviation);
    }

    let edges = followees
        .iter()
        .enumerate()
        .flat_map(|(a, adj)| adj.iter().map(move |&b| (a, b)))
        .map(|(a, b)| (users[a].clone(), users[b].clone()));
    let graph = SocialGraph::new(users.iter().cloned(), edges);
    let corpus = Corpus::new(posts, graph)?;
    Ok(SynthOutput {
        corpus,
        vectors,
        planted_deviation,
        drift_direction,
    })
}

/// Words are tied to coordinates: each token picks a coordinate, favoring
/// large positive ones, and then one of that coordinate's words.
fn synth_text(rng: &mut ChaCha8Rng, v: &[f64]) -> String {
    let d = v.len();
    let top = (0..d)
        .max_by(|&a, &b| v[a].total_cmp(&v[b]))
        .unwrap_or(0);
    let per_coord = (VOCAB_SIZE / d).max(1);
    let mut out = Vec::with_capacity(TOKENS_PER_POST);
    for _ in 0..TOKENS_PER_POST {
        let coord = if rng.random_bool(0.6) {
            top
        } else {
            rng.random_range(0..d)
        };
        out.push(word(coord * per_coord + rng.random_range(0..per_coord)));
    }
    out.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    fn likes(o: &SynthOutput) -> Vec<f64> {
        o.corpus.posts().iter().map(|p| p.likes as f64).collect()
    }

    #[test]
    fn null_uncorrelated() {
        for seed in 0..3 {
            let cfg = SynthConfig {
                n_users: 200,
                n_days: 10.0,
                posts_per_user_per_day: 6.0,
                seed,
                ..Default::default()
            };
            let o = gen_corpus_detailed(&cfg).unwrap();
            assert!(o.corpus.posts().len() >= 10_000);
            let r = pearson(&o.planted_deviation, &likes(&o));
            assert!(r.abs() < 0.05, "seed {seed}: r = {r}");
        }
    }

    #[test]
    fn coupling_correlates() {
        let cfg = SynthConfig {
            n_users: 100,
            effect: Effect::AttentionCoupling,
            effect_strength: 1.0,
            ..Default::default()
        };
        let o = gen_corpus_detailed(&cfg).unwrap();
        let log_likes: Vec<f64> = likes(&o).iter().map(|l| (l + 1.0).ln()).collect();
        assert!(pearson(&o.planted_deviation, &log_likes) > 0.3);
    }

    #[test]
    fn zero_strength_is_null() {
        let base = SynthConfig {
            n_users: 40,
            seed: 9,
            ..Default::default()
        };
        let null = gen_corpus_detailed(&base).unwrap();
        for effect in [Effect::AttentionCoupling, Effect::ElevatorDrift] {
            let o = gen_corpus_detailed(&SynthConfig {
                effect,
                effect_strength: 0.0,
                ..base.clone()
            })
            .unwrap();
            assert_eq!(o.corpus.posts(), null.corpus.posts());
            assert_eq!(o.planted_deviation, null.planted_deviation);
            for p in null.corpus.posts() {
                assert_eq!(o.vectors.get(&p.id), null.vectors.get(&p.id));
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig {
            n_users: 30,
            seed: 5,
            effect: Effect::ElevatorDrift,
            with_text: true,
            ..Default::default()
        };
        let a = gen_corpus_detailed(&cfg).unwrap();
        let b = gen_corpus_detailed(&cfg).unwrap();
        assert_eq!(a.corpus.posts(), b.corpus.posts());
        assert_eq!(a.corpus.graph(), b.corpus.graph());
        for p in a.corpus.posts() {
            assert_eq!(a.vectors.get(&p.id), b.vectors.get(&p.id));
        }
        let c = gen_corpus_detailed(&SynthConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.corpus.posts(), c.corpus.posts());
    }

    #[test]
    fn text_does_not_change_numbers() {
        let cfg = SynthConfig {
            n_users: 20,
            ..Default::default()
        };
        let plain = gen_corpus_detailed(&cfg).unwrap();
        let texty = gen_corpus_detailed(&SynthConfig {
            with_text: true,
            ..cfg
        })
        .unwrap();
        for (a, b) in plain.corpus.posts().iter().zip(texty.corpus.posts()) {
            assert_eq!((a.created_at, a.likes, &a.author), (b.created_at, b.likes, &b.author));
            assert!(a.text.is_empty());
            assert_eq!(b.text.split(' ').count(), TOKENS_PER_POST);
        }
    }

    #[test]
    fn elevator_slope_matches_strength() {
        let s = 0.7;
        let cfg = SynthConfig {
            n_users: 30,
            n_days: 10.0,
            posts_per_user_per_day: 6.0,
            effect: Effect::ElevatorDrift,
            effect_strength: s,
            min_posts_per_user: 50,
            seed: 2,
            ..Default::default()
        };
        let o = gen_corpus_detailed(&cfg).unwrap();
        for u in o.corpus.graph().users() {
            let pts: Vec<(f64, f64)> = o
                .corpus
                .posts()
                .iter()
                .filter(|p| &p.author == u)
                .map(|p| {
                    let v = o.vectors.get(&p.id).unwrap();
                    let proj: f64 = v.iter().zip(&o.drift_direction).map(|(a, b)| a * b).sum();
                    (p.created_at as f64 / SECONDS_PER_DAY as f64, proj)
                })
                .collect();
            assert!(pts.len() >= 50);
            let n = pts.len() as f64;
            let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let mp = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - mp)).sum::<f64>()
                / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
            assert!((slope - s).abs() <= 0.2 * s, "user {u}: slope {slope}");
        }
    }

    #[test]
    fn likes_capped_and_counts_positive() {
        let o = gen_corpus_detailed(&SynthConfig {
            n_users: 50,
            base_likes: 400.0,
            min_posts_per_user: 3,
            ..Default::default()
        })
        .unwrap();
        assert!(o.corpus.posts().iter().all(|p| p.likes <= MAX_LIKES));
        assert!(o.corpus.posts().iter().any(|p| p.likes == MAX_LIKES));
        for u in o.corpus.graph().users() {
            assert!(o.corpus.posts().iter().filter(|p| &p.author == u).count() >= 3);
        }
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SynthConfig { n_users: 0, ..Default::default() },
            SynthConfig { follow_prob: 1.5, ..Default::default() },
            SynthConfig { n_days: 0.0, ..Default::default() },
            SynthConfig { effect_strength: -1.0, ..Default::default() },
        ] {
            assert!(gen_corpus(&cfg).is_err());
        }
        assert!("sideways".parse::<Effect>().is_err());
        assert_eq!("elevator-drift".parse::<Effect>().unwrap(), Effect::ElevatorDrift);
    }
}
