//! Seeded synthetic ground truth: a preferential-attachment follower graph
//! that churns every period, plus a per-period tweet stream with topic
//! keywords and heavy-tailed engagement.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{read_snapshot, write_snapshot, Edge, Graph, Snapshot, VertexId};
use crate::topics::{dictionary_path, read_tweets, tweets_path, write_tweets, TopicDictionary, TweetRecord};

const STREAM_INITIAL: u64 = 0x1;
const STREAM_EVOLVE: u64 = 0x2;
const STREAM_HOT: u64 = 0x3;
const STREAM_PROFILE: u64 = 0x4;
const STREAM_TWEETS: u64 = 0x5;

const FILLER_VOCABULARY: usize = 400;

/// splitmix64 finaliser folded over `parts`; used to derive independent
/// stream seeds from one user seed.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

fn default_hot_boost() -> f64 {
    4.0
}

fn default_topic_count() -> usize {
    3
}

fn default_keywords() -> usize {
    100
}

fn default_true() -> bool {
    true
}

fn default_activity() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub n: usize,
    pub m0: usize,
    pub periods: usize,
    pub churn_add_frac: f64,
    pub churn_del_frac: f64,
    pub volatility_frac: f64,
    #[serde(default = "default_hot_boost")]
    pub hot_boost: f64,
    /// Share of new edges closing a follow-of-follow path instead of
    /// picking a preferential target.
    #[serde(default)]
    pub closure_frac: f64,
    #[serde(default = "default_topic_count")]
    pub topic_count: usize,
    #[serde(default = "default_keywords")]
    pub keywords_per_topic: usize,
    #[serde(default = "default_true")]
    pub tweets: bool,
    /// Scale of the per-user activity draw (expected tweets per period for
    /// a median-ish user).
    #[serde(default = "default_activity")]
    pub activity_scale: f64,
    pub rng_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 5_000,
            m0: 50_000,
            periods: 10,
            churn_add_frac: 0.05,
            churn_del_frac: 0.03,
            volatility_frac: 0.05,
            hot_boost: default_hot_boost(),
            closure_frac: 0.0,
            topic_count: default_topic_count(),
            keywords_per_topic: default_keywords(),
            tweets: true,
            activity_scale: default_activity(),
            rng_seed: 1,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {x} not in [0,1]")))
            }
        };
        frac("churn_add_frac", self.churn_add_frac)?;
        frac("churn_del_frac", self.churn_del_frac)?;
        frac("volatility_frac", self.volatility_frac)?;
        frac("closure_frac", self.closure_frac)?;
        if self.n == 0 || self.periods == 0 {
            return Err(Error::Config("n and periods must be at least 1".into()));
        }
        if self.n > VertexId::MAX as usize {
            return Err(Error::Config(format!("n = {} exceeds the id range", self.n)));
        }
        if !(self.hot_boost >= 1.0 && self.hot_boost.is_finite()) {
            return Err(Error::Config(format!("hot_boost {} must be >= 1", self.hot_boost)));
        }
        if !(self.activity_scale >= 0.0 && self.activity_scale.is_finite()) {
            return Err(Error::Config("activity_scale must be >= 0".into()));
        }
        if self.tweets && (self.topic_count == 0 || self.keywords_per_topic == 0) {
            return Err(Error::Config(
                "tweet generation needs topic_count and keywords_per_topic >= 1".into(),
            ));
        }
        Ok(())
    }

    fn max_edges(&self) -> usize {
        self.n * (self.n - 1)
    }
}

/// Samples vertices with probability proportional to `in_degree + 1`.
struct TargetUrn {
    slots: Vec<VertexId>,
}

impl TargetUrn {
    fn from_graph(g: &Graph) -> Self {
        let mut slots = Vec::with_capacity(g.vertex_count() + g.edge_count());
        for v in g.vertices() {
            slots.push(v);
            slots.extend(std::iter::repeat_n(v, g.in_degree(v)));
        }
        TargetUrn { slots }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VertexId {
        self.slots[rng.random_range(0..self.slots.len())]
    }
}

fn fill_from_complement<R: Rng + ?Sized>(g: &mut Graph, count: usize, rng: &mut R) {
    let n = g.vertex_count() as VertexId;
    let mut missing: Vec<Edge> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v && !g.contains_edge(u, v))
        .collect();
    let (picked, _) = missing.partial_shuffle(rng, count);
    let mut picked = picked.to_vec();
    picked.sort_unstable();
    for (u, v) in picked {
        g.add_edge(u, v).expect("complement pair is valid");
    }
}

/// Initial follower graph `G_0`.
///
/// Vertices arrive one at a time and follow earlier vertices chosen
/// proportionally to `in_degree + 1` (Price's model). Whatever the arrival
/// phase could not place is topped up with uniform sources and preferential
/// targets. Ids are shuffled at the end so hub status is unrelated to id.
pub fn gen_initial(cfg: &GenConfig) -> Result<Snapshot> {
    cfg.validate()?;
    let n = cfg.n;
    if cfg.m0 < n {
        return Err(Error::Infeasible(format!("m0 = {} must be at least n = {n}", cfg.m0)));
    }
    if cfg.m0 > cfg.max_edges() {
        return Err(Error::Infeasible(format!(
            "m0 = {} exceeds the {} possible directed edges on {n} vertices",
            cfg.m0,
            cfg.max_edges()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, &[STREAM_INITIAL]));
    let mut g = Graph::new(n);
    let base = cfg.m0 / n;
    let extra = cfg.m0 % n;

    let mut urn: Vec<VertexId> = Vec::with_capacity(n + cfg.m0);
    let mut chosen: Vec<VertexId> = Vec::new();
    for i in 0..n {
        let quota = (base + usize::from(i < extra)).min(i);
        chosen.clear();
        if quota == i {
            chosen.extend(0..i as VertexId);
        } else {
            while chosen.len() < quota {
                let v = urn[rng.random_range(0..urn.len())];
                if !chosen.contains(&v) {
                    chosen.push(v);
                }
            }
        }
        for &v in &chosen {
            g.add_edge(i as VertexId, v)?;
            urn.push(v);
        }
        urn.push(i as VertexId);
    }

    let mut misses = 0usize;
    while g.edge_count() < cfg.m0 {
        if misses > 1_000 {
            let remaining = cfg.m0 - g.edge_count();
            fill_from_complement(&mut g, remaining, &mut rng);
            break;
        }
        let u = rng.random_range(0..n) as VertexId;
        let v = urn[rng.random_range(0..urn.len())];
        if u != v && g.add_edge(u, v)? {
            urn.push(v);
            misses = 0;
        } else {
            misses += 1;
        }
    }

    let mut perm: Vec<VertexId> = (0..n as VertexId).collect();
    perm.shuffle(&mut rng);
    let relabelled: Vec<Edge> = g.edges().map(|(u, v)| (perm[u as usize], perm[v as usize])).collect();
    let graph = Graph::from_edges(n, relabelled)?;
    Ok(Snapshot { t: 0, graph })
}

/// The fixed set of volatile users for this seed.
pub fn hot_users(cfg: &GenConfig) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, &[STREAM_HOT]));
    let count = (cfg.volatility_frac * cfg.n as f64).round() as usize;
    let mut ids: Vec<usize> = (0..cfg.n).collect();
    let (hot, _) = ids.partial_shuffle(&mut rng, count);
    let mut mask = vec![false; cfg.n];
    for &v in hot.iter() {
        mask[v] = true;
    }
    mask
}

/// One period of churn: `round(del·|E|)` deletions biased towards edges
/// touching hot users, then `round(add·|E|)` additions with hot users
/// favoured as sources and preferential (or closing) targets.
pub fn evolve(prev: &Snapshot, cfg: &GenConfig, t: usize) -> Result<Snapshot> {
    cfg.validate()?;
    if t != prev.t + 1 {
        return Err(Error::invalid(format!(
            "evolve to t = {t} from snapshot at t = {}",
            prev.t
        )));
    }
    let n = prev.graph.vertex_count();
    if n != cfg.n {
        return Err(Error::invalid(format!(
            "snapshot has {n} vertices, config says {}",
            cfg.n
        )));
    }
    let hot = hot_users(cfg);
    let boost = cfg.hot_boost;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, &[STREAM_EVOLVE, t as u64]));
    let m = prev.graph.edge_count();
    let n_del = ((cfg.churn_del_frac * m as f64).round() as usize).min(m);
    let n_add = (cfg.churn_add_frac * m as f64).round() as usize;

    let mut g = prev.graph.clone();
    let mut pool: Vec<Edge> = prev.graph.edges().collect();
    let weight = |(u, v): Edge| {
        if hot[u as usize] || hot[v as usize] {
            boost
        } else {
            1.0
        }
    };
    let mut deleted = 0;
    while deleted < n_del {
        let i = rng.random_range(0..pool.len());
        if rng.random::<f64>() * boost < weight(pool[i]) {
            let (u, v) = pool.swap_remove(i);
            g.remove_edge(u, v);
            deleted += 1;
        }
    }

    let room = cfg.max_edges() - g.edge_count();
    let n_add = n_add.min(room);
    let urn = TargetUrn::from_graph(&g);
    let mut added = 0;
    let mut misses = 0usize;
    while added < n_add {
        if misses > 1_000 {
            fill_from_complement(&mut g, n_add - added, &mut rng);
            break;
        }
        let u = rng.random_range(0..n) as VertexId;
        let wu = if hot[u as usize] { boost } else { 1.0 };
        if rng.random::<f64>() * boost >= wu {
            continue;
        }
        let mut v = None;
        if cfg.closure_frac > 0.0 && rng.random::<f64>() < cfg.closure_frac {
            let outs = g.out_neighbors(u);
            if !outs.is_empty() {
                let w = outs[rng.random_range(0..outs.len())];
                let outs2 = g.out_neighbors(w);
                if !outs2.is_empty() {
                    v = Some(outs2[rng.random_range(0..outs2.len())]);
                }
            }
        }
        let v = v.unwrap_or_else(|| urn.sample(&mut rng));
        if u != v && g.add_edge(u, v)? {
            added += 1;
            misses = 0;
        } else {
            misses += 1;
        }
    }
    Ok(Snapshot { t, graph: g })
}

/// Per-user tweeting behaviour, fixed for a seed.
#[derive(Clone, Debug)]
pub struct UserProfiles {
    /// Expected tweets per period.
    pub activity: Vec<f64>,
    /// Cumulative topic mixture per user.
    pub mixture: Vec<Vec<f64>>,
}

impl UserProfiles {
    pub fn new(cfg: &GenConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, &[STREAM_PROFILE]));
        let pareto = Pareto::new(1.0, 1.5).expect("valid pareto");
        let topics = cfg.topic_count.max(1);
        let mut activity = Vec::with_capacity(cfg.n);
        let mut mixture = Vec::with_capacity(cfg.n);
        for _ in 0..cfg.n {
            // about a fifth of users stay silent
            let x: f64 = pareto.sample(&mut rng) - 1.0;
            let a = if rng.random::<f64>() < 0.2 {
                0.0
            } else {
                (cfg.activity_scale * x).min(50.0)
            };
            activity.push(a);

            let mut w = vec![0.0; topics];
            let main = rng.random_range(0..topics);
            w[main] = 1.0;
            if topics > 1 && rng.random::<f64>() < 0.5 {
                let other = rng.random_range(0..topics);
                w[other] += rng.random::<f64>();
            }
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            let cumulative = w
                .iter()
                .map(|x| {
                    acc += x / total;
                    acc
                })
                .collect();
            mixture.push(cumulative);
        }
        UserProfiles { activity, mixture }
    }

    fn pick_topic<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> usize {
        let x: f64 = rng.random();
        let cum = &self.mixture[u];
        cum.iter().position(|&c| x < c).unwrap_or(cum.len() - 1)
    }
}

fn keyword(topic: usize, i: usize) -> String {
    format!("t{topic}w{i}")
}

/// Synthetic dictionaries: keyword `i` of a topic sits in weight group
/// `1 + i mod 10`.
pub fn gen_dictionaries(cfg: &GenConfig) -> Result<Vec<TopicDictionary>> {
    (0..cfg.topic_count)
        .map(|j| {
            let mut groups: Vec<(u8, Vec<String>)> = (1..=10).map(|w| (w, Vec::new())).collect();
            for i in 0..cfg.keywords_per_topic {
                groups[i % 10].1.push(keyword(j, i));
            }
            groups.retain(|(_, words)| !words.is_empty());
            let mut d = TopicDictionary::from_groups(j as u32, &groups)?;
            d.name = Some(format!("topic{j}"));
            Ok(d)
        })
        .collect()
}

/// Tweets authored during period `t`, ordered by author.
pub fn gen_tweets(snapshot: &Snapshot, cfg: &GenConfig, t: usize) -> Vec<TweetRecord> {
    let profiles = UserProfiles::new(cfg);
    gen_tweets_with(snapshot, cfg, &profiles, t)
}

pub fn gen_tweets_with(
    snapshot: &Snapshot,
    cfg: &GenConfig,
    profiles: &UserProfiles,
    t: usize,
) -> Vec<TweetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.rng_seed, &[STREAM_TWEETS, t as u64]));
    let engagement = Pareto::new(1.0, 2.5).expect("valid pareto");
    let g = &snapshot.graph;
    let mut out = Vec::new();
    for u in 0..cfg.n.min(g.vertex_count()) {
        let a = profiles.activity[u];
        if a <= 0.0 {
            continue;
        }
        let count = Poisson::new(a).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
        let mean = 1.0 + 0.5 * g.in_degree(u as VertexId) as f64;
        for _ in 0..count {
            let topic = profiles.pick_topic(u, &mut rng);
            let mut words = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                words.push(keyword(topic, rng.random_range(0..cfg.keywords_per_topic)));
            }
            for _ in 0..rng.random_range(2..=8) {
                words.push(format!("f{}", rng.random_range(0..FILLER_VOCABULARY)));
            }
            words.shuffle(&mut rng);
            // Pareto(1, 2.5) has mean 5/3, so (x - 1) * 1.5 has mean 1
            let rt = (mean * (engagement.sample(&mut rng) - 1.0) * 1.5).floor() as u64;
            let fav = (2.0 * mean * (engagement.sample(&mut rng) - 1.0) * 1.5).floor() as u64;
            out.push(TweetRecord {
                period: t,
                author: u as VertexId,
                rt_count: rt,
                fav_count: fav,
                text: words.join(" "),
            });
        }
    }
    out
}

/// Ground truth for `t = 0..=T`.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub snapshots: Vec<Snapshot>,
    /// Tweets per period, empty when the dataset has none.
    pub tweets: Vec<Vec<TweetRecord>>,
    pub dictionaries: Vec<TopicDictionary>,
}

impl Dataset {
    pub fn periods(&self) -> usize {
        self.snapshots.len().saturating_sub(1)
    }

    pub fn vertex_count(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.graph.vertex_count())
    }

    pub fn has_tweets(&self) -> bool {
        !self.tweets.is_empty() && !self.dictionaries.is_empty()
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    let mut snapshots = vec![gen_initial(cfg)?];
    for t in 1..=cfg.periods {
        let next = evolve(&snapshots[t - 1], cfg, t)?;
        snapshots.push(next);
    }
    let (tweets, dictionaries) = if cfg.tweets {
        let profiles = UserProfiles::new(cfg);
        let tweets = snapshots
            .iter()
            .map(|s| gen_tweets_with(s, cfg, &profiles, s.t))
            .collect();
        (tweets, gen_dictionaries(cfg)?)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(Dataset {
        snapshots,
        tweets,
        dictionaries,
    })
}

/// Contents of `dataset.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub n: usize,
    pub periods: usize,
    #[serde(default)]
    pub topic_count: usize,
    #[serde(default)]
    pub tweets: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenConfig>,
}

pub const MANIFEST_FILE: &str = "dataset.toml";

pub fn write_dataset(dir: &Path, data: &Dataset, cfg: Option<&GenConfig>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in &data.snapshots {
        write_snapshot(dir, s)?;
    }
    for (t, tweets) in data.tweets.iter().enumerate() {
        write_tweets(&tweets_path(dir, t), tweets)?;
    }
    for d in &data.dictionaries {
        d.save(&dictionary_path(dir, d.topic_id))?;
    }
    let manifest = Manifest {
        n: data.vertex_count(),
        periods: data.periods(),
        topic_count: data.dictionaries.len(),
        tweets: data.has_tweets(),
        generator: cfg.cloned(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: 0,
        msg: e.to_string(),
    })
}

/// Loads snapshots `0..=periods` (and tweets/dictionaries when the manifest
/// declares them) from a dataset directory.
pub fn load_dataset(dir: &Path, periods: Option<usize>) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let periods = periods.unwrap_or(manifest.periods);
    let snapshots = (0..=periods)
        .map(|t| read_snapshot(dir, t, Some(manifest.n)))
        .collect::<Result<Vec<_>>>()?;
    let (tweets, dictionaries) = if manifest.tweets {
        let tweets = (0..=periods)
            .map(|t| read_tweets(&tweets_path(dir, t)))
            .collect::<Result<Vec<_>>>()?;
        let dicts = (0..manifest.topic_count as u32)
            .map(|j| TopicDictionary::load(&dictionary_path(dir, j)))
            .collect::<Result<Vec<_>>>()?;
        (tweets, dicts)
    } else {
        (Vec::new(), Vec::new())
    };
    for tweets in &tweets {
        if let Some(bad) = tweets.iter().find(|t| t.author as usize >= manifest.n) {
            return Err(Error::UnknownVertex {
                id: bad.author,
                universe: manifest.n,
            });
        }
    }
    Ok(Dataset {
        snapshots,
        tweets,
        dictionaries,
    })
}
