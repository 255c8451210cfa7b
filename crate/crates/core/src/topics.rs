//! Topic pipeline: keyword extraction, dictionary scoring, RT-FAV weighting,
//! topic-weighted follower graphs and the topic relevance filter.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::probing::{change_scores, select_random, select_rrch, InfluencePast, RoundRobinRecord, StrategyConfig};
use crate::rank::WeightedGraph;

pub type KeywordHistogram = BTreeMap<String, u32>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub period: usize,
    pub author: VertexId,
    pub rt_count: u64,
    pub fav_count: u64,
    pub text: String,
}

type Stemmer = Arc<dyn Fn(&str) -> String + Send + Sync>;

/// Language-neutral tokenizer: Unicode lowercase, split on anything that is
/// not alphanumeric, drop stop words, then stem if a stemmer is installed.
#[derive(Clone, Default)]
pub struct Tokenizer {
    stop_words: HashSet<String>,
    stemmer: Option<Stemmer>,
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tokenizer")
            .field("stop_words", &self.stop_words.len())
            .field("stemmer", &self.stemmer.is_some())
            .finish()
    }
}

impl Tokenizer {
    pub fn new() -> Self {
        Tokenizer::default()
    }

    pub fn with_stop_words<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stop_words
            .extend(words.into_iter().map(|w| w.as_ref().to_lowercase()));
        self
    }

    pub fn with_stemmer(mut self, stemmer: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        self.stemmer = Some(Arc::new(stemmer));
        self
    }

    pub fn tokens<'a>(&'a self, text: &'a str) -> impl Iterator<Item = String> + 'a {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .filter(|t| !self.stop_words.contains(t))
            .map(|t| match &self.stemmer {
                Some(stem) => stem(&t),
                None => t,
            })
    }

    pub fn extract_keywords(&self, text: &str) -> KeywordHistogram {
        let mut hist = KeywordHistogram::new();
        for t in self.tokens(text) {
            *hist.entry(t).or_default() += 1;
        }
        hist
    }
}

/// Keyword weights for one topic, all in `(0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicDictionary {
    pub topic_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "keywords")]
    pub entries: BTreeMap<String, f64>,
}

impl TopicDictionary {
    /// Builds a dictionary from keyword groups weighted on a 1..=10 scale,
    /// normalised by the largest group weight.
    pub fn from_groups(topic_id: u32, groups: &[(u8, Vec<String>)]) -> Result<Self> {
        let max = groups.iter().map(|(w, _)| *w).max().unwrap_or(0);
        let mut entries = BTreeMap::new();
        for (w, words) in groups {
            if !(1..=10).contains(w) {
                return Err(Error::invalid(format!("group weight {w} outside 1..=10")));
            }
            for word in words {
                let key = word.to_lowercase();
                let weight = *w as f64 / max as f64;
                if entries.insert(key.clone(), weight).is_some() {
                    return Err(Error::invalid(format!("keyword {key:?} listed twice")));
                }
            }
        }
        Ok(TopicDictionary {
            topic_id,
            name: None,
            entries,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (k, &w) in &self.entries {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::invalid(format!(
                    "topic {}: keyword {k:?} weight {w} not in (0,1]",
                    self.topic_id
                )));
            }
        }
        Ok(())
    }

    pub fn weight(&self, keyword: &str) -> Option<f64> {
        self.entries.get(keyword).copied()
    }

    pub fn mentions_any(&self, hist: &KeywordHistogram) -> bool {
        hist.keys().any(|k| self.entries.contains_key(k))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dict: TopicDictionary = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        dict.validate()?;
        Ok(dict)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::invalid(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn dictionary_path(dir: &Path, topic: u32) -> PathBuf {
    dir.join(format!("topic_{topic}.toml"))
}

/// Weighted hit rate `Σ k[w]·d[w] / Σ k[w]`, zero for an empty histogram.
pub fn raw_topic_score(hist: &KeywordHistogram, dict: &TopicDictionary) -> f64 {
    let total: u64 = hist.values().map(|&c| c as u64).sum();
    if total == 0 {
        return 0.0;
    }
    let hit: f64 = hist
        .iter()
        .filter_map(|(k, &c)| dict.weight(k).map(|w| w * c as f64))
        .sum();
    hit / total as f64
}

/// Retweets plus favourites over a user's tweets.
pub fn rtfav_total<'a>(tweets: impl IntoIterator<Item = &'a TweetRecord>) -> u64 {
    tweets.into_iter().map(|t| t.rt_count + t.fav_count).sum()
}

/// Keep a user for a topic when at least a fraction `p` of their tweets
/// mention a dictionary keyword; users without tweets are dropped.
pub fn passes_relevance(related: u32, total: u32, p: f64) -> bool {
    total > 0 && related as f64 >= p * total as f64
}

pub fn relevance_filter(
    tweets: &[TweetRecord],
    dict: &TopicDictionary,
    p: f64,
    tokenizer: &Tokenizer,
) -> bool {
    let related = tweets
        .iter()
        .filter(|t| dict.mentions_any(&tokenizer.extract_keywords(&t.text)))
        .count();
    passes_relevance(related as u32, tweets.len() as u32, p)
}

/// Follower graph weighted for one topic: every in-edge of `v` carries `v`'s
/// normalised topic mass.
#[derive(Clone, Debug)]
pub struct TopicWeightedGraph {
    pub topic_id: u32,
    pub graph: WeightedGraph,
    pub mass: Vec<f64>,
}

/// Scales values so the largest becomes 1 (all-zero input stays zero).
pub fn max_normalize(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for x in xs.iter_mut() {
            *x /= max;
        }
    }
}

/// `m_v = raw(v) · rtfav(v)`, max-normalised, attached to each edge `(u, v)`.
/// Missing entries count as zero.
pub fn build_topic_graph(
    g: &Graph,
    raw_scores: &[f64],
    rtfav_totals: &[u64],
    topic_id: u32,
) -> Result<TopicWeightedGraph> {
    let n = g.vertex_count();
    let mut mass: Vec<f64> = (0..n)
        .map(|v| {
            let raw = raw_scores.get(v).copied().unwrap_or(0.0);
            let rf = rtfav_totals.get(v).copied().unwrap_or(0) as f64;
            raw * rf
        })
        .collect();
    max_normalize(&mut mass);
    let graph = WeightedGraph::from_graph(g, |_, v| mass[v as usize])?;
    Ok(TopicWeightedGraph {
        topic_id,
        graph,
        mass,
    })
}

/// Per-user topic statistics of one tweet window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopicStats {
    pub raw: Vec<f64>,
    pub rtfav: Vec<u64>,
    pub related: Vec<u32>,
    pub total: Vec<u32>,
}

/// Computes [`TopicStats`] for every topic from per-user tweet windows.
pub fn window_stats(
    windows: &[Vec<&TweetRecord>],
    dicts: &[TopicDictionary],
    tokenizer: &Tokenizer,
) -> Vec<TopicStats> {
    let n = windows.len();
    let mut stats: Vec<TopicStats> = dicts
        .iter()
        .map(|_| TopicStats {
            raw: vec![0.0; n],
            rtfav: vec![0; n],
            related: vec![0; n],
            total: vec![0; n],
        })
        .collect();
    for (u, tweets) in windows.iter().enumerate() {
        let hists: Vec<KeywordHistogram> = tweets
            .iter()
            .map(|t| tokenizer.extract_keywords(&t.text))
            .collect();
        let mut merged = KeywordHistogram::new();
        for h in &hists {
            for (k, c) in h {
                *merged.entry(k.clone()).or_default() += c;
            }
        }
        let rf = rtfav_total(tweets.iter().copied());
        for (dict, s) in dicts.iter().zip(stats.iter_mut()) {
            s.raw[u] = raw_topic_score(&merged, dict);
            s.rtfav[u] = rf;
            s.related[u] = hists.iter().filter(|h| dict.mentions_any(h)).count() as u32;
            s.total[u] = tweets.len() as u32;
        }
    }
    stats
}

/// Which network drives relation probing while tweets are fetched per topic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopicMode {
    /// Global network for relations, topic-weighted networks for tweets.
    #[default]
    #[serde(rename = "g-wg")]
    GWg,
    /// A separately evolved topic network per topic drives both.
    #[serde(rename = "wg-wg")]
    WgWg,
}

impl fmt::Display for TopicMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopicMode::GWg => "g-wg",
            TopicMode::WgWg => "wg-wg",
        })
    }
}

/// How a strategy picks tweet probes for a topic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TweetSelector {
    None,
    Random,
    Scored { theta: f64, beta: f64 },
}

/// Per-topic tweet probe sets: topic score
/// `(1-θ)·WPR'(t-1) + θ·σ(TIP)` fed through round-robin & change selection,
/// each topic with its own round-robin record.
pub fn select_tweet_probe<R: Rng + ?Sized>(
    selector: TweetSelector,
    tips: &[InfluencePast],
    last_wpr: &[Vec<f64>],
    k: usize,
    rrs: &mut [RoundRobinRecord],
    rng: &mut R,
) -> Result<Vec<Vec<VertexId>>> {
    let mut out = Vec::with_capacity(tips.len());
    for (j, tip) in tips.iter().enumerate() {
        let n = tip.vertex_count();
        let set = match selector {
            TweetSelector::None => Vec::new(),
            TweetSelector::Random => select_random(n, k.min(n), rng)?,
            TweetSelector::Scored { theta, beta } => {
                let scores = change_scores(tip, &last_wpr[j], theta);
                let cfg = StrategyConfig {
                    theta,
                    beta,
                    k: k.min(n),
                    rng_seed: 0,
                };
                select_rrch(&scores, &mut rrs[j], &cfg, rng)?
            }
        };
        out.push(set);
    }
    Ok(out)
}

/// A strategy's stored tweet windows: for each user, the period whose window
/// was last fetched. Windows themselves live in the ground-truth history.
#[derive(Clone, Debug)]
pub struct TweetStore {
    pub fetched: Vec<usize>,
}

impl TweetStore {
    /// Full observation at period `t`.
    pub fn observe(n: usize, t: usize) -> Self {
        TweetStore {
            fetched: vec![t; n],
        }
    }

    pub fn probe(&mut self, users: &[VertexId], t: usize) {
        for &u in users {
            self.fetched[u as usize] = t;
        }
    }

    /// Assembles the local statistics for `topic` from per-period truth stats.
    pub fn local_stats(&self, truth: &[Vec<TopicStats>], topic: usize) -> TopicStats {
        let n = self.fetched.len();
        let mut s = TopicStats {
            raw: vec![0.0; n],
            rtfav: vec![0; n],
            related: vec![0; n],
            total: vec![0; n],
        };
        for (u, &p) in self.fetched.iter().enumerate() {
            let src = &truth[p][topic];
            s.raw[u] = src.raw[u];
            s.rtfav[u] = src.rtfav[u];
            s.related[u] = src.related[u];
            s.total[u] = src.total[u];
        }
        s
    }
}

pub fn tweets_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("tweets_{t}.tsv"))
}

const TWEET_HEADER: &str = "period\tauthor_id\trt_count\tfav_count\ttext";

/// Writes one record per line: `period, author_id, rt_count, fav_count, text`,
/// tab separated, text last with tabs and newlines folded to spaces.
pub fn write_tweets(path: &Path, tweets: &[TweetRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{TWEET_HEADER}").map_err(io)?;
    for t in tweets {
        let text: String = t
            .text
            .chars()
            .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            t.period, t.author, t.rt_count, t.fav_count, text
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_tweets(path: &Path) -> Result<Vec<TweetRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 && line.starts_with("period\t") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let mut fields = line.splitn(5, '\t');
        let mut next = |name: &str| {
            fields
                .next()
                .ok_or_else(|| err(format!("missing field {name}")))
        };
        let period = next("period")?;
        let author = next("author_id")?;
        let rt = next("rt_count")?;
        let fav = next("fav_count")?;
        let text = next("text").unwrap_or("");
        out.push(TweetRecord {
            period: period.parse().map_err(|e| err(format!("period: {e}")))?,
            author: author.parse().map_err(|e| err(format!("author_id: {e}")))?,
            rt_count: rt.parse().map_err(|e| err(format!("rt_count: {e}")))?,
            fav_count: fav.parse().map_err(|e| err(format!("fav_count: {e}")))?,
            text: text.to_string(),
        });
    }
    Ok(out)
}
