//! Experiment orchestration: configuration, ground-truth preparation, the
//! per-period probe loop for every (seed, strategy, capacity) cell, report
//! output, sweeps, and report aggregation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{capacity_to_k, check_relations, check_tweets, BudgetCheck, RateModel};
use crate::error::{Error, Result};
use crate::generator::{generate, load_dataset, mix_seed, Dataset, GenConfig};
use crate::graph::{Graph, LocalGraph, VertexId};
use crate::inference::{
    estimate_organic_delta, infer_edges, inferred_path, top_ra_candidates, update_growth,
    CandidateFilter, CandidatePair, GrowthState,
};
use crate::metrics::{evaluate, mean_std, Evaluation, PeriodReport, METRIC_COLUMNS};
use crate::probing::{
    change_scores, select_change, select_indegree, select_priority, select_random, select_rrch,
    InfluencePast, PriorityState, RoundRobinRecord, StrategyConfig, StrategyKind,
};
use crate::rank::{pagerank, weighted_pagerank, RankConfig, RankVector};
use crate::topics::{
    build_topic_graph, passes_relevance, select_tweet_probe, window_stats, Tokenizer, TopicMode,
    TopicStats, TweetRecord, TweetSelector, TweetStore,
};

/// Where ground truth comes from. Exactly one of the two keys is set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    /// Dataset directory (relative paths resolve against the config file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Synthesize per seed; the replicate seed replaces `rng_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenConfig>,
}

/// One `[[strategies]]` entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Extra salt for the strategy's random stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl StrategyEntry {
    pub fn from_kind(kind: StrategyKind) -> Self {
        let (theta, beta) = match kind {
            StrategyKind::Rrch { theta, beta } => (Some(theta), Some(beta)),
            StrategyKind::Change { theta } | StrategyKind::Indegree { theta } => (Some(theta), None),
            _ => (None, None),
        };
        StrategyEntry {
            name: kind.name().to_string(),
            theta,
            beta,
            seed: None,
        }
    }

    pub fn kind(&self) -> Result<StrategyKind> {
        let theta = self.theta.unwrap_or_else(crate::probing::default_theta);
        let beta = self.beta.unwrap_or_else(crate::probing::default_beta);
        let unused = |key: &str| {
            Error::Config(format!("strategy {:?} does not take {key}", self.name))
        };
        let kind = match self.name.as_str() {
            "noprobe" | "random" | "priority" => {
                if self.theta.is_some() {
                    return Err(unused("theta"));
                }
                if self.beta.is_some() {
                    return Err(unused("beta"));
                }
                match self.name.as_str() {
                    "noprobe" => StrategyKind::Noprobe,
                    "random" => StrategyKind::Random,
                    _ => StrategyKind::Priority,
                }
            }
            "indegree" | "change" => {
                if self.beta.is_some() {
                    return Err(unused("beta"));
                }
                if self.name == "change" {
                    StrategyKind::Change { theta }
                } else {
                    StrategyKind::Indegree { theta }
                }
            }
            "rrch" => StrategyKind::Rrch { theta, beta },
            other => {
                return Err(Error::Config(format!(
                    "unknown strategy {other:?} (expected noprobe, random, indegree, priority, change or rrch)"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn label(&self) -> Result<String> {
        let base = self.kind()?.label();
        Ok(match self.seed {
            Some(s) => format!("{base}#seed={s}"),
            None => base,
        })
    }
}

fn default_min_out() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Minimum observed out-degree of the prospective follower.
    #[serde(default = "default_min_out")]
    pub filter_min_out: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            enabled: false,
            filter_min_out: default_min_out(),
        }
    }
}

fn default_relevance() -> f64 {
    0.4
}

fn default_window() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicsConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub mode: TopicMode,
    #[serde(default = "default_relevance")]
    pub relevance: f64,
    /// Tweet window in periods: a window at `t` holds tweets from `t-w+1..=t`.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub stop_words: Vec<String>,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        TopicsConfig {
            enabled: false,
            mode: TopicMode::GWg,
            relevance: default_relevance(),
            window: default_window(),
            stop_words: Vec::new(),
        }
    }
}

/// Grid for `sweep`: strategies are the cross product of `thetas` × `betas`
/// (rrch), or `thetas` alone (change) when `betas` is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    /// Empty keeps the experiment's capacities.
    #[serde(default)]
    pub capacities: Vec<f64>,
}

fn default_thetas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_betas() -> Vec<f64> {
    vec![0.4, 0.6, 0.8]
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            thetas: default_thetas(),
            betas: default_betas(),
            capacities: Vec::new(),
        }
    }
}

impl SweepGrid {
    pub fn strategies(&self) -> Vec<StrategyEntry> {
        let mut out = Vec::new();
        for &theta in &self.thetas {
            if self.betas.is_empty() {
                out.push(StrategyEntry::from_kind(StrategyKind::Change { theta }));
            }
            for &beta in &self.betas {
                out.push(StrategyEntry::from_kind(StrategyKind::Rrch { theta, beta }));
            }
        }
        out
    }
}

fn default_capacities() -> Vec<f64> {
    vec![0.01]
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_period_days() -> f64 {
    1.0
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub data: DataSource,
    /// Periods to simulate; defaults to every period the data provides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(default = "default_capacities")]
    pub capacities: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Length of one period in days, for the budget check.
    #[serde(default = "default_period_days")]
    pub period_days: f64,
    pub strategies: Vec<StrategyEntry>,
    #[serde(default)]
    pub rank: RankConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub topics: TopicsConfig,
    #[serde(default)]
    pub rates: RateModel,
    /// Also write every estimated rank vector.
    #[serde(default)]
    pub write_ranks: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
}

impl ExperimentConfig {
    pub fn new(data: DataSource, strategies: Vec<StrategyEntry>) -> Self {
        ExperimentConfig {
            output_dir: default_output(),
            data,
            periods: None,
            capacities: default_capacities(),
            seeds: default_seeds(),
            period_days: default_period_days(),
            strategies,
            rank: RankConfig::default(),
            inference: InferenceConfig::default(),
            topics: TopicsConfig::default(),
            rates: RateModel::default(),
            write_ranks: false,
            sweep: None,
        }
    }

    /// Parses a TOML config; relative `data.path` and `output_dir` resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.data.path {
            if p.is_relative() {
                cfg.data.path = Some(base.join(p));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Structural checks that need no data.
    pub fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.generate) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("data: set either `path` or `generate`, not both".into()))
            }
            (None, None) => return Err(Error::Config("data: set `path` or `generate`".into())),
            (None, Some(g)) => g.validate()?,
            _ => {}
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies configured".into()));
        }
        let mut labels = Vec::new();
        for s in &self.strategies {
            let label = s.label()?;
            if labels.contains(&label) {
                return Err(Error::Config(format!("strategy {label} listed twice")));
            }
            labels.push(label);
        }
        if self.capacities.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("capacities and seeds must be non-empty".into()));
        }
        for &c in &self.capacities {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::Config(format!("capacity {c} not in (0,1]")));
            }
        }
        if !(self.period_days > 0.0 && self.period_days.is_finite()) {
            return Err(Error::Config(format!("period_days {} must be > 0", self.period_days)));
        }
        if self.periods == Some(0) {
            return Err(Error::Config("periods must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.topics.relevance) {
            return Err(Error::Config(format!(
                "topics.relevance {} not in [0,1]",
                self.topics.relevance
            )));
        }
        if self.topics.window == 0 {
            return Err(Error::Config("topics.window must be at least 1".into()));
        }
        self.rank.validate()?;
        self.rates.validate()
    }
}

/// Read-only ground truth for one replicate seed.
pub struct GroundTruth {
    pub seed: u64,
    pub data: Dataset,
    pub periods: usize,
    /// Exact PageRank per period.
    pub pr: Vec<Vec<f64>>,
    pub topics: Option<TopicTruth>,
}

/// Per-period, per-topic statistics and exact topic ranks.
pub struct TopicTruth {
    pub stats: Vec<Vec<TopicStats>>,
    pub wpr: Vec<Vec<Vec<f64>>>,
    pub relevant: Vec<Vec<Vec<bool>>>,
}

impl TopicTruth {
    pub fn topic_count(&self) -> usize {
        self.stats.first().map_or(0, Vec::len)
    }
}

fn tweet_windows(tweets: &[Vec<TweetRecord>], n: usize, t: usize, window: usize) -> Vec<Vec<&TweetRecord>> {
    let mut by_user: Vec<Vec<&TweetRecord>> = vec![Vec::new(); n];
    let first = (t + 1).saturating_sub(window);
    for period in &tweets[first..=t] {
        for tw in period {
            if let Some(slot) = by_user.get_mut(tw.author as usize) {
                slot.push(tw);
            }
        }
    }
    by_user
}

fn topic_rank(g: &Graph, s: &TopicStats, topic: u32, rank: &RankConfig) -> Result<RankVector> {
    let tg = build_topic_graph(g, &s.raw, &s.rtfav, topic)?;
    weighted_pagerank(&tg.graph, rank)
}

fn relevance_mask(s: &TopicStats, p: f64) -> Vec<bool> {
    s.related
        .iter()
        .zip(&s.total)
        .map(|(&r, &t)| passes_relevance(r, t, p))
        .collect()
}

/// Loads or generates the data for `seed` and computes exact ranks.
pub fn prepare_truth(cfg: &ExperimentConfig, seed: u64) -> Result<GroundTruth> {
    let data = match (&cfg.data.path, &cfg.data.generate) {
        (Some(dir), _) => load_dataset(dir, cfg.periods)?,
        (None, Some(g)) => {
            let mut g = g.clone();
            g.rng_seed = seed;
            if let Some(p) = cfg.periods {
                g.periods = p;
            }
            generate(&g)?
        }
        (None, None) => return Err(Error::Config("data: set `path` or `generate`".into())),
    };
    let periods = cfg.periods.unwrap_or(data.periods());
    if periods == 0 || periods > data.periods() {
        return Err(Error::Config(format!(
            "{periods} periods requested, data has {}",
            data.periods()
        )));
    }
    let pr = data.snapshots[..=periods]
        .par_iter()
        .map(|s| pagerank(&s.graph, &cfg.rank).map(|r| r.scores))
        .collect::<Result<Vec<_>>>()?;

    let topics = if cfg.topics.enabled {
        if !data.has_tweets() {
            return Err(Error::Config("topics enabled but the dataset has no tweets".into()));
        }
        let tokenizer = Tokenizer::new().with_stop_words(&cfg.topics.stop_words);
        let n = data.vertex_count();
        let per_period: Vec<(Vec<TopicStats>, Vec<Vec<f64>>, Vec<Vec<bool>>)> = (0..=periods)
            .into_par_iter()
            .map(|t| {
                let windows = tweet_windows(&data.tweets, n, t, cfg.topics.window);
                let stats = window_stats(&windows, &data.dictionaries, &tokenizer);
                let wpr = stats
                    .iter()
                    .zip(&data.dictionaries)
                    .map(|(s, d)| {
                        topic_rank(&data.snapshots[t].graph, s, d.topic_id, &cfg.rank).map(|r| r.scores)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let relevant = stats.iter().map(|s| relevance_mask(s, cfg.topics.relevance)).collect();
                Ok((stats, wpr, relevant))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut tt = TopicTruth {
            stats: Vec::new(),
            wpr: Vec::new(),
            relevant: Vec::new(),
        };
        for (s, w, r) in per_period {
            tt.stats.push(s);
            tt.wpr.push(w);
            tt.relevant.push(r);
        }
        Some(tt)
    } else {
        None
    };
    Ok(GroundTruth {
        seed,
        data,
        periods,
        pr,
        topics,
    })
}

/// Budget checks for every capacity against the period-0 data.
pub fn budget_checks(cfg: &ExperimentConfig, truth: &GroundTruth) -> Result<Vec<(f64, BudgetCheck)>> {
    let g = &truth.data.snapshots[0].graph;
    let n = g.vertex_count();
    let followers: Vec<u64> = g.vertices().map(|v| g.in_degree(v) as u64).collect();
    let friends: Vec<u64> = g.vertices().map(|v| g.out_degree(v) as u64).collect();
    let mut out = Vec::new();
    for &cap in &cfg.capacities {
        let k = capacity_to_k(n, cap)?;
        out.push((cap, check_relations(&cfg.rates, cfg.period_days, k, &followers, &friends)?));
        if let Some(tt) = &truth.topics {
            let mut counts = vec![0u64; n];
            for tw in &truth.data.tweets[0] {
                counts[tw.author as usize] += 1;
            }
            // a user may be fetched once per topic
            let per_topic: Vec<u64> = (0..tt.topic_count()).flat_map(|_| counts.iter().copied()).collect();
            let probes = k * tt.topic_count();
            out.push((cap, check_tweets(&cfg.rates, cfg.period_days, probes, &per_topic)?));
        }
    }
    Ok(out)
}

fn ensure_feasible(checks: &[(f64, BudgetCheck)], period_days: f64) -> Result<()> {
    for (cap, c) in checks {
        if !c.feasible() {
            return Err(Error::Infeasible(format!(
                "capacity {cap}: {:?} probing needs {} calls per {period_days}-day period, {} available (short by {})",
                c.kind,
                c.required_calls,
                c.available_calls,
                c.shortfall()
            )));
        }
    }
    Ok(())
}

/// One (seed, strategy, capacity) combination.
#[derive(Clone, Debug)]
pub struct Cell {
    pub strategy: StrategyEntry,
    pub kind: StrategyKind,
    pub label: String,
    pub capacity: f64,
    pub capacity_index: usize,
}

/// Called after each period with the updated local graph and the edges
/// inferred in that period.
pub type Observer<'a> = dyn FnMut(usize, &LocalGraph, &[CandidatePair]) + 'a;

pub struct CellOutput {
    pub reports: Vec<PeriodReport>,
    pub inferred: Vec<Vec<CandidatePair>>,
    pub ranks: Vec<Vec<f64>>,
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a: stable across platforms and releases
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn tweet_selector(kind: StrategyKind) -> TweetSelector {
    match kind {
        StrategyKind::Noprobe => TweetSelector::None,
        StrategyKind::Random => TweetSelector::Random,
        StrategyKind::Rrch { theta, beta } => TweetSelector::Scored { theta, beta },
        StrategyKind::Change { theta } => TweetSelector::Scored { theta, beta: 1.0 },
        StrategyKind::Indegree { theta } => TweetSelector::Scored {
            theta,
            beta: crate::probing::default_beta(),
        },
        StrategyKind::Priority => TweetSelector::Scored {
            theta: crate::probing::default_theta(),
            beta: crate::probing::default_beta(),
        },
    }
}

/// Per-topic estimation state of one cell.
struct TopicTrack {
    topic: usize,
    topic_id: u32,
    store: TweetStore,
    tip: InfluencePast,
    wpr: Vec<f64>,
    rr: RoundRobinRecord,
    /// Own relation view in WG-WG mode.
    local: Option<LocalGraph>,
}

fn masked(scores: &[f64], keep: &[bool]) -> Vec<f64> {
    scores
        .iter()
        .zip(keep)
        .map(|(&s, &k)| if k { s } else { -1.0 })
        .collect()
}

fn report_row(
    scope: String,
    cell: &Cell,
    seed: u64,
    alpha: f64,
    t: usize,
    m: [f64; 7],
    probed: usize,
    inferred: usize,
) -> PeriodReport {
    PeriodReport {
        scope,
        strategy: cell.label.clone(),
        capacity: cell.capacity,
        seed,
        alpha,
        period: t,
        mse: m[0],
        jaccard_10: m[1],
        jaccard_100: m[2],
        jaccard_1000: m[3],
        kendall_tau_b: m[4],
        edge_fp_rate: m[5],
        edge_fn_rate: m[6],
        probed,
        inferred,
    }
}

/// Runs the period loop for one cell: select, probe, infer, rank, evaluate.
pub fn run_cell(
    cfg: &ExperimentConfig,
    truth: &GroundTruth,
    cell: &Cell,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<CellOutput> {
    let snaps = &truth.data.snapshots;
    let n = snaps[0].graph.vertex_count();
    let k = capacity_to_k(n, cell.capacity)?;
    let stream = mix_seed(
        truth.seed,
        &[
            label_hash(&cell.label),
            cell.capacity_index as u64,
            cell.strategy.seed.unwrap_or(0),
        ],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(stream);

    let mut local = LocalGraph::observe(&snaps[0]);
    let mut pr_local = truth.pr[0].clone();
    let mut ip = InfluencePast::new(n);
    ip.push(0, &pr_local)?;
    let in_degrees = |g: &Graph| -> Vec<f64> { g.vertices().map(|v| g.in_degree(v) as f64).collect() };
    let mut ip_deg = InfluencePast::new(n);
    ip_deg.push(0, &in_degrees(&local.graph))?;
    let mut priority = PriorityState::new(n);
    let mut rr = RoundRobinRecord::new(n);
    let mut growth = GrowthState::default();

    let topic_truth = truth.topics.as_ref();
    let topic_count = topic_truth.map_or(0, TopicTruth::topic_count);
    let wg_wg = cfg.topics.mode == TopicMode::WgWg;
    let topic_k = if wg_wg {
        (k / topic_count.max(1)).max(1)
    } else {
        k
    };
    let mut tracks: Vec<TopicTrack> = (0..topic_count)
        .map(|j| {
            let tt = topic_truth.expect("topic truth present");
            let mut tip = InfluencePast::new(n);
            tip.push(0, &tt.wpr[0][j])?;
            Ok(TopicTrack {
                topic: j,
                topic_id: truth.data.dictionaries[j].topic_id,
                store: TweetStore::observe(n, 0),
                tip,
                wpr: tt.wpr[0][j].clone(),
                rr: RoundRobinRecord::new(n),
                local: wg_wg.then(|| LocalGraph::observe(&snaps[0])),
            })
        })
        .collect::<Result<_>>()?;
    let selector = tweet_selector(cell.kind);

    let mut out = CellOutput {
        reports: Vec::new(),
        inferred: Vec::new(),
        ranks: Vec::new(),
    };
    for t in 1..=truth.periods {
        let truth_t = &snaps[t];
        ip.assert_before(t);
        let probe = match cell.kind {
            StrategyKind::Noprobe => Vec::new(),
            StrategyKind::Random => select_random(n, k, &mut rng)?,
            StrategyKind::Priority => select_priority(&mut priority, &pr_local, k)?,
            StrategyKind::Indegree { theta } => {
                ip_deg.assert_before(t);
                select_indegree(&ip_deg, &in_degrees(&local.graph), theta, k)
            }
            StrategyKind::Change { theta } => select_change(&change_scores(&ip, &pr_local, theta), k),
            StrategyKind::Rrch { theta, beta } => {
                let sc = StrategyConfig {
                    theta,
                    beta,
                    k,
                    rng_seed: stream,
                };
                select_rrch(&change_scores(&ip, &pr_local, theta), &mut rr, &sc, &mut rng)?
            }
        };

        if cfg.inference.enabled {
            let organic = estimate_organic_delta(&local, truth_t, &probe, t);
            growth = update_growth(growth, organic);
        }
        local.probe_update(truth_t, &probe, t)?;
        let mut inferred = Vec::new();
        if cfg.inference.enabled && growth.e_g > 0 {
            let mut excluded = vec![false; n];
            for &u in &probe {
                excluded[u as usize] = true;
            }
            let observed: Vec<usize> = (0..n as VertexId)
                .map(|v| local.observed_out_degree(v))
                .collect();
            let filter = CandidateFilter {
                min_out: cfg.inference.filter_min_out,
                excluded: Some(&excluded),
                out_degree: Some(&observed),
            };
            let candidates = top_ra_candidates(&local.graph, &filter, growth.e_g);
            inferred = infer_edges(&mut local, &candidates, growth.e_g)?;
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(t, &local, &inferred);
        }

        let rank = pagerank(&local.graph, &cfg.rank)?;
        pr_local = rank.scores;
        ip.push(t, &pr_local)?;
        ip_deg.push(t, &in_degrees(&local.graph))?;
        let m = evaluate(&Evaluation {
            est: &pr_local,
            truth: &truth.pr[t],
            est_lists: None,
            truth_lists: None,
            est_graph: &local.graph,
            truth_graph: &truth_t.graph,
        })?;
        out.reports
            .push(report_row("global".into(), cell, truth.seed, cfg.rank.alpha, t, m, probe.len(), inferred.len()));

        if let Some(tt) = topic_truth {
            let tips: Vec<InfluencePast> = tracks.iter().map(|tr| tr.tip.clone()).collect();
            let last: Vec<Vec<f64>> = tracks.iter().map(|tr| tr.wpr.clone()).collect();
            let mut rrs: Vec<RoundRobinRecord> = tracks.iter().map(|tr| tr.rr.clone()).collect();
            for tr in &tracks {
                tr.tip.assert_before(t);
            }
            let sets = select_tweet_probe(selector, &tips, &last, topic_k, &mut rrs, &mut rng)?;
            for ((tr, set), rr_j) in tracks.iter_mut().zip(&sets).zip(rrs) {
                tr.rr = rr_j;
                tr.store.probe(set, t);
                if let Some(lg) = tr.local.as_mut() {
                    lg.probe_update(truth_t, set, t)?;
                }
                let stats = tr.store.local_stats(&tt.stats, tr.topic);
                let g = tr.local.as_ref().map_or(&local.graph, |lg| &lg.graph);
                tr.wpr = topic_rank(g, &stats, tr.topic_id, &cfg.rank)?.scores;
                tr.tip.push(t, &tr.wpr)?;
                let est_keep = relevance_mask(&stats, cfg.topics.relevance);
                let truth_keep = &tt.relevant[t][tr.topic];
                let est_lists = masked(&tr.wpr, &est_keep);
                let truth_lists = masked(&tt.wpr[t][tr.topic], truth_keep);
                let m = evaluate(&Evaluation {
                    est: &tr.wpr,
                    truth: &tt.wpr[t][tr.topic],
                    est_lists: Some(&est_lists),
                    truth_lists: Some(&truth_lists),
                    est_graph: g,
                    truth_graph: &truth_t.graph,
                })?;
                out.reports.push(report_row(
                    format!("topic:{}", tr.topic_id),
                    cell,
                    truth.seed,
                    cfg.rank.alpha,
                    t,
                    m,
                    set.len(),
                    0,
                ));
            }
        }
        if cfg.write_ranks {
            out.ranks.push(pr_local.clone());
        }
        out.inferred.push(inferred);
    }
    Ok(out)
}

/// Expands strategies × capacities into cells.
pub fn cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for s in &cfg.strategies {
        for (ci, &capacity) in cfg.capacities.iter().enumerate() {
            out.push(Cell {
                strategy: s.clone(),
                kind: s.kind()?,
                label: s.label()?,
                capacity,
                capacity_index: ci,
            });
        }
    }
    Ok(out)
}

pub fn cell_dir(output_dir: &Path, seed: u64, cell: &Cell) -> PathBuf {
    let label: String = cell
        .label
        .chars()
        .filter_map(|c| match c {
            '(' | ',' | '#' => Some('_'),
            ')' | '=' => None,
            c => Some(c),
        })
        .collect();
    output_dir
        .join("cells")
        .join(format!("seed{seed}_cap{}_{label}", cell.capacity))
}

/// Everything an experiment produced.
pub struct ExperimentOutcome {
    pub reports: Vec<PeriodReport>,
    pub summary: Vec<SummaryRow>,
    pub budget: Vec<(f64, BudgetCheck)>,
}

/// Runs every cell and returns the rows in a fixed order
/// (seed, strategy, capacity, period, scope), without touching the disk.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(Vec<PeriodReport>, Vec<(f64, BudgetCheck)>)> {
    let (reports, budget, _) = simulate_with_outputs(cfg)?;
    Ok((reports, budget))
}

type CellResult = (u64, Cell, CellOutput);

fn simulate_with_outputs(
    cfg: &ExperimentConfig,
) -> Result<(Vec<PeriodReport>, Vec<(f64, BudgetCheck)>, Vec<CellResult>)> {
    cfg.validate()?;
    let cells = cells(cfg)?;
    let truths = cfg
        .seeds
        .par_iter()
        .map(|&s| prepare_truth(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let budget = budget_checks(cfg, &truths[0])?;
    ensure_feasible(&budget, cfg.period_days)?;

    let jobs: Vec<(usize, usize)> = (0..truths.len())
        .flat_map(|s| (0..cells.len()).map(move |c| (s, c)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(s, c)| {
            run_cell(cfg, &truths[s], &cells[c], None).map(|o| (truths[s].seed, cells[c].clone(), o))
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = results.iter().flat_map(|(_, _, o)| o.reports.iter().cloned()).collect();
    Ok((reports, budget, results))
}

/// Runs the experiment and writes `report.csv`, `summary.csv`, per-cell
/// `inferred_<t>.tsv` and (optionally) `ranks_<strategy>_<t>.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let (reports, budget, results) = simulate_with_outputs(cfg)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (seed, cell, o) in &results {
        if !cfg.inference.enabled && !cfg.write_ranks {
            continue;
        }
        let dir = cell_dir(out, *seed, cell);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        if cfg.inference.enabled {
            for (i, inferred) in o.inferred.iter().enumerate() {
                crate::inference::write_inferred(&inferred_path(&dir, i + 1), inferred)?;
            }
        }
        for (i, scores) in o.ranks.iter().enumerate() {
            let rv = RankVector {
                scores: scores.clone(),
                alpha: cfg.rank.alpha,
                iterations_used: 0,
                converged: true,
            };
            rv.write_csv(&dir.join(format!("ranks_{}_{}.csv", cell.kind.name(), i + 1)))?;
        }
    }
    write_report(&out.join("report.csv"), &reports)?;
    let summary = summarize(&reports, &[GroupKey::Scope, GroupKey::Strategy, GroupKey::Capacity]);
    write_summary(&out.join("summary.csv"), &summary)?;
    Ok(ExperimentOutcome {
        reports,
        summary,
        budget,
    })
}

/// Runs the grid as one experiment: the grid's strategies replace the
/// configured ones, its capacities (if any) replace the configured ones.
pub fn sweep(cfg: &ExperimentConfig, grid: &SweepGrid) -> Result<ExperimentOutcome> {
    let mut c = cfg.clone();
    c.strategies = grid.strategies();
    if !grid.capacities.is_empty() {
        c.capacities = grid.capacities.clone();
    }
    run_experiment(&c)
}

pub fn write_report(path: &Path, rows: &[PeriodReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_path_error(path, e))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Vec<PeriodReport>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_path_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        }))
        .collect()
}

fn csv_path_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKey {
    Scope,
    Strategy,
    Capacity,
    Seed,
    Period,
}

impl GroupKey {
    pub fn column(self) -> &'static str {
        match self {
            GroupKey::Scope => "scope",
            GroupKey::Strategy => "strategy",
            GroupKey::Capacity => "capacity",
            GroupKey::Seed => "seed",
            GroupKey::Period => "period",
        }
    }

    fn value(self, r: &PeriodReport) -> String {
        match self {
            GroupKey::Scope => r.scope.clone(),
            GroupKey::Strategy => r.strategy.clone(),
            GroupKey::Capacity => r.capacity.to_string(),
            GroupKey::Seed => r.seed.to_string(),
            GroupKey::Period => r.period.to_string(),
        }
    }
}

impl std::str::FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scope" => GroupKey::Scope,
            "strategy" => GroupKey::Strategy,
            "capacity" => GroupKey::Capacity,
            "seed" => GroupKey::Seed,
            "period" => GroupKey::Period,
            other => return Err(Error::invalid(format!("unknown grouping column {other:?}"))),
        })
    }
}

/// Mean and population standard deviation of every metric for one group.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub keys: Vec<(GroupKey, String)>,
    pub rows: usize,
    pub mean: [f64; 7],
    pub std: [f64; 7],
}

impl SummaryRow {
    pub fn key(&self, k: GroupKey) -> Option<&str> {
        self.keys.iter().find(|(g, _)| *g == k).map(|(_, v)| v.as_str())
    }

    pub fn mean_of(&self, column: &str) -> Option<f64> {
        METRIC_COLUMNS.iter().position(|c| *c == column).map(|i| self.mean[i])
    }
}

/// Groups rows by `keys`, keeping groups in order of first appearance.
pub fn summarize(rows: &[PeriodReport], keys: &[GroupKey]) -> Vec<SummaryRow> {
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: BTreeMap<Vec<String>, Vec<&PeriodReport>> = BTreeMap::new();
    for r in rows {
        let key: Vec<String> = keys.iter().map(|k| k.value(r)).collect();
        let entry = groups.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let mut mean = [0.0; 7];
            let mut std = [0.0; 7];
            for i in 0..7 {
                let xs: Vec<f64> = members.iter().map(|r| r.metric_values()[i]).collect();
                (mean[i], std[i]) = mean_std(&xs);
            }
            SummaryRow {
                keys: keys.iter().copied().zip(key).collect(),
                rows: members.len(),
                mean,
                std,
            }
        })
        .collect()
}

pub fn summary_header(keys: &[GroupKey]) -> Vec<String> {
    let mut h: Vec<String> = keys.iter().map(|k| k.column().to_string()).collect();
    h.push("rows".into());
    for c in METRIC_COLUMNS {
        h.push(format!("{c}_mean"));
        h.push(format!("{c}_std"));
    }
    h
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let keys: Vec<GroupKey> = rows
        .first()
        .map(|r| r.keys.iter().map(|(k, _)| *k).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_path_error(path, e))?;
    write_summary_to(&mut w, &keys, rows)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_to<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    keys: &[GroupKey],
    rows: &[SummaryRow],
) -> Result<()> {
    w.write_record(summary_header(keys))?;
    for r in rows {
        let mut rec: Vec<String> = r.keys.iter().map(|(_, v)| v.clone()).collect();
        rec.push(r.rows.to_string());
        for i in 0..7 {
            rec.push(r.mean[i].to_string());
            rec.push(r.std[i].to_string());
        }
        w.write_record(rec)?;
    }
    Ok(())
}
