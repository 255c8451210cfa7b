//! PageRank and weighted PageRank by power iteration.
//!
//! Dangling vertices (no out-edges, or only zero-weight out-edges) spread
//! their mass uniformly over all vertices, so the uniform vector is a fixed
//! point of an edgeless graph and scores always sum to one.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            alpha: 0.85,
            epsilon: 1e-9,
            max_iter: 200,
        }
    }
}

impl RankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} not in (0,1)", self.alpha)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon {} must be > 0", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankVector {
    pub scores: Vec<f64>,
    pub alpha: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

impl RankVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, v: VertexId) -> f64 {
        self.scores[v as usize]
    }

    /// Writes `vertex_id,score` rows sorted by id, scores with 17 significant
    /// digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "vertex_id,score").map_err(io)?;
        for (v, s) in self.scores.iter().enumerate() {
            writeln!(w, "{v},{s:.16e}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads the `vertex_id,score` format back into a score vector.
    pub fn read_csv_scores(path: &Path) -> Result<Vec<f64>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (id, score) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected `vertex_id,score`".into()))?;
            let id: usize = id.parse().map_err(|e| parse_err(format!("{e}")))?;
            if id != out.len() {
                return Err(parse_err(format!("ids not dense/sorted at {id}")));
            }
            out.push(score.parse().map_err(|e| parse_err(format!("{e}")))?);
        }
        Ok(out)
    }
}

/// Non-negative per-edge weights over a directed graph.
#[derive(Clone, Debug, Default)]
pub struct WeightedGraph {
    out: Vec<Vec<(VertexId, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph {
            out: vec![Vec::new(); n],
        }
    }

    /// Weights every edge of `g` with `weight(u, v)`.
    pub fn from_graph(g: &Graph, mut weight: impl FnMut(VertexId, VertexId) -> f64) -> Result<Self> {
        let mut wg = WeightedGraph::new(g.vertex_count());
        for (u, v) in g.edges() {
            wg.push(u, v, weight(u, v))?;
        }
        Ok(wg)
    }

    pub fn push(&mut self, u: VertexId, v: VertexId, w: f64) -> Result<()> {
        let n = self.out.len();
        for x in [u, v] {
            if x as usize >= n {
                return Err(Error::UnknownVertex { id: x, universe: n });
            }
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::invalid(format!("edge ({u}, {v}) has weight {w}")));
        }
        self.out[u as usize].push((v, w));
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.out.len()
    }

    pub fn out_edges(&self, u: VertexId) -> &[(VertexId, f64)] {
        &self.out[u as usize]
    }

    pub fn weight(&self, u: VertexId, v: VertexId) -> Option<f64> {
        self.out[u as usize]
            .iter()
            .find(|(x, _)| *x == v)
            .map(|&(_, w)| w)
    }
}

fn power_iterate(
    n: usize,
    cfg: &RankConfig,
    dangling: &[bool],
    spread: impl Fn(&[f64], &mut [f64]),
) -> RankVector {
    let nf = n as f64;
    let mut scores = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut iterations_used = 0;
    let mut converged = false;

    while iterations_used < cfg.max_iter {
        iterations_used += 1;
        let dangling_mass: f64 = scores
            .iter()
            .zip(dangling)
            .filter(|(_, &d)| d)
            .map(|(s, _)| s)
            .sum();
        let base = (1.0 - cfg.alpha) / nf + cfg.alpha * dangling_mass / nf;
        next.fill(base);
        spread(&scores, &mut next);

        let total: f64 = next.iter().sum();
        for x in next.iter_mut() {
            *x /= total;
        }
        let change: f64 = scores.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut scores, &mut next);
        if change < cfg.epsilon {
            converged = true;
            break;
        }
    }

    RankVector {
        scores,
        alpha: cfg.alpha,
        iterations_used,
        converged,
    }
}

/// `PR(v) = α Σ_{(u,v)} PR(u)/|out(u)| + (1-α)/n`, dangling mass spread
/// uniformly.
pub fn pagerank(g: &Graph, cfg: &RankConfig) -> Result<RankVector> {
    cfg.validate()?;
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::invalid("pagerank on an empty vertex set"));
    }
    let dangling: Vec<bool> = g.vertices().map(|u| g.out_degree(u) == 0).collect();
    let alpha = cfg.alpha;
    Ok(power_iterate(n, cfg, &dangling, |scores, next| {
        for u in g.vertices() {
            let targets = g.out_neighbors(u);
            if targets.is_empty() {
                continue;
            }
            let share = alpha * scores[u as usize] / targets.len() as f64;
            for &v in targets {
                next[v as usize] += share;
            }
        }
    }))
}

/// Weighted PageRank with out-weight normalised transitions:
/// `WPR(v) = α Σ_{(u,v)} WPR(u) w(u,v)/W_out(u) + (1-α)/n`.
pub fn weighted_pagerank(g: &WeightedGraph, cfg: &RankConfig) -> Result<RankVector> {
    cfg.validate()?;
    let n = g.vertex_count();
    if n == 0 {
        return Err(Error::invalid("weighted pagerank on an empty vertex set"));
    }
    let out_weight: Vec<f64> = g
        .out
        .iter()
        .map(|edges| edges.iter().map(|&(_, w)| w).sum())
        .collect();
    let dangling: Vec<bool> = out_weight.iter().map(|&w| w <= 0.0).collect();
    let alpha = cfg.alpha;
    Ok(power_iterate(n, cfg, &dangling, |scores, next| {
        for (u, edges) in g.out.iter().enumerate() {
            let total = out_weight[u];
            if total <= 0.0 {
                continue;
            }
            let mass = alpha * scores[u] / total;
            for &(v, w) in edges {
                next[v as usize] += mass * w;
            }
        }
    }))
}

/// First-iteration PageRank response to inserting `(u, v)`: `v` gains
/// `α PR(u)/(d+1)` and every other out-neighbour `w` of `u` loses
/// `α PR(u)/(d(d+1))`, where `d` is `u`'s current out-degree.
pub fn differential_one_step(
    g: &Graph,
    pr_old: &RankVector,
    new_edge: (VertexId, VertexId),
) -> Result<BTreeMap<VertexId, f64>> {
    let (u, v) = new_edge;
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    if u == v {
        return Err(Error::invalid(format!("self-loop ({u}, {v})")));
    }
    if g.contains_edge(u, v) {
        return Err(Error::invalid(format!("edge ({u}, {v}) already present")));
    }
    let d = g.out_degree(u);
    if d == 0 {
        return Err(Error::invalid(format!("vertex {u} is dangling")));
    }
    if pr_old.len() != g.vertex_count() {
        return Err(Error::invalid("rank vector does not match graph size"));
    }
    let df = d as f64;
    let pu = pr_old.score(u);
    let mut out = BTreeMap::new();
    out.insert(v, pr_old.alpha * pu / (df + 1.0));
    for &w in g.out_neighbors(u) {
        out.insert(w, -pr_old.alpha * pu / (df * (df + 1.0)));
    }
    Ok(out)
}

/// The `k` highest-scored ids, ties broken by ascending id. `k` is clamped to
/// the number of scores.
pub fn top_k(scores: &[f64], k: usize) -> Vec<VertexId> {
    let k = k.min(scores.len());
    let mut ids: Vec<VertexId> = (0..scores.len() as VertexId).collect();
    let cmp = |a: &VertexId, b: &VertexId| {
        scores[*b as usize]
            .total_cmp(&scores[*a as usize])
            .then(a.cmp(b))
    };
    if k < ids.len() && k > 0 {
        ids.select_nth_unstable_by(k - 1, cmp);
    }
    ids.truncate(k);
    ids.sort_unstable_by(cmp);
    ids
}
