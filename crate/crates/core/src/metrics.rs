//! Evaluation measures comparing estimated ranks and graphs to ground truth.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::rank::top_k;

/// Root-mean-square difference of scores over the shared vertex set.
///
/// Named after the error measure it reports in the literature; the value is a
/// square root of the mean squared difference.
pub fn mse(est: &[f64], truth: &[f64]) -> Result<f64> {
    let n = est.len().min(truth.len());
    if n == 0 {
        return Err(Error::invalid("mse over an empty vertex intersection"));
    }
    let sum: f64 = est[..n]
        .iter()
        .zip(&truth[..n])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / n as f64).sqrt())
}

/// Jaccard similarity of the two top-`k` sets (ties broken by id).
pub fn jaccard_topk(est: &[f64], truth: &[f64], k: usize) -> f64 {
    let a: HashSet<VertexId> = top_k(est, k).into_iter().collect();
    let b: HashSet<VertexId> = top_k(truth, k).into_iter().collect();
    jaccard(&a, &b)
}

pub fn jaccard(a: &HashSet<VertexId>, b: &HashSet<VertexId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Kendall tau-b between the score-induced rankings of `est` and `truth`
/// restricted to `over`. O(n log n) (Knight's merge-sort counting).
///
/// Returns 0 when either side is entirely tied.
pub fn kendall_tau_b(est: &[f64], truth: &[f64], over: &[VertexId]) -> Result<f64> {
    if over.len() < 2 {
        return Err(Error::invalid("kendall tau-b needs at least two items"));
    }
    let mut pairs: Vec<(f64, f64)> = over
        .iter()
        .map(|&v| (est[v as usize], truth[v as usize]))
        .collect();
    Ok(tau_b_pairs(&mut pairs))
}

fn tau_b_pairs(pairs: &mut [(f64, f64)]) -> f64 {
    let n = pairs.len() as u64;
    let n0 = n * (n - 1) / 2;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // ties in x, and joint ties in (x, y)
    let mut n1 = 0u64;
    let mut n3 = 0u64;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let run = (j - i) as u64;
        n1 += run * (run - 1) / 2;
        let mut a = i;
        while a < j {
            let mut b = a + 1;
            while b < j && pairs[b].1 == pairs[a].1 {
                b += 1;
            }
            let r = (b - a) as u64;
            n3 += r * (r - 1) / 2;
            a = b;
        }
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut n2 = 0u64;
    let mut i = 0;
    while i < ys.len() {
        let mut j = i + 1;
        while j < ys.len() && ys[j] == ys[i] {
            j += 1;
        }
        let run = (j - i) as u64;
        n2 += run * (run - 1) / 2;
        i = j;
    }

    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return 0.0;
    }
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    (numer / denom.sqrt()).clamp(-1.0, 1.0)
}

/// Sorts `xs` ascending and returns the number of strict inversions.
fn merge_count(xs: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = xs.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = xs.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if xs[j] < xs[i] {
            buf[k] = xs[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = xs[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&xs[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&xs[j..n]);
    xs.copy_from_slice(&buf[..n]);
    swaps
}

/// False-positive and false-negative edge rates, both normalised by the
/// number of true edges.
pub fn edge_rates(est: &Graph, truth: &Graph) -> Result<(f64, f64)> {
    if truth.edge_count() == 0 {
        return Err(Error::invalid("edge rates against an empty truth graph"));
    }
    let delta = truth.diff(est)?;
    let m = truth.edge_count() as f64;
    Ok((delta.added.len() as f64 / m, delta.removed.len() as f64 / m))
}

/// One row of `report.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodReport {
    /// `global`, or `topic:<id>` for topic-weighted influence.
    pub scope: String,
    pub strategy: String,
    pub capacity: f64,
    pub seed: u64,
    /// PageRank damping factor used for both estimate and truth.
    pub alpha: f64,
    pub period: usize,
    pub mse: f64,
    pub jaccard_10: f64,
    pub jaccard_100: f64,
    pub jaccard_1000: f64,
    pub kendall_tau_b: f64,
    pub edge_fp_rate: f64,
    pub edge_fn_rate: f64,
    pub probed: usize,
    pub inferred: usize,
}

pub const JACCARD_KS: [usize; 3] = [10, 100, 1000];

pub const METRIC_COLUMNS: [&str; 7] = [
    "mse",
    "jaccard_10",
    "jaccard_100",
    "jaccard_1000",
    "kendall_tau_b",
    "edge_fp_rate",
    "edge_fn_rate",
];

impl PeriodReport {
    pub fn metric_values(&self) -> [f64; 7] {
        [
            self.mse,
            self.jaccard_10,
            self.jaccard_100,
            self.jaccard_1000,
            self.kendall_tau_b,
            self.edge_fp_rate,
            self.edge_fn_rate,
        ]
    }
}

/// Scores and graphs needed to evaluate one period.
pub struct Evaluation<'a> {
    pub est: &'a [f64],
    pub truth: &'a [f64],
    /// Scores used for the top-k lists, when they differ from `est`/`truth`
    /// (the topic relevance filter removes users from the lists only).
    pub est_lists: Option<&'a [f64]>,
    pub truth_lists: Option<&'a [f64]>,
    pub est_graph: &'a Graph,
    pub truth_graph: &'a Graph,
}

/// Computes every measure for one period; `k` values larger than the vertex
/// count are clamped.
pub fn evaluate(e: &Evaluation) -> Result<[f64; 7]> {
    let n = e.truth.len();
    let est_l = e.est_lists.unwrap_or(e.est);
    let truth_l = e.truth_lists.unwrap_or(e.truth);
    let all: Vec<VertexId> = (0..n as VertexId).collect();
    let tau = if n >= 2 {
        kendall_tau_b(e.est, e.truth, &all)?
    } else {
        0.0
    };
    let (fp, fn_) = if e.truth_graph.edge_count() > 0 {
        edge_rates(e.est_graph, e.truth_graph)?
    } else {
        (0.0, 0.0)
    };
    Ok([
        mse(e.est, e.truth)?,
        jaccard_topk(est_l, truth_l, JACCARD_KS[0].min(n)),
        jaccard_topk(est_l, truth_l, JACCARD_KS[1].min(n)),
        jaccard_topk(est_l, truth_l, JACCARD_KS[2].min(n)),
        tau,
        fp,
        fn_,
    ])
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
