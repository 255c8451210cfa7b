//! Resource-allocation link prediction and growth-budgeted edge inference.
//!
//! Neighbourhoods are taken in the undirected view of the follower graph:
//! `Γ(x)` is every account `x` follows or is followed by, and `degree(w)` is
//! `in(w) + out(w)`. A candidate is a directed edge `u → v`; `u` must follow
//! at least `min_out` accounts to be considered willing to follow anyone new.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, LocalGraph, Snapshot, VertexId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidatePair {
    pub u: VertexId,
    pub v: VertexId,
    pub ra: f64,
}

/// Ordering used for ranking candidates: higher RA first, then lower `(u, v)`.
fn rank_order(a: &CandidatePair, b: &CandidatePair) -> Ordering {
    b.ra.total_cmp(&a.ra).then(a.u.cmp(&b.u)).then(a.v.cmp(&b.v))
}

#[derive(Clone, Copy, Debug)]
struct Ranked(CandidatePair);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // greater = better
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&other.0, &self.0)
    }
}

/// Undirected neighbourhoods and total degrees of a directed graph.
pub struct UndirectedView {
    neighbors: Vec<Vec<VertexId>>,
    inv_degree: Vec<f64>,
}

impl UndirectedView {
    pub fn new(g: &Graph) -> Self {
        let neighbors = g
            .vertices()
            .map(|x| {
                let mut l: Vec<VertexId> = g
                    .out_neighbors(x)
                    .iter()
                    .chain(g.in_neighbors(x))
                    .copied()
                    .collect();
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        let inv_degree = g
            .vertices()
            .map(|w| {
                let d = g.in_degree(w) + g.out_degree(w);
                if d == 0 {
                    0.0
                } else {
                    1.0 / d as f64
                }
            })
            .collect();
        UndirectedView {
            neighbors,
            inv_degree,
        }
    }

    pub fn neighbors(&self, x: VertexId) -> &[VertexId] {
        &self.neighbors[x as usize]
    }

    /// `RA(u, v) = Σ_{w ∈ Γu ∩ Γv} 1/degree(w)`, summed in ascending `w`.
    pub fn ra(&self, u: VertexId, v: VertexId) -> f64 {
        let (a, b) = (self.neighbors(u), self.neighbors(v));
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    sum += self.inv_degree[a[i] as usize];
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Which vertices may appear in a candidate.
#[derive(Clone, Copy, Debug)]
pub struct CandidateFilter<'a> {
    /// Minimum out-degree of the prospective follower `u`.
    pub min_out: usize,
    /// Vertices excluded as either endpoint (e.g. users whose incident edges
    /// were just observed exactly).
    pub excluded: Option<&'a [bool]>,
    /// Out-degrees checked against `min_out` in place of the graph's own,
    /// e.g. counting only observed follows so inferred edges cannot qualify a
    /// source by themselves.
    pub out_degree: Option<&'a [usize]>,
}

impl CandidateFilter<'_> {
    fn allows(&self, x: VertexId) -> bool {
        self.excluded.is_none_or(|e| !e[x as usize])
    }

    fn out_degree(&self, g: &Graph, u: VertexId) -> usize {
        self.out_degree.map_or_else(|| g.out_degree(u), |d| d[u as usize])
    }
}

/// Visits every admissible candidate with source `u` in ascending `v`,
/// accumulating RA through common neighbours. `acc`/`touched` are scratch.
fn for_each_from(
    g: &Graph,
    view: &UndirectedView,
    filter: &CandidateFilter,
    u: VertexId,
    acc: &mut [f64],
    touched: &mut Vec<VertexId>,
    mut visit: impl FnMut(CandidatePair),
) {
    if filter.out_degree(g, u) < filter.min_out || !filter.allows(u) {
        return;
    }
    for &w in view.neighbors(u) {
        let share = view.inv_degree[w as usize];
        for &v in view.neighbors(w) {
            if acc[v as usize] == 0.0 {
                touched.push(v);
            }
            acc[v as usize] += share;
        }
    }
    touched.sort_unstable();
    for &v in touched.iter() {
        let ra = std::mem::take(&mut acc[v as usize]);
        if v != u && filter.allows(v) && !g.contains_edge(u, v) {
            visit(CandidatePair { u, v, ra });
        }
    }
    touched.clear();
}

/// Every admissible directed candidate with at least one common neighbour,
/// ranked by RA (pairs without common neighbours have RA 0 and are omitted).
pub fn ra_scores(g: &Graph, min_out: usize) -> Vec<CandidatePair> {
    ra_scores_filtered(
        g,
        &CandidateFilter {
            min_out,
            excluded: None,
            out_degree: None,
        },
    )
}

pub fn ra_scores_filtered(g: &Graph, filter: &CandidateFilter) -> Vec<CandidatePair> {
    let view = UndirectedView::new(g);
    let n = g.vertex_count();
    let mut out: Vec<CandidatePair> = g
        .vertices()
        .collect::<Vec<_>>()
        .par_chunks(256)
        .flat_map_iter(|chunk| {
            let mut acc = vec![0.0; n];
            let mut touched = Vec::new();
            let mut local = Vec::new();
            for &u in chunk {
                for_each_from(g, &view, filter, u, &mut acc, &mut touched, |c| local.push(c));
            }
            local
        })
        .collect();
    out.sort_by(rank_order);
    out
}

/// The `limit` best candidates, same order as [`ra_scores_filtered`], without
/// materialising the full candidate list.
pub fn top_ra_candidates(g: &Graph, filter: &CandidateFilter, limit: usize) -> Vec<CandidatePair> {
    if limit == 0 {
        return Vec::new();
    }
    let view = UndirectedView::new(g);
    let n = g.vertex_count();
    let heaps: Vec<BinaryHeap<Reverse<Ranked>>> = g
        .vertices()
        .collect::<Vec<_>>()
        .par_chunks(256)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            let mut touched = Vec::new();
            let mut heap = BinaryHeap::with_capacity(limit + 1);
            for &u in chunk {
                for_each_from(g, &view, filter, u, &mut acc, &mut touched, |c| {
                    push_bounded(&mut heap, Ranked(c), limit)
                });
            }
            heap
        })
        .collect();
    let mut merged = BinaryHeap::with_capacity(limit + 1);
    for heap in heaps {
        for Reverse(r) in heap {
            push_bounded(&mut merged, r, limit);
        }
    }
    let mut out: Vec<CandidatePair> = merged.into_iter().map(|Reverse(r)| r.0).collect();
    out.sort_by(rank_order);
    out
}

fn push_bounded(heap: &mut BinaryHeap<Reverse<Ranked>>, item: Ranked, limit: usize) {
    if heap.len() < limit {
        heap.push(Reverse(item));
    } else if let Some(Reverse(worst)) = heap.peek() {
        if item > *worst {
            heap.pop();
            heap.push(Reverse(item));
        }
    }
}

/// History of organic (unprobed) edge growth and the derived budget `E_g`.
#[derive(Clone, Debug, Default)]
pub struct GrowthState {
    pub history: Vec<i64>,
    pub e_g: usize,
}

/// Appends a period's organic edge-count change; `E_g` becomes the rounded
/// mean of the history, clamped at zero.
pub fn update_growth(mut state: GrowthState, organic_delta: i64) -> GrowthState {
    state.history.push(organic_delta);
    let mean = state.history.iter().sum::<i64>() as f64 / state.history.len() as f64;
    state.e_g = mean.round().max(0.0) as usize;
    state
}

/// Extrapolates the per-period out-degree change seen on probed users to the
/// unprobed population. Must run before the probe is applied to `local`.
pub fn estimate_organic_delta(
    local: &LocalGraph,
    truth: &Snapshot,
    probed: &[VertexId],
    t: usize,
) -> i64 {
    if probed.is_empty() {
        return 0;
    }
    let per_user: f64 = probed
        .iter()
        .map(|&u| {
            let change = truth.graph.out_degree(u) as f64 - local.observed_out_degree(u) as f64;
            change / local.staleness(u, t) as f64
        })
        .sum::<f64>()
        / probed.len() as f64;
    let unprobed = local.vertex_count().saturating_sub(probed.len()) as f64;
    (per_user * unprobed).round() as i64
}

/// Adds the `e_g` best candidates to `local` as tagged inferred edges and
/// returns them. Candidates already present (or self-loops) are skipped.
pub fn infer_edges(
    local: &mut LocalGraph,
    pairs: &[CandidatePair],
    e_g: usize,
) -> Result<Vec<CandidatePair>> {
    let mut ranked = pairs.to_vec();
    ranked.sort_by(rank_order);
    let mut added = Vec::new();
    for c in ranked {
        if added.len() >= e_g {
            break;
        }
        if c.u == c.v {
            continue;
        }
        if local.graph.add_edge(c.u, c.v)? {
            local.inferred.insert((c.u, c.v));
            added.push(c);
        }
    }
    Ok(added)
}

pub fn inferred_path(dir: &Path, t: usize) -> std::path::PathBuf {
    dir.join(format!("inferred_{t}.tsv"))
}

/// Writes `u<TAB>v<TAB>ra_score` rows with a header line.
pub fn write_inferred(path: &Path, inferred: &[CandidatePair]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "u\tv\tra_score").map_err(io)?;
    for c in inferred {
        writeln!(w, "{}\t{}\t{:.16e}", c.u, c.v, c.ra).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force over all ordered pairs, straight from the definition.
    fn brute_force(g: &Graph, min_out: usize) -> Vec<CandidatePair> {
        let n = g.vertex_count();
        let gamma = |x: usize| -> Vec<usize> {
            (0..n)
                .filter(|&y| g.contains_edge(x as VertexId, y as VertexId) || g.contains_edge(y as VertexId, x as VertexId))
                .collect()
        };
        let deg = |w: usize| (g.in_degree(w as VertexId) + g.out_degree(w as VertexId)) as f64;
        let mut out = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u == v || g.contains_edge(u as VertexId, v as VertexId) || g.out_degree(u as VertexId) < min_out {
                    continue;
                }
                let gv = gamma(v);
                let common: Vec<usize> = gamma(u).into_iter().filter(|w| gv.contains(w)).collect();
                if common.is_empty() {
                    continue;
                }
                let ra = common.iter().map(|&w| 1.0 / deg(w)).sum();
                out.push(CandidatePair { u: u as VertexId, v: v as VertexId, ra });
            }
        }
        out.sort_by(rank_order);
        out
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
        let mut g = Graph::new(n);
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random_bool(p) {
                    g.add_edge(u as VertexId, v as VertexId).unwrap();
                }
            }
        }
        g
    }

    #[test]
    fn path_through_common_neighbor() {
        // a=0 - w=1 - b=2 as a -> w <- b
        let g = Graph::from_edges(3, [(0, 1), (2, 1)]).unwrap();
        let c = ra_scores(&g, 0);
        assert_eq!(
            c,
            vec![
                CandidatePair { u: 0, v: 2, ra: 0.5 },
                CandidatePair { u: 2, v: 0, ra: 0.5 }
            ]
        );
    }

    #[test]
    fn no_common_neighbor_is_absent() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(ra_scores(&g, 0).iter().all(|c| !(c.u == 0 && c.v == 2)));
        assert!(ra_scores(&g, 0).is_empty());
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(2..40);
            let g = random_graph(&mut rng, n, 0.1);
            let min_out = rng.random_range(0..3);
            assert_eq!(ra_scores(&g, min_out), brute_force(&g, min_out));
        }
    }

    #[test]
    fn top_candidates_is_prefix_of_full_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_graph(&mut rng, 300, 0.02);
        let filter = CandidateFilter { min_out: 2, excluded: None, out_degree: None };
        let full = ra_scores_filtered(&g, &filter);
        for limit in [0, 1, 17, 500, full.len() + 10] {
            let top = top_ra_candidates(&g, &filter, limit);
            assert_eq!(top, full[..limit.min(full.len())]);
        }
    }

    #[test]
    fn excluded_vertices_never_appear() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_graph(&mut rng, 50, 0.1);
        let excluded: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let filter = CandidateFilter { min_out: 0, excluded: Some(&excluded), out_degree: None };
        for c in ra_scores_filtered(&g, &filter) {
            assert!(!excluded[c.u as usize] && !excluded[c.v as usize]);
        }
    }

    #[test]
    fn out_degree_override_replaces_graph_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_graph(&mut rng, 80, 0.08);
        let degrees: Vec<usize> = (0..80).map(|i| if i % 2 == 0 { 10 } else { 0 }).collect();
        let filter = CandidateFilter { min_out: 1, excluded: None, out_degree: Some(&degrees) };
        let cands = ra_scores_filtered(&g, &filter);
        assert!(!cands.is_empty());
        assert!(cands.iter().all(|c| c.u % 2 == 0));
        let all = ra_scores(&g, 0);
        let even: Vec<_> = all.into_iter().filter(|c| c.u % 2 == 0).collect();
        assert_eq!(cands, even);
    }

    #[test]
    fn growth_cases() {
        let s = update_growth(update_growth(GrowthState::default(), 100), 120);
        assert_eq!(s.e_g, 110);
        assert_eq!(GrowthState::default().e_g, 0);
        let s = update_growth(update_growth(GrowthState::default(), -50), 10);
        assert_eq!(s.e_g, 0);
    }

    #[test]
    fn infer_edges_cases() {
        let snap = Snapshot { t: 0, graph: Graph::new(4) };
        let pairs = [
            CandidatePair { u: 2, v: 3, ra: 0.4 },
            CandidatePair { u: 0, v: 1, ra: 0.9 },
        ];
        let mut local = LocalGraph::observe(&snap);
        assert!(infer_edges(&mut local, &pairs, 0).unwrap().is_empty());
        assert_eq!(local.graph.edge_count(), 0);

        let added = infer_edges(&mut local, &pairs, 1).unwrap();
        assert_eq!(added, vec![pairs[1]]);
        assert!(local.graph.contains_edge(0, 1));
        assert!(local.inferred.contains(&(0, 1)));

        let mut local = LocalGraph::observe(&snap);
        assert_eq!(infer_edges(&mut local, &pairs, 10).unwrap().len(), 2);
    }

    #[test]
    fn organic_delta_extrapolates_out_degree_change() {
        // 10 vertices; probed user 0 gained 2 out-edges since t=0, at t=2
        let g0 = Graph::from_edges(10, [(0, 1)]).unwrap();
        let g2 = Graph::from_edges(10, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let local = LocalGraph::observe(&Snapshot { t: 0, graph: g0 });
        let truth = Snapshot { t: 2, graph: g2 };
        // (2 / 2 periods) * 9 unprobed
        assert_eq!(estimate_organic_delta(&local, &truth, &[0], 2), 9);
        assert_eq!(estimate_organic_delta(&local, &truth, &[], 2), 0);
    }

    proptest! {
        #[test]
        fn ra_symmetric_and_monotone(
            edges in proptest::collection::btree_set((0u32..12, 0u32..12), 0..50),
            u in 0u32..12, v in 0u32..12, w in 0u32..12,
        ) {
            let g = Graph::from_edges(12, edges.into_iter().filter(|(a, b)| a != b)).unwrap();
            let view = UndirectedView::new(&g);
            prop_assert_eq!(view.ra(u, v), view.ra(v, u));

            // add w as a new common neighbour of u and v
            prop_assume!(u != v && w != u && w != v);
            let both = view.neighbors(u).contains(&w) && view.neighbors(v).contains(&w);
            prop_assume!(!both);
            let before = view.ra(u, v);
            let mut g2 = g.clone();
            g2.add_edge(u, w).unwrap();
            g2.add_edge(v, w).unwrap();
            prop_assert!(UndirectedView::new(&g2).ra(u, v) >= before);
        }

        #[test]
        fn inference_never_removes_or_duplicates(
            edges in proptest::collection::btree_set((0u32..15, 0u32..15), 0..60),
            e_g in 0usize..30,
        ) {
            let g = Graph::from_edges(15, edges.into_iter().filter(|(a, b)| a != b)).unwrap();
            let before = g.edge_set();
            let mut local = LocalGraph::observe(&Snapshot { t: 0, graph: g.clone() });
            let pairs = ra_scores(&g, 0);
            let added = infer_edges(&mut local, &pairs, e_g).unwrap();
            let after = local.graph.edge_set();
            prop_assert!(before.is_subset(&after));
            prop_assert_eq!(after.len(), before.len() + added.len());
            prop_assert_eq!(added.len(), e_g.min(pairs.len()));
            for c in &added {
                prop_assert!(c.u != c.v);
                prop_assert!(!before.contains(&(c.u, c.v)));
            }
        }
    }
}
