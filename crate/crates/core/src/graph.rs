//! Directed follower graphs, the partially observed local copy, and the
//! probe-update that refreshes it from ground truth.
//!
//! An edge `(u, v)` means `u` follows `v`. Adjacency lists are kept sorted,
//! which makes every traversal order (and therefore every floating-point
//! accumulation downstream) a function of the edge set alone.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub type VertexId = u32;
pub type Edge = (VertexId, VertexId);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    out: Vec<Vec<VertexId>>,
    inc: Vec<Vec<VertexId>>,
    edges: usize,
}

fn insert_sorted(list: &mut Vec<VertexId>, x: VertexId) -> bool {
    match list.binary_search(&x) {
        Ok(_) => false,
        Err(pos) => {
            list.insert(pos, x);
            true
        }
    }
}

fn remove_sorted(list: &mut Vec<VertexId>, x: VertexId) -> bool {
    match list.binary_search(&x) {
        Ok(pos) => {
            list.remove(pos);
            true
        }
        Err(_) => false,
    }
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph {
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
            edges: 0,
        }
    }

    /// Builds a graph from an edge list, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Graph::new(n);
        for (u, v) in edges {
            if !g.add_edge(u, v)? {
                return Err(Error::invalid(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.out.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if (v as usize) < self.out.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex {
                id: v,
                universe: self.out.len(),
            })
        }
    }

    pub fn contains_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.out
            .get(u as usize)
            .is_some_and(|l| l.binary_search(&v).is_ok())
    }

    /// Inserts `(u, v)`; returns `false` when the edge was already present.
    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<bool> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(Error::invalid(format!("self-loop on vertex {u}")));
        }
        if insert_sorted(&mut self.out[u as usize], v) {
            insert_sorted(&mut self.inc[v as usize], u);
            self.edges += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn remove_edge(&mut self, u: VertexId, v: VertexId) -> bool {
        if (u as usize) >= self.out.len() || (v as usize) >= self.out.len() {
            return false;
        }
        if remove_sorted(&mut self.out[u as usize], v) {
            remove_sorted(&mut self.inc[v as usize], u);
            self.edges -= 1;
            true
        } else {
            false
        }
    }

    /// Sorted out-neighbours (accounts `v` follows). Panics on an id outside
    /// the universe; use [`Graph::check_vertex`] first for untrusted ids.
    pub fn out_neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.out[v as usize]
    }

    /// Sorted in-neighbours (followers of `v`).
    pub fn in_neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.inc[v as usize]
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.out[v as usize].len()
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.inc[v as usize].len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.out.len()).map(|v| v as VertexId)
    }

    /// All edges in `(u, v)` lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().map(move |&v| (u as VertexId, v)))
    }

    pub fn edge_set(&self) -> BTreeSet<Edge> {
        self.edges().collect()
    }

    pub fn degree_view(&self) -> DegreeView<'_> {
        DegreeView { graph: self }
    }

    /// Difference `other ∖ self` (added) and `self ∖ other` (removed).
    pub fn diff(&self, other: &Graph) -> Result<EdgeDelta> {
        if self.vertex_count() != other.vertex_count() {
            return Err(Error::invalid(format!(
                "vertex universes differ: {} vs {}",
                self.vertex_count(),
                other.vertex_count()
            )));
        }
        let mut delta = EdgeDelta::default();
        for u in self.vertices() {
            merge_diff(
                u,
                self.out_neighbors(u),
                other.out_neighbors(u),
                &mut delta,
            );
        }
        Ok(delta)
    }
}

fn merge_diff(u: VertexId, old: &[VertexId], new: &[VertexId], delta: &mut EdgeDelta) {
    let (mut i, mut j) = (0, 0);
    while i < old.len() || j < new.len() {
        match (old.get(i), new.get(j)) {
            (Some(&a), Some(&b)) if a == b => {
                i += 1;
                j += 1;
            }
            (Some(&a), Some(&b)) if a < b => {
                delta.removed.push((u, a));
                i += 1;
            }
            (Some(&a), None) => {
                delta.removed.push((u, a));
                i += 1;
            }
            (_, Some(&b)) => {
                delta.added.push((u, b));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
}

/// Checked degree and adjacency accessors.
#[derive(Clone, Copy, Debug)]
pub struct DegreeView<'a> {
    graph: &'a Graph,
}

impl<'a> DegreeView<'a> {
    pub fn in_degree(&self, v: VertexId) -> Result<usize> {
        self.graph.check_vertex(v)?;
        Ok(self.graph.in_degree(v))
    }

    pub fn out_degree(&self, v: VertexId) -> Result<usize> {
        self.graph.check_vertex(v)?;
        Ok(self.graph.out_degree(v))
    }

    pub fn in_neighbors(&self, v: VertexId) -> Result<&'a [VertexId]> {
        self.graph.check_vertex(v)?;
        Ok(self.graph.in_neighbors(v))
    }

    pub fn out_neighbors(&self, v: VertexId) -> Result<&'a [VertexId]> {
        self.graph.check_vertex(v)?;
        Ok(self.graph.out_neighbors(v))
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        self.graph.inc.iter().map(Vec::len).collect()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.graph.out.iter().map(Vec::len).collect()
    }
}

/// Ground-truth network at one period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub t: usize,
    pub graph: Graph,
}

/// Edges gained and lost by a change, both in `(u, v)` order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeDelta {
    pub added: Vec<Edge>,
    pub removed: Vec<Edge>,
}

impl EdgeDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }

    /// `set ∪ added ∖ removed`.
    pub fn apply_to(&self, set: &mut BTreeSet<Edge>) {
        for e in &self.removed {
            set.remove(e);
        }
        set.extend(self.added.iter().copied());
    }

    fn normalize(&mut self) {
        self.added.sort_unstable();
        self.added.dedup();
        self.removed.sort_unstable();
        self.removed.dedup();
    }
}

/// Set difference between two edge sets: `added = b ∖ a`, `removed = a ∖ b`.
pub fn edge_diff(a: &BTreeSet<Edge>, b: &BTreeSet<Edge>) -> EdgeDelta {
    EdgeDelta {
        added: b.difference(a).copied().collect(),
        removed: a.difference(b).copied().collect(),
    }
}

/// Period value stored for vertices that have not been probed since the full
/// observation at `t = 0`.
pub const NEVER_PROBED: i64 = -1;

/// A strategy's partially observed copy of the network.
#[derive(Clone, Debug)]
pub struct LocalGraph {
    pub graph: Graph,
    pub last_probed: Vec<i64>,
    /// Edges added by link inference rather than observed by a probe.
    pub inferred: BTreeSet<Edge>,
}

impl LocalGraph {
    /// Full observation of `snapshot`, as at `t = 0`.
    pub fn observe(snapshot: &Snapshot) -> Self {
        LocalGraph {
            graph: snapshot.graph.clone(),
            last_probed: vec![NEVER_PROBED; snapshot.graph.vertex_count()],
            inferred: BTreeSet::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Periods since `v`'s incident edges were last seen exactly (the initial
    /// full observation counts as period 0).
    pub fn staleness(&self, v: VertexId, t: usize) -> usize {
        let seen = self.last_probed[v as usize].max(0) as usize;
        t.saturating_sub(seen).max(1)
    }

    /// Out-degree of `v` counting only observed (non-inferred) edges.
    pub fn observed_out_degree(&self, v: VertexId) -> usize {
        let inferred = self
            .inferred
            .range((v, 0)..=(v, VertexId::MAX))
            .count();
        self.graph.out_degree(v) - inferred
    }

    /// Replaces every edge incident on a probed user (in- and out-edges) with
    /// the ground truth, leaving edges between unprobed users untouched.
    pub fn probe_update(
        &mut self,
        truth: &Snapshot,
        probed: &[VertexId],
        t: usize,
    ) -> Result<EdgeDelta> {
        if truth.t != t {
            return Err(Error::invalid(format!(
                "probe at period {t} against snapshot of period {}",
                truth.t
            )));
        }
        if truth.graph.vertex_count() != self.vertex_count() {
            return Err(Error::invalid(format!(
                "truth has {} vertices, local graph has {}",
                truth.graph.vertex_count(),
                self.vertex_count()
            )));
        }
        for &u in probed {
            self.graph.check_vertex(u)?;
        }

        let mut delta = EdgeDelta::default();
        let mut scratch = EdgeDelta::default();
        for &u in probed {
            scratch.added.clear();
            scratch.removed.clear();
            merge_diff(
                u,
                self.graph.out_neighbors(u),
                truth.graph.out_neighbors(u),
                &mut scratch,
            );
            // in-edges, recorded with `u` as target
            let mut incoming = EdgeDelta::default();
            merge_diff(
                u,
                self.graph.in_neighbors(u),
                truth.graph.in_neighbors(u),
                &mut incoming,
            );
            scratch
                .added
                .extend(incoming.added.iter().map(|&(v, x)| (x, v)));
            scratch
                .removed
                .extend(incoming.removed.iter().map(|&(v, x)| (x, v)));

            for &(a, b) in &scratch.removed {
                if self.graph.remove_edge(a, b) {
                    delta.removed.push((a, b));
                }
            }
            for &(a, b) in &scratch.added {
                if self.graph.add_edge(a, b)? {
                    delta.added.push((a, b));
                }
            }
            // whatever is incident on u is now observed truth
            for &x in truth.graph.out_neighbors(u) {
                self.inferred.remove(&(u, x));
            }
            for &x in truth.graph.in_neighbors(u) {
                self.inferred.remove(&(x, u));
            }
            self.last_probed[u as usize] = t as i64;
        }
        for e in &delta.removed {
            self.inferred.remove(e);
        }
        delta.normalize();
        Ok(delta)
    }
}

pub fn snapshot_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("snapshot_{t}.tsv"))
}

pub fn vertices_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("vertices_{t}.txt"))
}

fn parse_id(path: &Path, line: usize, s: &str) -> Result<VertexId> {
    s.trim().parse::<VertexId>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad vertex id {s:?}: {e}"),
    })
}

/// Reads `snapshot_<t>.tsv` (and `vertices_<t>.txt` when present) from `dir`.
///
/// With `universe = None` the vertex count is one past the largest id seen.
pub fn read_snapshot(dir: &Path, t: usize, universe: Option<usize>) -> Result<Snapshot> {
    let path = snapshot_path(dir, t);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut edges = Vec::new();
    let mut max_id: Option<VertexId> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: i + 1,
            msg: "expected `u<TAB>v`".into(),
        })?;
        let u = parse_id(&path, i + 1, a)?;
        let v = parse_id(&path, i + 1, b)?;
        max_id = max_id.max(Some(u.max(v)));
        edges.push((u, v));
    }

    let vpath = vertices_path(dir, t);
    if vpath.exists() {
        let text = fs::read_to_string(&vpath).map_err(|e| Error::io(&vpath, e))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = parse_id(&vpath, i + 1, line)?;
            max_id = max_id.max(Some(v));
        }
    }

    let seen = max_id.map_or(0, |m| m as usize + 1);
    let n = match universe {
        Some(n) if seen > n => {
            return Err(Error::Parse {
                path,
                line: 0,
                msg: format!("vertex id {} outside universe of {n}", seen - 1),
            })
        }
        Some(n) => n,
        None => seen,
    };
    let graph = Graph::from_edges(n, edges).map_err(|e| Error::Parse {
        path: path.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    Ok(Snapshot { t, graph })
}

/// Writes `snapshot_<t>.tsv` and `vertices_<t>.txt` (every id, so isolated
/// vertices survive the round trip).
pub fn write_snapshot(dir: &Path, snapshot: &Snapshot) -> Result<()> {
    let path = snapshot_path(dir, snapshot.t);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for (u, v) in snapshot.graph.edges() {
        writeln!(w, "{u}\t{v}").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let vpath = vertices_path(dir, snapshot.t);
    let file = fs::File::create(&vpath).map_err(|e| Error::io(&vpath, e))?;
    let mut w = BufWriter::new(file);
    for v in snapshot.graph.vertices() {
        writeln!(w, "{v}").map_err(|e| Error::io(&vpath, e))?;
    }
    w.flush().map_err(|e| Error::io(&vpath, e))
}
