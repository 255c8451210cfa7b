//! Probe-selection strategies over influence-past time series.
//!
//! Every selection breaks ties by ascending vertex id and draws randomness
//! only from the caller's RNG, so a strategy is a pure function of its state,
//! its inputs and its seed.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::rank::top_k;

/// Per-vertex series of past scores, one value per observed period.
#[derive(Clone, Debug, Default)]
pub struct InfluencePast {
    series: Vec<Vec<f64>>,
    periods: Vec<usize>,
}

impl InfluencePast {
    pub fn new(n: usize) -> Self {
        InfluencePast {
            series: vec![Vec::new(); n],
            periods: Vec::new(),
        }
    }

    /// Appends one value per vertex for period `t`; periods must increase.
    pub fn push(&mut self, t: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.series.len() {
            return Err(Error::invalid(format!(
                "influence past tracks {} vertices, got {} values",
                self.series.len(),
                values.len()
            )));
        }
        if self.periods.last().is_some_and(|&last| last >= t) {
            return Err(Error::invalid(format!(
                "period {t} appended after period {}",
                self.periods.last().unwrap()
            )));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::invalid(format!("influence value {bad} not finite and >= 0")));
        }
        for (s, &x) in self.series.iter_mut().zip(values) {
            s.push(x);
        }
        self.periods.push(t);
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.series.len()
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn last_period(&self) -> Option<usize> {
        self.periods.last().copied()
    }

    pub fn series(&self, v: VertexId) -> &[f64] {
        &self.series[v as usize]
    }

    /// Most recent value per vertex (zeros before the first push).
    pub fn latest(&self) -> Vec<f64> {
        self.series
            .iter()
            .map(|s| s.last().copied().unwrap_or(0.0))
            .collect()
    }

    /// Panics if the series holds data from period `t` or later; selection
    /// for period `t` may only look at the past.
    pub fn assert_before(&self, t: usize) {
        if let Some(last) = self.last_period() {
            assert!(last < t, "influence past holds period {last}, selecting for {t}");
        }
    }
}

/// Population standard deviation; zero for fewer than two points.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Volatility term of the probing score: σ of `v`'s influence past.
pub fn change_component(ip: &InfluencePast, v: VertexId) -> f64 {
    population_std(ip.series(v))
}

/// `(1-θ)·last + θ·σ`.
pub fn change_score(ip: &InfluencePast, v: VertexId, last: f64, theta: f64) -> f64 {
    (1.0 - theta) * last + theta * change_component(ip, v)
}

/// Probing scores for every vertex from `last` (the previous period's
/// estimate) and the influence past.
pub fn change_scores(ip: &InfluencePast, last: &[f64], theta: f64) -> Vec<f64> {
    (0..ip.vertex_count())
        .map(|v| change_score(ip, v as VertexId, last[v], theta))
        .collect()
}

pub fn select_change(scores: &[f64], k: usize) -> Vec<VertexId> {
    top_k(scores, k)
}

/// Vertices probed by the round-robin arm since the record was last reset.
#[derive(Clone, Debug, Default)]
pub struct RoundRobinRecord {
    marked: Vec<bool>,
    count: usize,
}

impl RoundRobinRecord {
    pub fn new(n: usize) -> Self {
        RoundRobinRecord {
            marked: vec![false; n],
            count: 0,
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.marked[v as usize]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mark(&mut self, v: VertexId) {
        if !std::mem::replace(&mut self.marked[v as usize], true) {
            self.count += 1;
        }
        if self.count == self.marked.len() {
            self.reset();
        }
    }

    pub fn reset(&mut self) {
        self.marked.fill(false);
        self.count = 0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrategyConfig {
    pub theta: f64,
    pub beta: f64,
    pub k: usize,
    pub rng_seed: u64,
}

impl StrategyConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, x) in [("theta", self.theta), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::invalid(format!("{name} = {x} not in [0,1]")));
            }
        }
        if self.k > n {
            return Err(Error::invalid(format!("k = {} exceeds |V| = {n}", self.k)));
        }
        Ok(())
    }

    /// Size of the score-driven arm, `⌈β·k⌉`.
    pub fn change_quota(&self) -> usize {
        let raw = self.beta * self.k as f64;
        // absorb representation error so that e.g. 0.8 * 50 stays 40
        ((raw - 1e-9).ceil().max(0.0) as usize).min(self.k)
    }
}

/// Round-robin & change selection: `⌈β·k⌉` vertices by score, the rest
/// uniformly from vertices the round-robin record has not yet covered.
pub fn select_rrch<R: Rng + ?Sized>(
    scores: &[f64],
    rr: &mut RoundRobinRecord,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<Vec<VertexId>> {
    let n = scores.len();
    cfg.validate(n)?;
    let mut selected = select_change(scores, cfg.change_quota());
    let mut taken = vec![false; n];
    for &v in &selected {
        taken[v as usize] = true;
    }

    let mut need = cfg.k - selected.len();
    while need > 0 {
        let candidates: Vec<VertexId> = (0..n as VertexId)
            .filter(|&v| !taken[v as usize] && !rr.contains(v))
            .collect();
        if candidates.is_empty() {
            rr.reset();
            continue;
        }
        let draw = need.min(candidates.len());
        let mut picked: Vec<VertexId> = index::sample(rng, candidates.len(), draw)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        for &v in &picked {
            taken[v as usize] = true;
            rr.mark(v);
        }
        selected.extend(picked);
        need -= draw;
    }
    Ok(selected)
}

/// Accumulated probing priority per vertex.
#[derive(Clone, Debug, Default)]
pub struct PriorityState {
    pub priority: Vec<f64>,
}

impl PriorityState {
    pub fn new(n: usize) -> Self {
        PriorityState {
            priority: vec![0.0; n],
        }
    }
}

/// Adds each vertex's current rank to its priority, takes the top `k`, and
/// zeroes the priority of the chosen vertices.
pub fn select_priority(state: &mut PriorityState, pr_now: &[f64], k: usize) -> Result<Vec<VertexId>> {
    if pr_now.len() != state.priority.len() {
        return Err(Error::invalid("priority state and rank vector sizes differ"));
    }
    for (p, &r) in state.priority.iter_mut().zip(pr_now) {
        *p += r;
    }
    let chosen = top_k(&state.priority, k);
    for &v in &chosen {
        state.priority[v as usize] = 0.0;
    }
    Ok(chosen)
}

/// Change-probing score with in-degree in place of rank.
pub fn select_indegree(
    ip_deg: &InfluencePast,
    in_degree: &[f64],
    theta: f64,
    k: usize,
) -> Vec<VertexId> {
    select_change(&change_scores(ip_deg, in_degree, theta), k)
}

/// `k` vertices drawn uniformly without replacement, in ascending order.
pub fn select_random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<VertexId>> {
    if k > n {
        return Err(Error::invalid(format!("cannot sample {k} of {n} vertices")));
    }
    let mut picked: Vec<VertexId> = index::sample(rng, n, k)
        .into_iter()
        .map(|i| i as VertexId)
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

pub fn noprobe() -> Vec<VertexId> {
    Vec::new()
}

/// Strategy as named in experiment configs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum StrategyKind {
    Noprobe,
    Random,
    Indegree {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    Priority,
    Change {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    Rrch {
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default = "default_beta")]
        beta: f64,
    },
}

pub fn default_theta() -> f64 {
    0.5
}

pub fn default_beta() -> f64 {
    0.8
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Noprobe => "noprobe",
            StrategyKind::Random => "random",
            StrategyKind::Indegree { .. } => "indegree",
            StrategyKind::Priority => "priority",
            StrategyKind::Change { .. } => "change",
            StrategyKind::Rrch { .. } => "rrch",
        }
    }

    /// Name plus parameters, e.g. `rrch(theta=0.5,beta=0.8)`.
    pub fn label(&self) -> String {
        match *self {
            StrategyKind::Indegree { theta } | StrategyKind::Change { theta } => {
                format!("{}(theta={theta})", self.name())
            }
            StrategyKind::Rrch { theta, beta } => format!("rrch(theta={theta},beta={beta})"),
            _ => self.name().to_string(),
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            StrategyKind::Indegree { theta }
            | StrategyKind::Change { theta }
            | StrategyKind::Rrch { theta, .. } => Some(theta),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{}: {name} = {x} not in [0,1]", self.name())))
            }
        };
        match *self {
            StrategyKind::Indegree { theta } | StrategyKind::Change { theta } => check("theta", theta),
            StrategyKind::Rrch { theta, beta } => {
                check("theta", theta)?;
                check("beta", beta)
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ip_from(rows: &[&[f64]]) -> InfluencePast {
        let mut ip = InfluencePast::new(rows[0].len());
        for (t, r) in rows.iter().enumerate() {
            ip.push(t, r).unwrap();
        }
        ip
    }

    #[test]
    fn change_component_cases() {
        let ip = ip_from(&[&[0.1, 0.0], &[0.1, 1.0], &[0.1, 0.0]]);
        assert_eq!(change_component(&ip, 0), 0.0);
        let ip = ip_from(&[&[0.0], &[1.0]]);
        assert_eq!(change_component(&ip, 0), 0.5);
        let ip = ip_from(&[&[0.3]]);
        assert_eq!(change_component(&ip, 0), 0.0);
    }

    #[test]
    fn change_score_extremes() {
        let ip = ip_from(&[&[0.0], &[1.0]]);
        assert_eq!(change_score(&ip, 0, 0.02, 0.0), 0.02);
        assert_eq!(change_score(&ip, 0, 0.02, 1.0), 0.5);
        // sigma 0.01: series [0.0, 0.02]
        let ip = ip_from(&[&[0.0], &[0.02]]);
        assert!((change_score(&ip, 0, 0.02, 0.5) - 0.015).abs() < 1e-15);
    }

    #[test]
    fn influence_past_rejects_lookahead_and_bad_values() {
        let mut ip = InfluencePast::new(2);
        ip.push(1, &[0.5, 0.5]).unwrap();
        assert!(ip.push(1, &[0.5, 0.5]).is_err());
        assert!(ip.push(2, &[0.5]).is_err());
        assert!(ip.push(2, &[f64::NAN, 0.5]).is_err());
        ip.assert_before(2);
    }

    #[test]
    #[should_panic]
    fn assert_before_catches_lookahead() {
        let mut ip = InfluencePast::new(1);
        ip.push(3, &[0.5]).unwrap();
        ip.assert_before(3);
    }

    #[test]
    fn select_change_cases() {
        assert_eq!(select_change(&[3.0, 2.0, 1.0], 2), vec![0, 1]);
        assert_eq!(select_change(&[1.0, 1.0, 0.0], 1), vec![0]);
        let mut all = select_change(&[0.3, 0.1, 0.2], 3);
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn rrch_with_beta_one_is_change() {
        let scores = [0.5, 0.9, 0.1, 0.7];
        let mut rr = RoundRobinRecord::new(4);
        let cfg = StrategyConfig { theta: 0.5, beta: 1.0, k: 2, rng_seed: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = select_rrch(&scores, &mut rr, &cfg, &mut rng).unwrap();
        assert_eq!(got, select_change(&scores, 2));
        assert!(rr.is_empty());
    }

    #[test]
    fn rrch_six_vertex_fixture() {
        // a..f = 0..5, rr = {c}
        let scores = [9.0, 8.0, 1.0, 1.0, 1.0, 1.0];
        let cfg = StrategyConfig { theta: 0.5, beta: 0.5, k: 4, rng_seed: 42 };
        let run = || {
            let mut rr = RoundRobinRecord::new(6);
            rr.mark(2);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            let got = select_rrch(&scores, &mut rr, &cfg, &mut rng).unwrap();
            (got, rr)
        };
        let (got, rr) = run();
        assert_eq!(&got[..2], &[0, 1]);
        assert_eq!(got.len(), 4);
        for v in &got[2..] {
            assert!([3, 4, 5].contains(v), "{got:?}");
            assert!(rr.contains(*v));
        }
        assert!(rr.contains(2));
        assert_eq!(run().0, got);
    }

    #[test]
    fn rrch_beta_zero_covers_universe() {
        let n = 23;
        let k = 5;
        let scores = vec![0.0; n];
        let cfg = StrategyConfig { theta: 0.5, beta: 0.0, k, rng_seed: 3 };
        let mut rr = RoundRobinRecord::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = vec![false; n];
        for _ in 0..n.div_ceil(k) {
            for v in select_rrch(&scores, &mut rr, &cfg, &mut rng).unwrap() {
                seen[v as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn priority_cases() {
        let mut st = PriorityState::new(3);
        assert_eq!(select_priority(&mut st, &[1.0 / 3.0; 3], 1).unwrap(), vec![0]);

        let mut st = PriorityState::new(3);
        let all = select_priority(&mut st, &[0.2, 0.5, 0.3], 3).unwrap();
        assert_eq!(all.len(), 3);
        assert!(st.priority.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn priority_two_period_trace() {
        // PR = (0.5, 0.3, 0.2), k = 1.
        // t1: priorities (0.5, 0.3, 0.2) -> pick 0, reset.
        // t2: (0.5, 0.6, 0.4) -> pick 1; 0 loses to 1's two-period sum.
        let pr = [0.5, 0.3, 0.2];
        let mut st = PriorityState::new(3);
        assert_eq!(select_priority(&mut st, &pr, 1).unwrap(), vec![0]);
        assert_eq!(select_priority(&mut st, &pr, 1).unwrap(), vec![1]);
        // with a dominant vertex it wins again: 0.7 > 0.2 + 0.2
        let pr = [0.7, 0.2, 0.1];
        let mut st = PriorityState::new(3);
        assert_eq!(select_priority(&mut st, &pr, 1).unwrap(), vec![0]);
        assert_eq!(select_priority(&mut st, &pr, 1).unwrap(), vec![0]);
    }

    #[test]
    fn indegree_cases() {
        // star center 0 has the largest in-degree
        let deg = [3.0, 0.0, 1.0, 0.0];
        let mut ip = InfluencePast::new(4);
        ip.push(0, &deg).unwrap();
        ip.push(1, &deg).unwrap();
        assert_eq!(select_indegree(&ip, &deg, 0.0, 2), vec![0, 2]);
        // static graph, θ = 1: all σ = 0 -> lowest ids
        assert_eq!(select_indegree(&ip, &deg, 1.0, 2), vec![0, 1]);
    }

    #[test]
    fn random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(select_random(10, 0, &mut rng).unwrap().is_empty());
        assert_eq!(select_random(4, 4, &mut rng).unwrap(), vec![0, 1, 2, 3]);
        assert!(select_random(4, 5, &mut rng).is_err());
        let a = select_random(100, 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = select_random(100, 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(noprobe().is_empty());
    }

    #[test]
    fn change_quota_rounds_up() {
        let q = |beta, k| StrategyConfig { theta: 0.0, beta, k, rng_seed: 0 }.change_quota();
        assert_eq!(q(0.8, 50), 40);
        assert_eq!(q(0.5, 3), 2);
        assert_eq!(q(0.0, 3), 0);
        assert_eq!(q(1.0, 3), 3);
        assert_eq!(q(0.6, 10), 6);
    }

    #[test]
    fn strategy_kind_parses_from_toml() {
        #[derive(Deserialize)]
        struct W {
            s: Vec<StrategyKind>,
        }
        let w: W = toml::from_str(
            r#"
            [[s]]
            name = "rrch"
            beta = 0.6
            [[s]]
            name = "noprobe"
            "#,
        )
        .unwrap();
        assert_eq!(w.s[0], StrategyKind::Rrch { theta: 0.5, beta: 0.6 });
        assert_eq!(w.s[1].label(), "noprobe");
        assert_eq!(w.s[0].label(), "rrch(theta=0.5,beta=0.6)");
    }

    proptest! {
        #[test]
        fn rrch_size_and_uniqueness(
            scores in proptest::collection::vec(0.0f64..1.0, 1..40),
            beta in 0.0f64..=1.0,
            kfrac in 0.0f64..=1.0,
            seed in any::<u64>(),
            rounds in 1usize..6,
        ) {
            let n = scores.len();
            let k = ((n as f64) * kfrac) as usize;
            let cfg = StrategyConfig { theta: 0.5, beta, k, rng_seed: seed };
            let mut rr = RoundRobinRecord::new(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..rounds {
                let mut got = select_rrch(&scores, &mut rr, &cfg, &mut rng).unwrap();
                prop_assert_eq!(got.len(), k);
                got.sort();
                got.dedup();
                prop_assert_eq!(got.len(), k);
            }
        }

        #[test]
        fn rrch_coverage_bound(
            n in 2usize..60,
            k in 1usize..20,
            beta_steps in 0usize..10,
            seed in any::<u64>(),
        ) {
            prop_assume!(k <= n);
            let beta = beta_steps as f64 / 10.0;
            let cfg = StrategyConfig { theta: 0.5, beta, k, rng_seed: seed };
            let rr_arm = k - cfg.change_quota();
            prop_assume!(rr_arm > 0);
            // arbitrary fixed scores: the change arm keeps picking the same vertices
            let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64).collect();
            let mut rr = RoundRobinRecord::new(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut seen = vec![false; n];
            for _ in 0..n.div_ceil(rr_arm) {
                for v in select_rrch(&scores, &mut rr, &cfg, &mut rng).unwrap() {
                    seen[v as usize] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }

        #[test]
        fn select_change_scale_invariant(
            scores in proptest::collection::vec(0.0f64..1.0, 1..30),
            c in 0.001f64..1000.0,
            k in 0usize..30,
        ) {
            let scaled: Vec<f64> = scores.iter().map(|x| x * c).collect();
            prop_assert_eq!(select_change(&scores, k), select_change(&scaled, k));
        }

        #[test]
        fn theta_extremes(
            pr in proptest::collection::vec(0.0f64..1.0, 2..20),
            prev in proptest::collection::vec(0.0f64..1.0, 2..20),
            k in 1usize..10,
        ) {
            let n = pr.len().min(prev.len());
            let (pr, prev) = (&pr[..n], &prev[..n]);
            let mut ip = InfluencePast::new(n);
            ip.push(0, prev).unwrap();
            ip.push(1, pr).unwrap();
            prop_assert_eq!(select_change(&change_scores(&ip, pr, 0.0), k), top_k(pr, k));
            let sig: Vec<f64> = (0..n).map(|v| change_component(&ip, v as VertexId)).collect();
            prop_assert_eq!(select_change(&change_scores(&ip, pr, 1.0), k), top_k(&sig, k));
        }
    }
}
