//! Rate-limit arithmetic: API window limits to per-period probe capacity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateModel {
    pub rel_calls_per_window: u64,
    pub tweet_calls_per_window: u64,
    pub window_minutes: u64,
    pub followers_per_call: u64,
    pub tweets_per_call: u64,
}

impl Default for RateModel {
    fn default() -> Self {
        RateModel {
            rel_calls_per_window: 15,
            tweet_calls_per_window: 180,
            window_minutes: 15,
            followers_per_call: 5000,
            tweets_per_call: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Relations,
    Tweets,
}

impl std::str::FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relations" => Ok(ProbeKind::Relations),
            "tweets" => Ok(ProbeKind::Tweets),
            other => Err(Error::invalid(format!("unknown probe kind {other:?}"))),
        }
    }
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.rel_calls_per_window,
            self.tweet_calls_per_window,
            self.window_minutes,
            self.followers_per_call,
            self.tweets_per_call,
        ];
        if fields.contains(&0) {
            return Err(Error::Config("rate model values must be positive".into()));
        }
        Ok(())
    }

    /// Calls per minute available to one API, i.e. best-case users per
    /// minute when every user fits in a single call.
    pub fn users_per_minute(&self, kind: ProbeKind) -> f64 {
        let calls = match kind {
            ProbeKind::Relations => self.rel_calls_per_window,
            ProbeKind::Tweets => self.tweet_calls_per_window,
        };
        calls as f64 / self.window_minutes as f64
    }

    /// Calls available to one API over `period_days`.
    pub fn calls_per_period(&self, kind: ProbeKind, period_days: f64) -> u64 {
        (self.users_per_minute(kind) * period_days * 1440.0).floor() as u64
    }

    /// Calls to fetch one user's followers and friends (both relation APIs).
    pub fn relation_probe_cost(&self, follower_count: u64, friend_count: u64) -> u64 {
        follower_count.max(1).div_ceil(self.followers_per_call)
            + friend_count.max(1).div_ceil(self.followers_per_call)
    }

    /// Calls to fetch one user's recent tweets.
    pub fn tweet_probe_cost(&self, tweet_count: u64) -> u64 {
        tweet_count.max(1).div_ceil(self.tweets_per_call)
    }
}

/// `R · P · 1440`: users refreshable in `period_days` at the best-case rate.
pub fn feasible_users(rates: &RateModel, period_days: f64, kind: ProbeKind) -> Result<u64> {
    if !(period_days > 0.0) {
        return Err(Error::invalid(format!("period_days {period_days} must be > 0")));
    }
    Ok(rates.calls_per_period(kind, period_days))
}

/// Probe count for a capacity fraction: `max(1, round(fraction · n))`.
pub fn capacity_to_k(universe_size: usize, capacity_fraction: f64) -> Result<usize> {
    if !(capacity_fraction > 0.0 && capacity_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "capacity {capacity_fraction} not in (0,1]"
        )));
    }
    let k = (capacity_fraction * universe_size as f64).round() as usize;
    Ok(k.clamp(1, universe_size.max(1)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetCheck {
    pub kind: ProbeKind,
    pub required_calls: u64,
    pub available_calls: u64,
}

impl BudgetCheck {
    pub fn feasible(&self) -> bool {
        self.required_calls <= self.available_calls
    }

    pub fn shortfall(&self) -> u64 {
        self.required_calls.saturating_sub(self.available_calls)
    }
}

/// Worst-case calls per API for probing `k` users whose per-API costs are
/// `costs`: the `k` most expensive users.
pub fn worst_case_calls(mut costs: Vec<u64>, k: usize) -> u64 {
    costs.sort_unstable_by(|a, b| b.cmp(a));
    costs.iter().take(k).sum()
}

/// Checks `k` relation probes per period against both relation APIs.
/// `followers`/`friends` are per-user counts; empty slices mean the best case.
pub fn check_relations(
    rates: &RateModel,
    period_days: f64,
    k: usize,
    followers: &[u64],
    friends: &[u64],
) -> Result<BudgetCheck> {
    let available = feasible_users(rates, period_days, ProbeKind::Relations)?;
    let per_api = |counts: &[u64]| {
        if counts.is_empty() {
            k as u64
        } else {
            worst_case_calls(
                counts
                    .iter()
                    .map(|&c| c.max(1).div_ceil(rates.followers_per_call))
                    .collect(),
                k,
            )
        }
    };
    Ok(BudgetCheck {
        kind: ProbeKind::Relations,
        required_calls: per_api(followers).max(per_api(friends)),
        available_calls: available,
    })
}

/// Checks `probes` tweet fetches per period; `tweet_counts` empty means the
/// best case of one call per user.
pub fn check_tweets(
    rates: &RateModel,
    period_days: f64,
    probes: usize,
    tweet_counts: &[u64],
) -> Result<BudgetCheck> {
    let available = feasible_users(rates, period_days, ProbeKind::Tweets)?;
    let required = if tweet_counts.is_empty() {
        probes as u64
    } else {
        worst_case_calls(
            tweet_counts.iter().map(|&c| rates.tweet_probe_cost(c)).collect(),
            probes,
        )
    };
    Ok(BudgetCheck {
        kind: ProbeKind::Tweets,
        required_calls: required,
        available_calls: available,
    })
}
