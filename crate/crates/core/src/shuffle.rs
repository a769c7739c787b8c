//! Interleave several logs into one, as if their queries ran concurrently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::log::{LogEntry, TpfLog};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShuffleMode {
    /// One entry from each non-exhausted log in turn.
    RoundRobin,
    /// Pick the next log at random, weighted by its remaining entries.
    RandomInterleave,
    /// Delay log `i` by `delays[i]` (missing delays are 0) and merge by time.
    Offset(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShufflePolicy {
    pub seed: u64,
    pub mode: ShuffleMode,
}

impl ShufflePolicy {
    pub fn round_robin() -> Self {
        ShufflePolicy {
            seed: 0,
            mode: ShuffleMode::RoundRobin,
        }
    }

    pub fn random(seed: u64) -> Self {
        ShufflePolicy {
            seed,
            mode: ShuffleMode::RandomInterleave,
        }
    }
}

/// Source log index for every output position.
fn interleaving(lens: &[usize], logs: &[TpfLog], policy: &ShufflePolicy) -> Vec<usize> {
    let total: usize = lens.iter().sum();
    let mut order = Vec::with_capacity(total);
    match &policy.mode {
        ShuffleMode::RoundRobin => {
            let mut taken = vec![0; lens.len()];
            while order.len() < total {
                for (i, &n) in lens.iter().enumerate() {
                    if taken[i] < n {
                        taken[i] += 1;
                        order.push(i);
                    }
                }
            }
        }
        ShuffleMode::RandomInterleave => {
            let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
            let mut left = lens.to_vec();
            let mut remaining = total;
            while remaining > 0 {
                let mut pick = rng.random_range(0..remaining);
                let i = left
                    .iter()
                    .position(|&n| {
                        if pick < n {
                            true
                        } else {
                            pick -= n;
                            false
                        }
                    })
                    .expect("pick below remaining");
                left[i] -= 1;
                remaining -= 1;
                order.push(i);
            }
        }
        ShuffleMode::Offset(delays) => {
            let mut keyed: Vec<(i64, usize)> = logs
                .iter()
                .enumerate()
                .flat_map(|(i, log)| {
                    let d = delays.get(i).copied().unwrap_or(0);
                    log.entries().iter().map(move |e| (e.ts.saturating_add(d), i))
                })
                .collect();
            // stable: equal times keep log index then within-log order
            keyed.sort_by_key(|&(t, i)| (t, i));
            order.extend(keyed.into_iter().map(|(_, i)| i));
        }
    }
    order
}

/// Merge `logs` following `policy`. Every entry appears once, each source
/// keeps its internal order, and timestamps are renumbered consecutively
/// from the earliest input timestamp.
pub fn shuffle_logs(logs: &[TpfLog], policy: &ShufflePolicy) -> TpfLog {
    let lens: Vec<usize> = logs.iter().map(TpfLog::len).collect();
    let order = interleaving(&lens, logs, policy);
    let start = logs.iter().filter_map(TpfLog::first_ts).min().unwrap_or(0);
    let mut cursors = vec![0usize; logs.len()];
    let entries: Vec<LogEntry> = order
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let mut e = logs[i].entries()[cursors[i]].clone();
            cursors[i] += 1;
            e.ts = start + k as i64;
            e
        })
        .collect();
    TpfLog::new(entries)
}
