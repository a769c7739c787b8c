//! Random query workloads over synthetic stores, and large interleaved logs
//! built from their executions.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::client::{execute_query, ClientConfig, ClientError, Clock};
use crate::log::{LogEntry, TpfLog};
use crate::rdf::{Bgp, Term, Triple, TriplePattern};
use crate::shuffle::{shuffle_logs, ShufflePolicy};
use crate::store::Store;

/// Queries with the store they run on.
#[derive(Clone, Debug)]
pub struct Workload {
    pub store: Store,
    pub queries: Vec<Bgp>,
}

const ENTITIES: usize = 8;

fn iri(prefix: &str, name: impl std::fmt::Display) -> Term {
    Term::iri(format!("{prefix}{name}"))
}

fn triple(s: Term, p: &Term, o: Term) -> Triple {
    Triple::new(s, p.clone(), o).expect("generated triples are well formed")
}

/// One query and its data; every IRI starts with `prefix`.
fn random_query(rng: &mut ChaCha8Rng, prefix: &str, triples: &mut Vec<Triple>) -> Bgp {
    let size = rng.random_range(2..=4);
    let star = rng.random_bool(0.5);
    let entity = |k: usize| iri(prefix, format_args!("e{k}"));
    let pred = |k: usize| iri(prefix, format_args!("p{k}"));
    let var = |k: usize| Term::var(format!("v{k}"));

    let constant = iri(prefix, "c");
    let p0 = pred(0);
    let mut heads: Vec<usize> = (0..ENTITIES).collect();
    heads.truncate(rng.random_range(2..=4));
    for &e in &heads {
        triples.push(triple(entity(e), &p0, constant.clone()));
    }
    let mut patterns = vec![TriplePattern::new(var(0), p0, constant)];
    for k in 1..size {
        let p = pred(k);
        for e in 0..ENTITIES {
            if !rng.random_bool(0.7) {
                continue;
            }
            for _ in 0..rng.random_range(1..=2) {
                let o = rng.random_range(0..ENTITIES);
                triples.push(triple(entity(e), &p, entity(o)));
            }
        }
        let (s, o) = if star { (var(0), var(k)) } else { (var(k - 1), var(k)) };
        patterns.push(TriplePattern::new(s, p, o));
    }
    Bgp::new(patterns)
}

/// `n` queries whose predicates, constants and data are pairwise disjoint.
pub fn disjoint_workload(seed: u64, n: usize) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::new();
    let queries = (0..n)
        .map(|i| random_query(&mut rng, &format!("q{i}_"), &mut triples))
        .collect();
    Workload {
        store: Store::from_triples(triples),
        queries,
    }
}

/// The isolated log of every query, each starting at `cfg.clock`.
pub fn execute_all(w: &Workload, cfg: &ClientConfig) -> Result<Vec<TpfLog>, ClientError> {
    w.queries
        .iter()
        .map(|q| execute_query(&w.store, q, cfg).map(|e| TpfLog::new(e.log)))
        .collect()
}

/// A log of exactly `entries` entries: repeated executions of `queries`
/// disjoint queries, a few at a time, interleaved at random, one tick per
/// request, from 16 client ips.
pub fn scale_log(seed: u64, queries: usize, entries: usize) -> TpfLog {
    let w = disjoint_workload(seed, queries.max(1));
    let cfg = ClientConfig {
        clock: Clock { start: 0, step: 1 },
        ..Default::default()
    };
    let logs = execute_all(&w, &cfg).expect("generated queries are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out: Vec<LogEntry> = Vec::with_capacity(entries);
    while out.len() < entries {
        let batch: Vec<TpfLog> = (0..rng.random_range(3..=6))
            .map(|_| logs.choose(&mut rng).expect("at least one query").clone())
            .collect();
        let ip = format!("10.0.0.{}", rng.random_range(1..=16));
        let merged = shuffle_logs(&batch, &ShufflePolicy::random(rng.random()));
        for mut e in merged.into_entries() {
            if out.len() == entries {
                break;
            }
            e.ts = out.len() as i64;
            e.ip.clone_from(&ip);
            out.push(e);
        }
    }
    TpfLog::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_are_reproducible_and_disjoint() {
        let a = disjoint_workload(3, 4);
        let b = disjoint_workload(3, 4);
        assert_eq!(a.queries, b.queries);
        assert_eq!(a.store.triples(), b.store.triples());
        for (i, q) in a.queries.iter().enumerate() {
            let prefix = format!("q{i}_");
            for tp in q.patterns() {
                assert!(tp.p.to_string().starts_with(&prefix));
            }
        }
    }

    #[test]
    fn scale_log_has_exact_size() {
        let log = scale_log(1, 5, 1234);
        assert_eq!(log.len(), 1234);
        assert_eq!(log.first_ts(), Some(0));
        assert_eq!(log.last_ts(), Some(1233));
    }
}
