//! Shared unit-test fixtures.

use crate::log::{LogEntry, TpfLog};
use crate::rdf::{MappingSet, Term};
use crate::syntax::parse_pattern;

pub(crate) fn entry(ts: i64, tp: &str, mu: &[(&str, &[&str])]) -> LogEntry {
    let mut outputs = MappingSet::new();
    for (var, values) in mu {
        for v in *values {
            outputs.insert(var, Term::iri(*v));
        }
    }
    LogEntry {
        ip: "10.0.0.1".into(),
        ts,
        tp: parse_pattern(tp).unwrap(),
        outputs,
    }
}

/// The interleaved two-query log used throughout the worked example.
pub(crate) fn example_log() -> TpfLog {
    TpfLog::new(vec![
        entry(1, "?s p2 toto", &[("s", &["c1", "c2"])]),
        entry(2, "?s p3 titi", &[("s", &["c3", "c4"])]),
        entry(3, "c1 p1 ?o", &[("o", &["a"])]),
        entry(4, "c3 p4 tata", &[]),
        entry(5, "c2 p1 ?o", &[("o", &["b"])]),
        entry(6, "c3 p1 ?o", &[("o", &["c"])]),
        entry(7, "c4 p4 tata", &[]),
        entry(8, "c4 p1 ?o", &[("o", &["d"])]),
    ])
}
