//! TPF server logs: one JSON record per line.
//!
//! ```text
//! {"ip":"10.0.0.1","ts":1,"s":"?s","p":"p2","o":"toto","mu":{"?s":["c1","c2"]}}
//! ```
//!
//! `s`, `p`, `o` and the values of `mu` use the term syntax of
//! [`crate::syntax`]; `mu` lists, per variable of the requested pattern, the
//! values found in the returned triples.

use std::io::{BufRead, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::rdf::{is_reserved, MappingSet, Term, TriplePattern};
use crate::syntax::{parse_term, Prefixes};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub ip: String,
    pub ts: i64,
    pub tp: TriplePattern,
    /// Output mappings of the request.
    pub outputs: MappingSet,
}

/// Entries ordered by timestamp, ties kept in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TpfLog {
    entries: Vec<LogEntry>,
}

impl TpfLog {
    /// Builds a log, stably sorting entries by timestamp.
    pub fn new(mut entries: Vec<LogEntry>) -> Self {
        entries.sort_by_key(|e| e.ts);
        TpfLog { entries }
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<LogEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_ts(&self) -> Option<i64> {
        self.entries.first().map(|e| e.ts)
    }

    pub fn last_ts(&self) -> Option<i64> {
        self.entries.last().map(|e| e.ts)
    }

    /// Last minus first timestamp; 0 for empty logs.
    pub fn duration(&self) -> i64 {
        match (self.first_ts(), self.last_ts()) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }
}

/// A line that did not become an entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Serialize, Deserialize)]
struct Record<'a> {
    #[serde(borrow)]
    ip: std::borrow::Cow<'a, str>,
    ts: i64,
    s: String,
    p: String,
    o: String,
    #[serde(default)]
    mu: IndexMap<String, Vec<String>>,
}

fn entry_from_record(rec: Record<'_>) -> Result<LogEntry, String> {
    let prefixes = Prefixes::new();
    let s = parse_term(&rec.s, &prefixes)?;
    let p = parse_term(&rec.p, &prefixes)?;
    let o = parse_term(&rec.o, &prefixes)?;
    if p.is_variable() {
        return Err("unbound predicate".into());
    }
    if p.is_literal() || s.is_literal() {
        return Err("literal outside object position".into());
    }
    let tp = TriplePattern::new(s, p, o);
    if tp.variables().iter().any(|v| is_reserved(v)) {
        return Err("reserved variable name in pattern".into());
    }
    let mut outputs = MappingSet::new();
    for (key, values) in rec.mu {
        let var = key
            .strip_prefix('?')
            .ok_or_else(|| format!("mapping key `{key}` is not a variable"))?;
        if !tp.has_variable(var) {
            return Err(format!("mapping variable `{key}` does not occur in the pattern"));
        }
        if values.is_empty() {
            return Err(format!("empty mapping for `{key}`"));
        }
        for v in values {
            let term = parse_term(&v, &prefixes)?;
            if term.is_variable() {
                return Err(format!("mapping value `{v}` is a variable"));
            }
            outputs.insert(var, term);
        }
    }
    Ok(LogEntry {
        ip: rec.ip.into_owned(),
        ts: rec.ts,
        tp,
        outputs,
    })
}

/// Parse a log. Every non-blank line becomes either an entry or a reject;
/// only read failures are errors.
pub fn parse_log<R: BufRead>(reader: R) -> Result<(TpfLog, Vec<Reject>), ParseError> {
    let mut entries = Vec::new();
    let mut rejects = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed = serde_json::from_str::<Record>(trimmed)
            .map_err(|e| format!("malformed record: {e}"))
            .and_then(entry_from_record);
        match parsed {
            Ok(e) => entries.push(e),
            Err(reason) => rejects.push(Reject { line: idx + 1, reason }),
        }
    }
    Ok((TpfLog::new(entries), rejects))
}

pub fn write_entry<W: Write>(out: &mut W, e: &LogEntry) -> std::io::Result<()> {
    let mu: IndexMap<String, Vec<String>> = e
        .outputs
        .iter()
        .map(|(var, values)| (format!("?{var}"), values.iter().map(Term::to_string).collect()))
        .collect();
    let rec = Record {
        ip: e.ip.as_str().into(),
        ts: e.ts,
        s: e.tp.s.to_string(),
        p: e.tp.p.to_string(),
        o: e.tp.o.to_string(),
        mu,
    };
    serde_json::to_writer(&mut *out, &rec)?;
    out.write_all(b"\n")
}

pub fn write_log<W: Write>(mut out: W, log: &TpfLog) -> std::io::Result<()> {
    for e in log.entries() {
        write_entry(&mut out, e)?;
    }
    out.flush()
}
