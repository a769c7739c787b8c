//! Simulated TPF client: evaluates a BGP with nested-loop joins against a
//! [`Store`], one single-pattern request at a time, and records the server
//! log the evaluation produces.

use std::collections::HashMap;

use indexmap::IndexMap;
use thiserror::Error;

use crate::log::LogEntry;
use crate::rdf::{Bgp, MappingSet, Position, Term, TriplePattern};
use crate::store::{Store, DEFAULT_PAGE_SIZE};

/// One solution: variable name to value.
pub type Row = HashMap<String, Term>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clock {
    pub start: i64,
    pub step: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientConfig {
    pub ip: String,
    /// Request page 1 of every pattern before choosing the join order.
    pub probe_first: bool,
    pub page_size: usize,
    pub clock: Clock,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            ip: "10.0.0.1".into(),
            probe_first: false,
            page_size: DEFAULT_PAGE_SIZE,
            clock: Clock { start: 1, step: 1 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("query has no triple pattern")]
    EmptyQuery,
    #[error("unbound predicate in `{0}`")]
    UnboundPredicate(String),
    #[error("page size must be positive")]
    ZeroPageSize,
    #[error("clock step must be positive")]
    NonPositiveStep,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Execution {
    pub solutions: Vec<Row>,
    pub log: Vec<LogEntry>,
    pub warnings: Vec<String>,
}

/// Request pattern as the server sees it: subject variable `?s`, object
/// variable `?o` (`?s` twice when both positions hold the same variable).
fn normalize(tp: &TriplePattern) -> TriplePattern {
    let s = match &tp.s {
        Term::Variable(_) => Term::var("s"),
        t => t.clone(),
    };
    let o = match &tp.o {
        Term::Variable(v) if tp.s.as_variable() == Some(v) => Term::var("s"),
        Term::Variable(_) => Term::var("o"),
        t => t.clone(),
    };
    TriplePattern::new(s, tp.p.clone(), o)
}

struct Client<'a, C: FnMut() -> i64> {
    store: &'a Store,
    ip: &'a str,
    page_size: usize,
    clock: C,
    log: Vec<LogEntry>,
}

impl<C: FnMut() -> i64> Client<'_, C> {
    /// Log one page request and return its triples' bindings for `tp`'s
    /// variables, plus the total count.
    fn request(&mut self, tp: &TriplePattern, page: usize) -> (Vec<Row>, usize) {
        let server_tp = normalize(tp);
        let fragment = self.store.evaluate_fragment(&server_tp, page, self.page_size);
        let mut outputs = MappingSet::new();
        let mut rows = Vec::with_capacity(fragment.triples.len());
        for t in &fragment.triples {
            let mut row = Row::new();
            for pos in [Position::Subject, Position::Object] {
                if let Term::Variable(v) = server_tp.get(pos) {
                    outputs.insert(v, t.get(pos).clone());
                }
                if let Term::Variable(v) = tp.get(pos) {
                    row.insert(v.clone(), t.get(pos).clone());
                }
            }
            rows.push(row);
        }
        self.log.push(LogEntry {
            ip: self.ip.to_owned(),
            ts: (self.clock)(),
            tp: server_tp,
            outputs,
        });
        (rows, fragment.total_count)
    }

    fn request_all(&mut self, tp: &TriplePattern) -> Vec<Row> {
        let (mut rows, total) = self.request(tp, 1);
        let pages = total.div_ceil(self.page_size).max(1);
        for page in 2..=pages {
            rows.extend(self.request(tp, page).0);
        }
        rows
    }

    /// Depth-first nested loop: rows sharing an instance of `order[level]`
    /// are served by one request.
    fn join(&mut self, order: &[&TriplePattern], level: usize, rows: Vec<Row>, out: &mut Vec<Row>) {
        if level == order.len() {
            out.extend(rows);
            return;
        }
        let tp = order[level];
        let mut groups: IndexMap<TriplePattern, Vec<Row>> = IndexMap::new();
        for row in rows {
            groups.entry(tp.substitute(&row)).or_default().push(row);
        }
        for (instance, group) in groups {
            let matches = self.request_all(&instance);
            let mut next = Vec::with_capacity(group.len() * matches.len());
            for row in &group {
                for m in &matches {
                    let mut r = row.clone();
                    r.extend(m.iter().map(|(k, v)| (k.clone(), v.clone())));
                    next.push(r);
                }
            }
            self.join(order, level + 1, next, out);
        }
    }
}

fn validate(query: &Bgp, cfg: &ClientConfig) -> Result<(), ClientError> {
    if query.is_empty() {
        return Err(ClientError::EmptyQuery);
    }
    if let Some(tp) = query.patterns().iter().find(|tp| tp.p.is_variable()) {
        return Err(ClientError::UnboundPredicate(tp.to_string()));
    }
    if cfg.page_size == 0 {
        return Err(ClientError::ZeroPageSize);
    }
    if cfg.clock.step <= 0 {
        return Err(ClientError::NonPositiveStep);
    }
    Ok(())
}

/// Greedy order: next pattern has the most bound positions (constants or
/// variables bound earlier); ties keep query order.
fn bound_first_order(patterns: &[TriplePattern]) -> Vec<usize> {
    let mut bound: Vec<&str> = Vec::new();
    let mut left: Vec<usize> = (0..patterns.len()).collect();
    let mut order = Vec::with_capacity(patterns.len());
    while !left.is_empty() {
        let score = |i: usize| {
            let tp = &patterns[i];
            [&tp.s, &tp.o]
                .iter()
                .filter(|t| t.as_variable().is_none_or(|v| bound.contains(&v)))
                .count()
        };
        let best = left
            .iter()
            .copied()
            .max_by_key(|&i| (score(i), std::cmp::Reverse(i)))
            .unwrap();
        left.retain(|&i| i != best);
        bound.extend(patterns[best].variables());
        order.push(best);
    }
    order
}

fn cross_product_warnings(order: &[&TriplePattern]) -> Vec<String> {
    let mut seen: Vec<&str> = Vec::new();
    let mut warnings = Vec::new();
    for (k, tp) in order.iter().enumerate() {
        let vars = tp.variables();
        if k > 0 && !vars.iter().any(|v| seen.contains(v)) {
            warnings.push(format!(
                "`{tp}` shares no variable with earlier patterns: cross product"
            ));
        }
        seen.extend(vars);
    }
    warnings
}

/// Evaluate `query`, timestamping requests with `cfg.clock`.
pub fn execute_query(store: &Store, query: &Bgp, cfg: &ClientConfig) -> Result<Execution, ClientError> {
    validate(query, cfg)?;
    let Clock { start, step } = cfg.clock;
    let mut next = start;
    execute_query_with_clock(store, query, cfg, move || {
        let ts = next;
        next += step;
        ts
    })
}

/// Evaluate `query`; each request takes its timestamp from `clock`.
pub fn execute_query_with_clock(
    store: &Store,
    query: &Bgp,
    cfg: &ClientConfig,
    clock: impl FnMut() -> i64,
) -> Result<Execution, ClientError> {
    validate(query, cfg)?;
    let patterns = query.patterns();
    let mut client = Client {
        store,
        ip: &cfg.ip,
        page_size: cfg.page_size,
        clock,
        log: Vec::new(),
    };
    let order: Vec<usize> = if cfg.probe_first {
        let counts: Vec<usize> = patterns.iter().map(|tp| client.request(tp, 1).1).collect();
        let mut order: Vec<usize> = (0..patterns.len()).collect();
        order.sort_by_key(|&i| counts[i]);
        order
    } else {
        bound_first_order(patterns)
    };
    let order: Vec<&TriplePattern> = order.iter().map(|&i| &patterns[i]).collect();
    let warnings = cross_product_warnings(&order);
    let mut solutions = Vec::new();
    client.join(&order, 0, vec![Row::new()], &mut solutions);
    Ok(Execution {
        solutions,
        log: client.log,
        warnings,
    })
}
