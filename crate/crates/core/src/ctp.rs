//! Phase 1: aggregate log entries into candidate triple patterns.
//!
//! Entries are read in log order. Each one is templated (bound subject and
//! object replaced by reserved variables) and merged into the latest
//! candidate with the same ip and template when the time gap allows it;
//! otherwise it opens a new candidate.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::log::{LogEntry, TpfLog};
use crate::rdf::{template_of, MappingSet, TriplePattern, OBJECT_INPUT, SUBJECT_INPUT};

/// Maximal time distance between related requests, in log time units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gap {
    Unbounded,
    Ticks(i64),
}

impl Gap {
    /// Whether a distance `later_min - earlier_max` fits in the gap.
    /// Negative distances (overlapping ranges) always fit.
    pub fn allows(self, distance: i64) -> bool {
        match self {
            Gap::Unbounded => true,
            Gap::Ticks(g) => distance <= g,
        }
    }
}

/// `later` starts at most `gap` after `earlier` ends.
pub fn ingap(later_ts_min: i64, earlier_ts_max: i64, gap: Gap) -> bool {
    gap.allows(later_ts_min.saturating_sub(earlier_ts_max))
}

/// One log entry as seen by a candidate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstituentEntry {
    /// Index of the entry in the analysed log.
    pub log_index: usize,
    pub ts: i64,
    /// Constants replaced by reserved variables (one value per variable).
    pub injected: MappingSet,
    pub outputs: MappingSet,
}

impl ConstituentEntry {
    pub fn injected_value(&self, var: &str) -> Option<&crate::rdf::Term> {
        self.injected.get(var).and_then(|s| s.first())
    }
}

/// Candidate triple pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ctp {
    pub id: usize,
    pub ip: String,
    pub ts_min: i64,
    pub ts_max: i64,
    pub template: TriplePattern,
    pub outputs: MappingSet,
    pub inputs: MappingSet,
    pub provenance: Vec<ConstituentEntry>,
}

impl Ctp {
    fn open(id: usize, ip: String, template: TriplePattern, first: ConstituentEntry) -> Self {
        Ctp {
            id,
            ip,
            ts_min: first.ts,
            ts_max: first.ts,
            template,
            outputs: first.outputs.clone(),
            inputs: first.injected.clone(),
            provenance: vec![first],
        }
    }

    fn absorb(&mut self, entry: ConstituentEntry) {
        self.outputs.union_with(&entry.outputs);
        self.inputs.union_with(&entry.injected);
        // only the upper bound moves
        self.ts_max = self.ts_max.max(entry.ts);
        self.provenance.push(entry);
    }
}

/// Aggregated bounds and mappings of a group of constituent entries.
pub(crate) fn summarize(entries: &[ConstituentEntry]) -> (i64, i64, MappingSet, MappingSet) {
    let mut ts_min = i64::MAX;
    let mut ts_max = i64::MIN;
    let mut outputs = MappingSet::new();
    let mut inputs = MappingSet::new();
    for e in entries {
        ts_min = ts_min.min(e.ts);
        ts_max = ts_max.max(e.ts);
        outputs.union_with(&e.outputs);
        inputs.union_with(&e.injected);
    }
    (ts_min, ts_max, outputs, inputs)
}

/// Candidate extraction over a whole log.
pub fn ctp_extraction(log: &TpfLog, gap: Gap) -> Vec<Ctp> {
    extract_ctps(log.entries().iter().enumerate(), gap)
}

/// Candidate extraction over `(log index, entry)` pairs given in log order.
/// Entries with an unbound predicate are skipped.
pub fn extract_ctps<'a>(entries: impl IntoIterator<Item = (usize, &'a LogEntry)>, gap: Gap) -> Vec<Ctp> {
    let mut ctps: Vec<Ctp> = Vec::new();
    // latest candidate per (ip, template); older ones can never be in gap
    // when this one is not, because entries arrive in timestamp order
    let mut latest: HashMap<(String, TriplePattern), usize> = HashMap::new();
    for (log_index, entry) in entries {
        let Ok((template, injected)) = template_of(&entry.tp) else {
            continue;
        };
        let constituent = ConstituentEntry {
            log_index,
            ts: entry.ts,
            injected,
            outputs: entry.outputs.clone(),
        };
        let key = (entry.ip.clone(), template);
        match latest.get(&key) {
            Some(&idx) if ingap(entry.ts, ctps[idx].ts_max, gap) => ctps[idx].absorb(constituent),
            _ => {
                let id = ctps.len() + 1;
                latest.insert(key.clone(), ctps.len());
                ctps.push(Ctp::open(id, key.0, key.1, constituent));
            }
        }
    }
    ctps
}

pub(crate) fn display_var(name: &str) -> String {
    match name {
        SUBJECT_INPUT => "?σ".to_owned(),
        OBJECT_INPUT => "?ω".to_owned(),
        other => format!("?{other}"),
    }
}

pub(crate) fn display_pattern(tp: &TriplePattern) -> String {
    let show = |t: &crate::rdf::Term| match t.as_variable() {
        Some(v) => display_var(v),
        None => t.to_string(),
    };
    format!("{} {} {}", show(&tp.s), show(&tp.p), show(&tp.o))
}

pub(crate) fn display_mappings(m: &MappingSet) -> String {
    let mut out = String::new();
    for (i, (var, values)) in m.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "{}:", display_var(var));
        for v in values {
            let _ = write!(out, " {v}");
        }
    }
    out
}

/// Text table of candidates: id, ts range, template, outputs, inputs.
pub fn format_ctp_table(ctps: &[Ctp]) -> String {
    let mut out = String::from("id\tts\ttp\tmu_o\tmu_i\n");
    for c in ctps {
        let _ = writeln!(
            out,
            "{}\t{},{}\t{}\t{}\t{}",
            c.id,
            c.ts_min,
            c.ts_max,
            display_pattern(&c.template),
            display_mappings(&c.outputs),
            display_mappings(&c.inputs)
        );
    }
    out
}
