//! Phase 2: nested-loop join detection.
//!
//! The candidate list is traversed in order. For every output variable of
//! the current node, later in-gap nodes whose input values intersect that
//! variable's outputs are related to it: full inclusion adds an edge as is,
//! partial intersection first splits the later node so that the part
//! injected from the current node becomes a node of its own.
//!
//! A split keeps the original node in place as the remainder and inserts the
//! product right before it, so the product is traversed first. Edges the
//! node already had stay on the remainder, and are dropped once the
//! remainder starts out of their parent's gap.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use indexmap::IndexSet;
use thiserror::Error;

use crate::ctp::{display_mappings, display_pattern, ingap, summarize, ConstituentEntry, Ctp, Gap};
use crate::rdf::{MappingSet, Term, TriplePattern, OBJECT_INPUT, SUBJECT_INPUT};

/// Deduced triple pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dtp {
    pub id: usize,
    /// Candidate this node descends from.
    pub origin_ctp: usize,
    pub ip: String,
    pub ts_min: i64,
    pub ts_max: i64,
    pub template: TriplePattern,
    pub outputs: MappingSet,
    pub inputs: MappingSet,
    pub provenance: Vec<ConstituentEntry>,
}

impl From<Ctp> for Dtp {
    fn from(c: Ctp) -> Self {
        Dtp {
            id: c.id,
            origin_ctp: c.id,
            ip: c.ip,
            ts_min: c.ts_min,
            ts_max: c.ts_max,
            template: c.template,
            outputs: c.outputs,
            inputs: c.inputs,
            provenance: c.provenance,
        }
    }
}

impl Dtp {
    fn rebuild(&mut self, provenance: Vec<ConstituentEntry>) {
        let (ts_min, ts_max, outputs, inputs) = summarize(&provenance);
        self.ts_min = ts_min;
        self.ts_max = ts_max;
        self.outputs = outputs;
        self.inputs = inputs;
        self.provenance = provenance;
    }
}

/// Edge from an outer-loop node to an inner-loop node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DtpEdge {
    pub parent: usize,
    pub child: usize,
    pub parent_var: String,
    pub child_var: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DtpGraph {
    /// Nodes in traversal order; `nodes[i].id == i + 1`.
    pub nodes: Vec<Dtp>,
    pub edges: Vec<DtpEdge>,
    /// `(origin ctp id, dtp id)` for every node descending from a split ctp.
    pub splits: Vec<(usize, usize)>,
}

impl DtpGraph {
    pub fn node(&self, id: usize) -> &Dtp {
        &self.nodes[id - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("input and output values do not intersect")]
    EmptyIntersection,
    #[error("input values are fully included in the output values")]
    FullInclusion,
    #[error("no entry injected from the source falls within the gap")]
    OutOfGap,
}

/// Move out of `target` the entries whose injected value for `target_var`
/// belongs to `source.outputs[source_var]`, returning them as a new node.
/// `target` keeps the remaining entries; both sides get their timestamps
/// and mappings recomputed from their own entries.
pub fn split(target: &mut Dtp, target_var: &str, source: &Dtp, source_var: &str) -> Result<Dtp, SplitError> {
    let empty = IndexSet::new();
    let outputs = source.outputs.get(source_var).unwrap_or(&empty);
    split_on(target, target_var, outputs, source.ts_max, Gap::Unbounded)
}

/// Entries go to the product when their injected value is in `values` and
/// they start within `gap` of `source_ts_max`.
fn split_on(
    target: &mut Dtp,
    target_var: &str,
    values: &IndexSet<Term>,
    source_ts_max: i64,
    gap: Gap,
) -> Result<Dtp, SplitError> {
    let inputs = target.inputs.get(target_var).map(IndexSet::len).unwrap_or(0);
    let shared = target
        .inputs
        .get(target_var)
        .map(|s| s.iter().filter(|v| values.contains(*v)).count())
        .unwrap_or(0);
    if shared == 0 {
        return Err(SplitError::EmptyIntersection);
    }
    if shared == inputs {
        return Err(SplitError::FullInclusion);
    }
    let (taken, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut target.provenance).into_iter().partition(|e| {
        e.injected_value(target_var).is_some_and(|v| values.contains(v)) && ingap(e.ts, source_ts_max, gap)
    });
    if taken.is_empty() {
        target.provenance = kept;
        return Err(SplitError::OutOfGap);
    }
    let mut product = Dtp {
        id: target.id,
        origin_ctp: target.origin_ctp,
        ip: target.ip.clone(),
        ts_min: 0,
        ts_max: 0,
        template: target.template.clone(),
        outputs: MappingSet::new(),
        inputs: MappingSet::new(),
        provenance: Vec::new(),
    };
    product.rebuild(taken);
    target.rebuild(kept);
    Ok(product)
}

// sorted by name, like `MappingSet::sorted_variables`
const INPUT_VARS: [&str; 2] = [OBJECT_INPUT, SUBJECT_INPUT];

struct Slot {
    node: Dtp,
    // ts_min of the originating ctp; non-decreasing along the traversal order
    origin_ts_min: i64,
    // one-hash bloom signature of the input values, per entry of INPUT_VARS
    in_masks: [u128; 2],
    // indexes into the edge list of the edges pointing here
    incoming: Vec<usize>,
}

fn value_bit(t: &Term) -> u128 {
    let mut h = std::hash::DefaultHasher::new();
    t.hash(&mut h);
    1u128 << (h.finish() % 128)
}

fn mask_of<'a>(values: impl IntoIterator<Item = &'a Term>) -> u128 {
    values.into_iter().fold(0, |m, t| m | value_bit(t))
}

impl Slot {
    fn new(node: Dtp, origin_ts_min: i64) -> Self {
        let mut slot = Slot {
            node,
            origin_ts_min,
            in_masks: [0; 2],
            incoming: Vec::new(),
        };
        slot.refresh_masks();
        slot
    }

    fn refresh_masks(&mut self) {
        for (k, var) in INPUT_VARS.iter().enumerate() {
            self.in_masks[k] = self.node.inputs.get(var).map_or(0, mask_of);
        }
    }
}

/// Build the DTP graph from a candidate list.
pub fn nested_loop_detection(ctps: Vec<Ctp>, gap: Gap) -> DtpGraph {
    let mut arena: Vec<Slot> = ctps
        .into_iter()
        .map(|c| {
            let origin_ts_min = c.ts_min;
            Slot::new(Dtp::from(c), origin_ts_min)
        })
        .collect();
    let mut order: Vec<usize> = (0..arena.len()).collect();
    // (parent slot, child slot, parent var, child var, live)
    let mut edges: Vec<(usize, usize, String, String, bool)> = Vec::new();
    let mut split_origins: BTreeSet<usize> = BTreeSet::new();

    let mut i = 0;
    while i < order.len() {
        let src = order[i];
        let src_ts_max = arena[src].node.ts_max;
        let src_vars: Vec<String> = arena[src]
            .node
            .outputs
            .sorted_variables()
            .into_iter()
            .map(str::to_owned)
            .collect();
        for v_o in &src_vars {
            let out_values = arena[src].node.outputs.get(v_o).cloned().unwrap_or_default();
            let out_mask = mask_of(&out_values);
            let mut j = i + 1;
            while j < order.len() {
                if !ingap(arena[order[j]].origin_ts_min, src_ts_max, gap) {
                    break;
                }
                if !ingap(arena[order[j]].node.ts_min, src_ts_max, gap) {
                    j += 1;
                    continue;
                }
                // inputs only ever bind the reserved variables, in name order
                for (k, v_i) in INPUT_VARS.into_iter().enumerate() {
                    let tgt = order[j];
                    if arena[tgt].in_masks[k] & out_mask == 0 {
                        continue;
                    }
                    let Some(in_values) = arena[tgt].node.inputs.get(v_i) else {
                        continue;
                    };
                    let shared = in_values.iter().filter(|v| out_values.contains(*v)).count();
                    if shared == 0 {
                        continue;
                    }
                    if shared == in_values.len() {
                        arena[tgt].incoming.push(edges.len());
                        edges.push((src, tgt, v_o.clone(), v_i.to_owned(), true));
                        continue;
                    }
                    let origin_ts_min = arena[tgt].origin_ts_min;
                    match split_on(&mut arena[tgt].node, v_i, &out_values, src_ts_max, gap) {
                        Ok(product) => {
                            split_origins.insert(product.origin_ctp);
                            arena[tgt].refresh_masks();
                            arena.push(Slot::new(product, origin_ts_min));
                            let p = arena.len() - 1;
                            order.insert(j, p);
                            // earlier edges stay on the remainder while it is still in their gap
                            let tgt_ts_min = arena[tgt].node.ts_min;
                            let mut incoming = std::mem::take(&mut arena[tgt].incoming);
                            incoming.retain(|&k| {
                                let keep = ingap(tgt_ts_min, arena[edges[k].0].node.ts_max, gap);
                                edges[k].4 = keep;
                                keep
                            });
                            arena[tgt].incoming = incoming;
                            arena[p].incoming.push(edges.len());
                            edges.push((src, p, v_o.clone(), v_i.to_owned(), true));
                        }
                        Err(SplitError::OutOfGap) => {}
                        Err(e) => unreachable!("split precondition checked: {e}"),
                    }
                }
                j += 1;
            }
        }
        i += 1;
    }

    let mut id_of = vec![0usize; arena.len()];
    for (pos, &a) in order.iter().enumerate() {
        id_of[a] = pos + 1;
    }
    let mut slots: Vec<Option<Slot>> = arena.into_iter().map(Some).collect();
    let mut nodes = Vec::with_capacity(order.len());
    let mut splits = Vec::new();
    for (pos, &a) in order.iter().enumerate() {
        let mut node = slots[a].take().expect("each slot is placed once").node;
        node.id = pos + 1;
        if split_origins.contains(&node.origin_ctp) {
            splits.push((node.origin_ctp, node.id));
        }
        nodes.push(node);
    }
    let mut edges: Vec<DtpEdge> = edges
        .into_iter()
        .filter(|e| e.4)
        .map(|(p, c, pv, cv, _)| DtpEdge {
            parent: id_of[p],
            child: id_of[c],
            parent_var: pv,
            child_var: cv,
        })
        .collect();
    edges.sort();
    edges.dedup();
    DtpGraph { nodes, edges, splits }
}

/// Text dump: node table, then edges and split relations.
pub fn format_dtp_graph(graph: &DtpGraph) -> String {
    let mut out = String::from("id\tts\ttp\tmu_o\tmu_i\n");
    for d in &graph.nodes {
        let _ = writeln!(
            out,
            "{}\t{},{}\t{}\t{}\t{}",
            d.id,
            d.ts_min,
            d.ts_max,
            display_pattern(&d.template),
            display_mappings(&d.outputs),
            display_mappings(&d.inputs)
        );
    }
    out.push_str("edges:\n");
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "  {} -> {} ({}, {})",
            e.parent,
            e.child,
            crate::ctp::display_var(&e.parent_var),
            crate::ctp::display_var(&e.child_var)
        );
    }
    out.push_str("splits:\n");
    for (c, d) in &graph.splits {
        let _ = writeln!(out, "  split({c},{d})");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctp::ctp_extraction;
    use crate::fixtures::{entry, example_log};
    use crate::log::TpfLog;
    use crate::rdf::{OBJECT_INPUT, SUBJECT_INPUT};

    fn values(m: &MappingSet, var: &str) -> Vec<String> {
        m.get(var)
            .map(|s| s.iter().map(|t| t.to_string()).collect())
            .unwrap_or_default()
    }

    fn edge(parent: usize, child: usize, pv: &str, cv: &str) -> DtpEdge {
        DtpEdge {
            parent,
            child,
            parent_var: pv.into(),
            child_var: cv.into(),
        }
    }

    #[test]
    fn worked_example_graph() {
        let ctps = ctp_extraction(&example_log(), Gap::Ticks(8));
        let g = nested_loop_detection(ctps, Gap::Ticks(8));
        assert_eq!(g.nodes.len(), 5);
        let ranges: Vec<(i64, i64)> = g.nodes.iter().map(|d| (d.ts_min, d.ts_max)).collect();
        assert_eq!(ranges, [(1, 1), (2, 2), (3, 5), (6, 8), (4, 7)]);
        assert_eq!(values(&g.node(3).outputs, "o"), ["a", "b"]);
        assert_eq!(values(&g.node(3).inputs, SUBJECT_INPUT), ["c1", "c2"]);
        assert_eq!(values(&g.node(4).outputs, "o"), ["c", "d"]);
        assert_eq!(values(&g.node(4).inputs, SUBJECT_INPUT), ["c3", "c4"]);
        assert_eq!(g.node(5).origin_ctp, 4);
        assert_eq!(
            g.edges,
            vec![
                edge(1, 3, "s", SUBJECT_INPUT),
                edge(2, 4, "s", SUBJECT_INPUT),
                edge(2, 5, "s", SUBJECT_INPUT),
            ]
        );
        assert_eq!(g.splits, vec![(3, 3), (3, 4)]);
    }

    #[test]
    fn isolated_node() {
        let log = TpfLog::new(vec![entry(1, "?s p ?o", &[("s", &["a"])])]);
        let g = nested_loop_detection(ctp_extraction(&log, Gap::Unbounded), Gap::Unbounded);
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty() && g.splits.is_empty());
    }

    #[test]
    fn full_inclusion_adds_edge_without_split() {
        let log = TpfLog::new(vec![
            entry(1, "?s p toto", &[("s", &["a", "b"])]),
            entry(2, "a q ?o", &[("o", &["x"])]),
            entry(3, "b q ?o", &[("o", &["y"])]),
        ]);
        let g = nested_loop_detection(ctp_extraction(&log, Gap::Unbounded), Gap::Unbounded);
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges, vec![edge(1, 2, "s", SUBJECT_INPUT)]);
        assert!(g.splits.is_empty());
    }

    #[test]
    fn split_remainder_keeps_earlier_parents_in_gap() {
        let log = TpfLog::new(vec![
            entry(1, "?s p ?o", &[("s", &["k"]), ("o", &["a", "b"])]),
            entry(2, "?s t ?o", &[("s", &["k"]), ("o", &["a"])]),
            entry(3, "?s q a", &[("s", &["x"])]),
            entry(6, "?s q b", &[("s", &["y"])]),
            entry(9, "?s q b", &[("s", &["z"])]),
        ]);
        let g = nested_loop_detection(ctp_extraction(&log, Gap::Ticks(4)), Gap::Ticks(4));
        assert_eq!(g.nodes.len(), 4);
        assert_eq!((g.nodes[2].ts_min, g.nodes[3].ts_min), (3, 6));
        // the remainder starts too late for the first parent
        assert_eq!(g.edges, vec![edge(2, 3, "o", OBJECT_INPUT)]);

        let g = nested_loop_detection(ctp_extraction(&log, Gap::Unbounded), Gap::Unbounded);
        assert_eq!(
            g.edges,
            vec![edge(1, 4, "o", OBJECT_INPUT), edge(2, 3, "o", OBJECT_INPUT)]
        );
    }

    #[test]
    fn split_partitions_provenance() {
        let ctps = ctp_extraction(&example_log(), Gap::Ticks(8));
        let source = Dtp::from(ctps[0].clone());
        let mut target = Dtp::from(ctps[2].clone());
        let product = split(&mut target, SUBJECT_INPUT, &source, "s").unwrap();
        assert_eq!((product.ts_min, product.ts_max), (3, 5));
        assert_eq!(values(&product.outputs, "o"), ["a", "b"]);
        assert_eq!((target.ts_min, target.ts_max), (6, 8));
        assert_eq!(values(&target.inputs, SUBJECT_INPUT), ["c3", "c4"]);
    }

    #[test]
    fn split_all_but_one() {
        let log = TpfLog::new(vec![
            entry(1, "?s p toto", &[("s", &["a", "b", "c"])]),
            entry(2, "a q ?o", &[("o", &["x"])]),
            entry(3, "b q ?o", &[("o", &["y"])]),
            entry(4, "c q ?o", &[("o", &["z"])]),
            entry(5, "d q ?o", &[("o", &["w"])]),
        ]);
        let ctps = ctp_extraction(&log, Gap::Unbounded);
        let source = Dtp::from(ctps[0].clone());
        let mut target = Dtp::from(ctps[1].clone());
        let product = split(&mut target, SUBJECT_INPUT, &source, "s").unwrap();
        assert_eq!(product.provenance.len(), 3);
        assert_eq!(target.provenance.len(), 1);
    }

    #[test]
    fn split_contract_violations() {
        let ctps = ctp_extraction(&example_log(), Gap::Ticks(8));
        let source = Dtp::from(ctps[1].clone());
        let mut full = Dtp::from(ctps[3].clone());
        assert_eq!(
            split(&mut full, SUBJECT_INPUT, &source, "s"),
            Err(SplitError::FullInclusion)
        );
        let other = Dtp::from(ctps[0].clone());
        assert_eq!(
            split(&mut full, SUBJECT_INPUT, &other, "s"),
            Err(SplitError::EmptyIntersection)
        );
        assert_eq!(full.provenance.len(), 2);
    }

    #[test]
    fn dump_lists_edges_and_splits() {
        let g = nested_loop_detection(ctp_extraction(&example_log(), Gap::Ticks(8)), Gap::Ticks(8));
        let dump = format_dtp_graph(&g);
        assert!(dump.contains("3\t3,5\t?σ p1 ?o\t?o: a b\t?σ: c1 c2"), "{dump}");
        assert!(dump.contains("2 -> 5 (?s, ?σ)"));
        assert!(dump.contains("split(3,4)"));
    }
}
