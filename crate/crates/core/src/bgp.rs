//! Phase 3: turn connected components of the DTP graph into BGPs.
//!
//! Reserved variables holding a single injected value get that constant
//! back, unless an edge joins through them. Every other variable receives a
//! fresh `?s_k` / `?o_k` name, shared by all positions linked through edge
//! labels.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::dtp::{DtpEdge, DtpGraph};
use crate::rdf::{is_reserved, Bgp, JoinEdge, Position, Term, TriplePattern};

/// A BGP deduced from one connected component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeducedBgp {
    pub bgp: Bgp,
    /// One entry per DTP edge inside the component, as pattern positions.
    pub detected_joins: Vec<JoinEdge>,
    /// Contributing dtp ids, ascending.
    pub support: Vec<usize>,
    /// Per pattern of `bgp`, the dtp ids rendered as that pattern.
    pub pattern_support: Vec<Vec<usize>>,
    /// Per pattern of `bgp`, the hull of its dtps' time ranges.
    pub pattern_windows: Vec<(i64, i64)>,
    pub window_start: i64,
    pub window_end: i64,
}

impl DeducedBgp {
    /// Assemble from patterns (possibly repeated) with their join edges,
    /// supports and windows; repeated patterns are merged.
    pub fn from_parts(
        patterns: Vec<TriplePattern>,
        joins: Vec<JoinEdge>,
        supports: Vec<Vec<usize>>,
        windows: Vec<(i64, i64)>,
    ) -> Self {
        debug_assert_eq!(patterns.len(), supports.len());
        debug_assert_eq!(patterns.len(), windows.len());
        let mut unique: Vec<TriplePattern> = Vec::new();
        let mut pattern_support: Vec<Vec<usize>> = Vec::new();
        let mut pattern_windows: Vec<(i64, i64)> = Vec::new();
        let mut index: HashMap<TriplePattern, usize> = HashMap::new();
        let mut remap = Vec::with_capacity(patterns.len());
        for ((tp, sup), win) in patterns.into_iter().zip(supports).zip(windows) {
            match index.get(&tp).copied() {
                Some(k) => {
                    pattern_support[k].extend(sup);
                    let w = &mut pattern_windows[k];
                    *w = (w.0.min(win.0), w.1.max(win.1));
                    remap.push(k);
                }
                None => {
                    remap.push(unique.len());
                    index.insert(tp.clone(), unique.len());
                    unique.push(tp);
                    pattern_support.push(sup);
                    pattern_windows.push(win);
                }
            }
        }
        for s in &mut pattern_support {
            s.sort_unstable();
            s.dedup();
        }
        let detected_joins = joins
            .into_iter()
            .filter_map(|j| {
                let (a, b) = (remap[j.left], remap[j.right]);
                (a != b).then(|| JoinEdge::new(a, j.left_pos, b, j.right_pos))
            })
            .collect();
        let mut support: Vec<usize> = pattern_support.iter().flatten().copied().collect();
        support.sort_unstable();
        support.dedup();
        let window_start = pattern_windows.iter().map(|w| w.0).min().unwrap_or(0);
        let window_end = pattern_windows.iter().map(|w| w.1).max().unwrap_or(0);
        DeducedBgp {
            bgp: Bgp::new(unique),
            detected_joins,
            support,
            pattern_support,
            pattern_windows,
            window_start,
            window_end,
        }
    }

    /// Shift dtp ids and fresh-variable numbers, used when results of
    /// independent work units are concatenated.
    pub(crate) fn offset(&self, dtp_offset: usize, var_offset: usize) -> DeducedBgp {
        let shift = |t: &Term| match t {
            Term::Variable(v) => match parse_fresh(v) {
                Some((prefix, k)) => Term::var(format!("{prefix}_{}", k + var_offset)),
                None => t.clone(),
            },
            other => other.clone(),
        };
        let patterns: Vec<TriplePattern> = self
            .bgp
            .patterns()
            .iter()
            .map(|tp| TriplePattern::new(shift(&tp.s), shift(&tp.p), shift(&tp.o)))
            .collect();
        let supports = self
            .pattern_support
            .iter()
            .map(|s| s.iter().map(|d| d + dtp_offset).collect())
            .collect();
        DeducedBgp::from_parts(
            patterns,
            self.detected_joins.clone(),
            supports,
            self.pattern_windows.clone(),
        )
    }
}

/// `s_12` -> `("s", 12)`.
pub(crate) fn parse_fresh(name: &str) -> Option<(&str, usize)> {
    let (prefix, k) = name.rsplit_once('_')?;
    if prefix != "s" && prefix != "o" {
        return None;
    }
    k.parse().ok().map(|k| (prefix, k))
}

/// Largest fresh-variable number used in `bgps` (0 if none).
pub(crate) fn max_fresh(bgps: &[DeducedBgp]) -> usize {
    bgps.iter()
        .flat_map(|b| b.bgp.patterns())
        .flat_map(|tp| [&tp.s, &tp.o])
        .filter_map(|t| t.as_variable().and_then(parse_fresh).map(|(_, k)| k))
        .max()
        .unwrap_or(0)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so representatives are deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Number of fresh variables a BGP list uses, i.e. the next free offset.
pub fn fresh_count(bgps: &[DeducedBgp]) -> usize {
    max_fresh(bgps)
}

/// One deduced BGP per connected component of the graph.
pub fn extract_bgps(graph: &DtpGraph) -> Vec<DeducedBgp> {
    let n = graph.nodes.len();
    let mut components = UnionFind::new(n);
    for e in &graph.edges {
        components.union(e.parent - 1, e.child - 1);
    }

    // variable slots: (node index, variable name)
    let mut slot_ids: HashMap<(usize, &str), usize> = HashMap::new();
    for (idx, d) in graph.nodes.iter().enumerate() {
        for v in d.template.variables() {
            let next = slot_ids.len();
            slot_ids.entry((idx, v)).or_insert(next);
        }
    }
    let mut classes = UnionFind::new(slot_ids.len());
    let mut joined = vec![false; slot_ids.len()];
    for e in &graph.edges {
        let a = slot_ids[&(e.parent - 1, e.parent_var.as_str())];
        let b = slot_ids[&(e.child - 1, e.child_var.as_str())];
        joined[a] = true;
        joined[b] = true;
        classes.union(a, b);
    }

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for idx in 0..n {
        let root = components.find(idx);
        members.entry(root).or_default().push(idx);
    }

    let mut edges_of: HashMap<usize, Vec<&DtpEdge>> = HashMap::new();
    for e in &graph.edges {
        let root = components.find(e.parent - 1);
        edges_of.entry(root).or_default().push(e);
    }

    let mut names: HashMap<usize, String> = HashMap::new();
    let mut counter = 0usize;
    let mut out = Vec::with_capacity(members.len());
    for nodes in members.values() {
        let mut patterns = Vec::with_capacity(nodes.len());
        let mut supports = Vec::with_capacity(nodes.len());
        let mut windows = Vec::with_capacity(nodes.len());
        let mut local: HashMap<usize, usize> = HashMap::new();
        for &idx in nodes {
            let d = &graph.nodes[idx];
            let mut render = |term: &Term, pos: Position| -> Term {
                let Term::Variable(v) = term else {
                    return term.clone();
                };
                let slot = slot_ids[&(idx, v.as_str())];
                if is_reserved(v) && !joined[slot] {
                    let values = d.inputs.get(v).expect("reserved variable always has inputs");
                    assert!(!values.is_empty(), "reserved variable without input values");
                    if values.len() == 1 {
                        return values[0].clone();
                    }
                }
                let class = classes.find(slot);
                let name = names.entry(class).or_insert_with(|| {
                    counter += 1;
                    match pos {
                        Position::Subject => format!("s_{counter}"),
                        Position::Object => format!("o_{counter}"),
                    }
                });
                Term::var(name.clone())
            };
            let s = render(&d.template.s, Position::Subject);
            let o = render(&d.template.o, Position::Object);
            local.insert(d.id, patterns.len());
            patterns.push(TriplePattern::new(s, d.template.p.clone(), o));
            supports.push(vec![d.id]);
            windows.push((d.ts_min, d.ts_max));
        }
        let joins = edges_of
            .remove(&components.find(nodes[0]))
            .unwrap_or_default()
            .into_iter()
            .filter_map(|e| {
                let a = *local.get(&e.parent)?;
                let b = *local.get(&e.child)?;
                let pa = graph.node(e.parent).template.position_of(&e.parent_var)?;
                let pb = graph.node(e.child).template.position_of(&e.child_var)?;
                Some(JoinEdge::new(a, pa, b, pb))
            })
            .collect();
        out.push(DeducedBgp::from_parts(patterns, joins, supports, windows));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Shape<'a> {
    Var,
    Const(&'a Term),
}

fn shape(t: &Term) -> Shape<'_> {
    match t {
        Term::Variable(_) => Shape::Var,
        other => Shape::Const(other),
    }
}

fn same_shape(a: &TriplePattern, b: &TriplePattern) -> bool {
    a.p == b.p && shape(&a.s) == shape(&b.s) && shape(&a.o) == shape(&b.o)
}

fn is_self_join(bgp: &DeducedBgp, j: &JoinEdge) -> bool {
    let p = bgp.bgp.patterns();
    same_shape(&p[j.left], &p[j.right])
}

/// Drop BGPs made only of self-joins between identically shaped patterns;
/// in mixed BGPs drop just those joins and split what falls apart.
pub fn filter_self_joins(bgps: &[DeducedBgp]) -> Vec<DeducedBgp> {
    let mut next_fresh = max_fresh(bgps);
    let mut out = Vec::with_capacity(bgps.len());
    for b in bgps {
        let (self_joins, kept): (Vec<JoinEdge>, Vec<JoinEdge>) =
            b.detected_joins.iter().partition(|j| is_self_join(b, j));
        if self_joins.is_empty() {
            out.push(b.clone());
        } else if kept.is_empty() {
            continue;
        } else {
            out.extend(rebuild_without(b, &kept, &mut next_fresh));
        }
    }
    out
}

/// Rebuild `b` keeping only `joins`: variables are re-separated where no
/// remaining join links them and disconnected parts become separate BGPs.
fn rebuild_without(b: &DeducedBgp, joins: &[JoinEdge], next_fresh: &mut usize) -> Vec<DeducedBgp> {
    let patterns = b.bgp.patterns();
    let n = patterns.len();
    // slots: 2 * pattern + (0 subject | 1 object)
    let slot = |i: usize, pos: Position| 2 * i + usize::from(pos == Position::Object);
    let mut classes = UnionFind::new(2 * n);
    let mut components = UnionFind::new(n);
    for (i, tp) in patterns.iter().enumerate() {
        if tp.s.is_variable() && tp.s == tp.o {
            classes.union(slot(i, Position::Subject), slot(i, Position::Object));
        }
    }
    for j in joins {
        classes.union(slot(j.left, j.left_pos), slot(j.right, j.right_pos));
        components.union(j.left, j.right);
    }
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut taken: Vec<String> = Vec::new();
    let mut renamed: Vec<TriplePattern> = Vec::with_capacity(n);
    for (i, tp) in patterns.iter().enumerate() {
        let mut tp = tp.clone();
        for pos in [Position::Subject, Position::Object] {
            let Term::Variable(v) = tp.get(pos).clone() else {
                continue;
            };
            let class = classes.find(slot(i, pos));
            let name = names
                .entry(class)
                .or_insert_with(|| {
                    if taken.contains(&v) {
                        *next_fresh += 1;
                        let prefix = if pos == Position::Subject { "s" } else { "o" };
                        format!("{prefix}_{next_fresh}")
                    } else {
                        taken.push(v.clone());
                        v.clone()
                    }
                })
                .clone();
            *tp.get_mut(pos) = Term::var(name);
        }
        renamed.push(tp);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = components.find(i);
        groups.entry(root).or_default().push(i);
    }
    groups
        .values()
        .map(|members| {
            let local: HashMap<usize, usize> = members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            let group_joins = joins
                .iter()
                .filter_map(|j| {
                    Some(JoinEdge::new(
                        *local.get(&j.left)?,
                        j.left_pos,
                        *local.get(&j.right)?,
                        j.right_pos,
                    ))
                })
                .collect();
            DeducedBgp::from_parts(
                members.iter().map(|&i| renamed[i].clone()).collect(),
                group_joins,
                members.iter().map(|&i| b.pattern_support[i].clone()).collect(),
                members.iter().map(|&i| b.pattern_windows[i]).collect(),
            )
        })
        .collect()
}

/// Join-type and frequency summary of deduced BGPs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BgpStats {
    pub bgps: usize,
    pub patterns: usize,
    pub joins: usize,
    pub subject_subject: usize,
    pub subject_object: usize,
    pub object_object: usize,
    /// BGP size (patterns) -> number of BGPs.
    pub sizes: BTreeMap<usize, usize>,
    /// Predicate -> number of patterns using it.
    pub predicates: BTreeMap<String, usize>,
}

pub fn bgp_stats(bgps: &[DeducedBgp]) -> BgpStats {
    let mut stats = BgpStats {
        bgps: bgps.len(),
        ..Default::default()
    };
    for b in bgps {
        stats.patterns += b.bgp.len();
        *stats.sizes.entry(b.bgp.len()).or_default() += 1;
        for tp in b.bgp.patterns() {
            *stats.predicates.entry(tp.p.to_string()).or_default() += 1;
        }
        for j in &b.detected_joins {
            stats.joins += 1;
            match (j.left_pos, j.right_pos) {
                (Position::Subject, Position::Subject) => stats.subject_subject += 1,
                (Position::Object, Position::Object) => stats.object_object += 1,
                _ => stats.subject_object += 1,
            }
        }
    }
    stats
}

pub fn format_stats(stats: &BgpStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("bgps             {}\n", stats.bgps));
    out.push_str(&format!("patterns         {}\n", stats.patterns));
    out.push_str(&format!("joins            {}\n", stats.joins));
    out.push_str(&format!("subject-subject  {}\n", stats.subject_subject));
    out.push_str(&format!("subject-object   {}\n", stats.subject_object));
    out.push_str(&format!("object-object    {}\n", stats.object_object));
    out.push_str("sizes\n");
    for (size, count) in &stats.sizes {
        out.push_str(&format!("  {size:>4}  {count}\n"));
    }
    out.push_str("predicates\n");
    let mut preds: Vec<(&String, &usize)> = stats.predicates.iter().collect();
    preds.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    for (p, count) in preds {
        out.push_str(&format!("  {count:>6}  {p}\n"));
    }
    out
}
