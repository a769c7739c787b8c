//! Precision and recall of deduced BGPs against ground-truth queries.
//!
//! Each truth BGP is paired with at most one deduced BGP through a
//! maximum-weight assignment over a truth x deduced score matrix. The score
//! of a pair is the best partial match of truth patterns onto deduced
//! patterns under one consistent variable bijection: most patterns first,
//! then most joins.

use std::collections::HashMap;
use std::fmt::Write as _;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::Serialize;

use crate::bgp::DeducedBgp;
use crate::rdf::{Bgp, JoinEdge, Renaming, Term};

/// Best partial match between one truth and one deduced BGP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairScore {
    pub patterns: usize,
    pub joins: usize,
}

struct PairSearch<'a> {
    truth: &'a Bgp,
    deduced: &'a Bgp,
    assignment: Vec<Option<usize>>,
    used: Vec<bool>,
    best: PairScore,
}

impl PairSearch<'_> {
    fn joins_matched(&self) -> usize {
        self.truth
            .joins()
            .iter()
            .filter(|j| match (self.assignment[j.left], self.assignment[j.right]) {
                (Some(a), Some(b)) => self
                    .deduced
                    .joins()
                    .contains(&JoinEdge::new(a, j.left_pos, b, j.right_pos)),
                _ => false,
            })
            .count()
    }

    fn run(&mut self, i: usize, matched: usize, renaming: &Renaming) {
        let n = self.truth.len();
        if i == n {
            let score = PairScore {
                patterns: matched,
                joins: self.joins_matched(),
            };
            if (score.patterns, score.joins) > (self.best.patterns, self.best.joins) {
                self.best = score;
            }
            return;
        }
        let remaining = n - i;
        let room = self.deduced.len() - matched;
        // a skip can still beat `best` on joins only with as many patterns
        if matched + remaining.min(room) < self.best.patterns {
            return;
        }
        if self.best.patterns == n.min(self.deduced.len()) && self.best.joins == self.truth.joins().len() {
            return;
        }
        let tp = &self.truth.patterns()[i];
        for j in 0..self.deduced.len() {
            if self.used[j] {
                continue;
            }
            if let Some(next) = renaming.unify(tp, &self.deduced.patterns()[j]) {
                self.used[j] = true;
                self.assignment[i] = Some(j);
                self.run(i + 1, matched + 1, &next);
                self.assignment[i] = None;
                self.used[j] = false;
            }
        }
        self.run(i + 1, matched, renaming);
    }
}

/// Exhaustive best partial match of `truth` onto `deduced`.
pub fn pair_score(truth: &Bgp, deduced: &Bgp) -> PairScore {
    let mut search = PairSearch {
        truth,
        deduced,
        assignment: vec![None; truth.len()],
        used: vec![false; deduced.len()],
        best: PairScore::default(),
    };
    search.run(0, 0, &Renaming::default());
    search.best
}

/// Pooled counts behind a set of scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub truth_patterns: usize,
    pub deduced_patterns: usize,
    pub matched_patterns: usize,
    pub truth_joins: usize,
    pub deduced_joins: usize,
    pub matched_joins: usize,
}

impl Counts {
    pub fn scores(&self) -> Scores {
        let (tp_precision, tp_recall, tp_quality) =
            ratios(self.matched_patterns, self.deduced_patterns, self.truth_patterns);
        let (join_precision, join_recall, join_quality) =
            ratios(self.matched_joins, self.deduced_joins, self.truth_joins);
        Scores {
            tp_precision,
            tp_recall,
            tp_quality,
            join_precision,
            join_recall,
            join_quality,
            quality: (tp_quality + join_quality) / 2.0,
        }
    }
}

// 0/0 counts as perfect only when both sides are empty
fn ratios(matched: usize, deduced: usize, truth: usize) -> (f64, f64, f64) {
    if deduced == 0 && truth == 0 {
        return (1.0, 1.0, 1.0);
    }
    let frac = |n: usize, d: usize| if d == 0 { (0, 1) } else { (n, d) };
    let (pn, pd) = frac(matched, deduced);
    let (rn, rd) = frac(matched, truth);
    // quality from the exact fraction, rounded once
    let quality = (pn * rd + rn * pd) as f64 / (2 * pd * rd) as f64;
    (pn as f64 / pd as f64, rn as f64 / rd as f64, quality)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Scores {
    pub tp_precision: f64,
    pub tp_recall: f64,
    pub tp_quality: f64,
    pub join_precision: f64,
    pub join_recall: f64,
    pub join_quality: f64,
    /// Mean of the pattern and join qualities.
    pub quality: f64,
}

impl Scores {
    pub fn all_ones(&self) -> bool {
        [
            self.tp_precision,
            self.tp_recall,
            self.join_precision,
            self.join_recall,
            self.quality,
        ]
        .iter()
        .all(|&v| v == 1.0)
    }

    fn mean(items: &[Scores]) -> Scores {
        if items.is_empty() {
            return Counts::default().scores();
        }
        let n = items.len() as f64;
        let avg = |f: fn(&Scores) -> f64| items.iter().map(f).sum::<f64>() / n;
        Scores {
            tp_precision: avg(|s| s.tp_precision),
            tp_recall: avg(|s| s.tp_recall),
            tp_quality: avg(|s| s.tp_quality),
            join_precision: avg(|s| s.join_precision),
            join_recall: avg(|s| s.join_recall),
            join_quality: avg(|s| s.join_quality),
            quality: avg(|s| s.quality),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryReport {
    /// Index in the de-duplicated truth list.
    pub truth: usize,
    pub query: String,
    /// Assigned deduced BGP, if any pattern matched.
    pub deduced: Option<usize>,
    pub counts: Counts,
    pub scores: Scores,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// Pooled over every pattern and join.
    pub micro: Scores,
    /// Average of the per-query scores.
    #[serde(rename = "macro")]
    pub macro_avg: Scores,
    pub counts: Counts,
    pub per_query: Vec<QueryReport>,
    /// Deduced BGPs assigned to no truth query.
    pub unmatched_deduced: Vec<usize>,
}

impl EvalReport {
    pub fn tp_precision(&self) -> f64 {
        self.micro.tp_precision
    }

    pub fn tp_recall(&self) -> f64 {
        self.micro.tp_recall
    }

    pub fn join_precision(&self) -> f64 {
        self.micro.join_precision
    }

    pub fn join_recall(&self) -> f64 {
        self.micro.join_recall
    }

    pub fn quality(&self) -> f64 {
        self.micro.quality
    }
}

/// Renaming-blind summary; BGPs equal up to renaming share it.
fn shape_key(b: &Bgp) -> Vec<String> {
    let blank = |t: &Term| if t.is_variable() { "?".to_owned() } else { t.to_string() };
    let mut key: Vec<String> = b
        .patterns()
        .iter()
        .map(|tp| format!("{} {} {}", blank(&tp.s), blank(&tp.p), blank(&tp.o)))
        .collect();
    key.sort_unstable();
    key
}

/// Index of the first of every group of BGPs equal up to renaming.
fn distinct_indices(bgps: &[Bgp]) -> Vec<usize> {
    let mut groups: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
    let mut keep = Vec::new();
    for (i, b) in bgps.iter().enumerate() {
        let group = groups.entry(shape_key(b)).or_default();
        if !group.iter().any(|&k| bgps[k].equal_up_to_renaming(b)) {
            group.push(i);
            keep.push(i);
        }
    }
    keep
}

/// Drop queries equal up to renaming to an earlier one.
pub fn dedup_truth(truth: &[Bgp]) -> Vec<Bgp> {
    distinct_indices(truth).into_iter().map(|i| truth[i].clone()).collect()
}

pub fn evaluate(deduced: &[DeducedBgp], truth: &[Bgp]) -> EvalReport {
    let bgps: Vec<Bgp> = deduced.iter().map(|d| d.bgp.clone()).collect();
    evaluate_bgps(&bgps, truth)
}

/// Both sides are taken as sets of BGPs up to renaming. Reported deduced
/// indices point into `deduced` as given.
pub fn evaluate_bgps(deduced_all: &[Bgp], truth: &[Bgp]) -> EvalReport {
    let truth = dedup_truth(truth);
    let keep = distinct_indices(deduced_all);
    let deduced: Vec<&Bgp> = keep.iter().map(|&i| &deduced_all[i]).collect();
    let (n_t, n_d) = (truth.len(), deduced.len());
    let scores: Vec<Vec<PairScore>> = truth
        .iter()
        .map(|t| deduced.iter().map(|d| pair_score(t, d)).collect())
        .collect();
    let assignment = assign(&scores, n_t, n_d);

    let mut counts = Counts {
        deduced_patterns: deduced.iter().map(|d| d.len()).sum(),
        deduced_joins: deduced.iter().map(|d| d.joins().len()).sum(),
        ..Default::default()
    };
    let mut taken = vec![false; n_d];
    let mut per_query = Vec::with_capacity(n_t);
    for (ti, t) in truth.iter().enumerate() {
        let mut c = Counts {
            truth_patterns: t.len(),
            truth_joins: t.joins().len(),
            ..Default::default()
        };
        let assigned = assignment[ti];
        let scores_q = match assigned {
            Some(di) => {
                taken[di] = true;
                let s = scores[ti][di];
                c.deduced_patterns = deduced[di].len();
                c.deduced_joins = deduced[di].joins().len();
                c.matched_patterns = s.patterns;
                c.matched_joins = s.joins;
                c.scores()
            }
            None => Scores::default(),
        };
        counts.truth_patterns += c.truth_patterns;
        counts.truth_joins += c.truth_joins;
        counts.matched_patterns += c.matched_patterns;
        counts.matched_joins += c.matched_joins;
        per_query.push(QueryReport {
            truth: ti,
            query: t.to_string(),
            deduced: assigned.map(|d| keep[d]),
            counts: c,
            scores: scores_q,
        });
    }
    let macro_avg = if n_t == 0 {
        counts.scores()
    } else {
        Scores::mean(&per_query.iter().map(|q| q.scores).collect::<Vec<_>>())
    };
    EvalReport {
        micro: counts.scores(),
        macro_avg,
        counts,
        per_query,
        unmatched_deduced: (0..n_d).filter(|&d| !taken[d]).map(|d| keep[d]).collect(),
    }
}

/// Maximum-weight one-to-one assignment; pairs with no matched pattern
/// count as unassigned. Ties prefer more joins, then lower deduced index.
fn assign(scores: &[Vec<PairScore>], n_t: usize, n_d: usize) -> Vec<Option<usize>> {
    if n_t == 0 || n_d == 0 {
        return vec![None; n_t];
    }
    let max_joins = scores.iter().flatten().map(|s| s.joins).max().unwrap_or(0) as i64;
    let tie_scale = (n_t * (n_d + 1) + 1) as i64;
    let cols = n_d.max(n_t);
    let weights = Matrix::from_fn(n_t, cols, |(t, d)| {
        if d >= n_d {
            return 0;
        }
        let s = scores[t][d];
        if s.patterns == 0 {
            return 0;
        }
        let primary = s.patterns as i64 * (max_joins + 1) + s.joins as i64;
        primary * tie_scale + (n_d - d) as i64
    });
    let (_, cols_for_rows) = kuhn_munkres(&weights);
    cols_for_rows
        .into_iter()
        .enumerate()
        .map(|(t, d)| (d < n_d && scores[t][d].patterns > 0).then_some(d))
        .collect()
}

/// Concurrent extraction evaluated against the union of isolated ones.
pub fn concurrency_resistance(isolated: &[Vec<DeducedBgp>], concurrent: &[DeducedBgp]) -> EvalReport {
    let truth: Vec<Bgp> = isolated.iter().flatten().map(|d| d.bgp.clone()).collect();
    let deduced: Vec<Bgp> = concurrent.iter().map(|d| d.bgp.clone()).collect();
    evaluate_bgps(&deduced, &truth)
}

fn score_row(out: &mut String, label: &str, s: &Scores) {
    let _ = writeln!(
        out,
        "{label:<8} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
        s.tp_precision, s.tp_recall, s.tp_quality, s.join_precision, s.join_recall, s.join_quality, s.quality
    );
}

/// Aligned-column text rendering of a report.
pub fn format_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "", "tpP", "tpR", "tpQ", "joinP", "joinR", "joinQ", "quality"
    );
    score_row(&mut out, "micro", &report.micro);
    score_row(&mut out, "macro", &report.macro_avg);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<6} {:>8} {:>9} {:>9} {:>8}  query",
        "truth", "deduced", "patterns", "joins", "quality"
    );
    for q in &report.per_query {
        let deduced = q.deduced.map_or("-".to_owned(), |d| d.to_string());
        let _ = writeln!(
            out,
            "{:<6} {:>8} {:>9} {:>9} {:>8.4}  {}",
            q.truth,
            deduced,
            format!("{}/{}", q.counts.matched_patterns, q.counts.truth_patterns),
            format!("{}/{}", q.counts.matched_joins, q.counts.truth_joins),
            q.scores.quality,
            q.query
        );
    }
    if !report.unmatched_deduced.is_empty() {
        let list: Vec<String> = report.unmatched_deduced.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "\nunmatched deduced: {}", list.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_query;

    fn q(text: &str) -> Bgp {
        parse_query(&format!("SELECT * WHERE {{ {text} }}")).unwrap()
    }

    fn q1() -> Bgp {
        q(
            "?movie starring ?actor . ?actor label \"Brad Pitt\"@en . ?movie label ?title . \
           ?movie director ?director . ?director label ?name",
        )
    }

    #[test]
    fn missing_pattern_gives_four_fifths() {
        let deduced = q("?m starring ?a . ?a label \"Brad Pitt\"@en . ?m label ?t . ?m director ?d");
        let r = evaluate_bgps(&[deduced], &[q1()]);
        assert_eq!(r.tp_precision(), 1.0);
        assert_eq!(r.tp_recall(), 0.8);
        assert_eq!(r.micro.tp_quality, 0.9);
        assert_eq!(r.join_precision(), 1.0);
        assert_eq!(r.join_recall(), 0.8);
        assert_eq!(r.quality(), 0.9);
        assert_eq!(r.counts.truth_joins, 5);
        assert_eq!(r.macro_avg, r.micro);
    }

    #[test]
    fn identical_sets_score_one() {
        let truth = vec![q1(), q("?x p2 toto . ?x p1 ?y")];
        let r = evaluate_bgps(&truth, &truth);
        assert!(r.micro.all_ones() && r.macro_avg.all_ones());
        assert!(r.unmatched_deduced.is_empty());
        let renamed = vec![q("?a p1 ?b . ?a p2 toto"), q1()];
        assert!(evaluate_bgps(&renamed, &truth).micro.all_ones());
    }

    #[test]
    fn empty_sides() {
        assert!(evaluate_bgps(&[], &[]).micro.all_ones());
        let r = evaluate_bgps(&[], &[q1()]);
        assert_eq!((r.tp_precision(), r.tp_recall()), (0.0, 0.0));
        let r = evaluate_bgps(&[q1()], &[]);
        assert_eq!(r.unmatched_deduced, vec![0]);
        assert_eq!(r.tp_precision(), 0.0);
    }

    #[test]
    fn renaming_must_be_consistent() {
        // ?x and ?y cannot both map to ?a
        let truth = q("?x p ?z . ?y q ?z");
        let deduced = q("?a p ?c . ?a q ?c");
        assert_eq!(pair_score(&truth, &deduced).patterns, 1);
        let split = q("?a p ?c . ?b q ?c");
        assert_eq!(pair_score(&truth, &split), PairScore { patterns: 2, joins: 1 });
    }

    #[test]
    fn noise_lowers_precision_only() {
        let truth = vec![q("?x p2 toto . ?x p1 ?y")];
        let deduced = vec![q("?x p2 toto . ?x p1 ?y"), q("?s p9 ?o")];
        let r = evaluate_bgps(&deduced, &truth);
        assert_eq!(r.tp_recall(), 1.0);
        assert_eq!(r.tp_precision(), 2.0 / 3.0);
        assert_eq!(r.unmatched_deduced, vec![1]);
    }

    #[test]
    fn duplicate_truth_is_collapsed() {
        let truth = vec![q("?x p ?y"), q("?a p ?b")];
        let r = evaluate_bgps(&[q("?s p ?o")], &truth);
        assert_eq!(r.per_query.len(), 1);
        assert!(r.micro.all_ones());
    }

    #[test]
    fn ties_go_to_lower_deduced_index() {
        let truth = vec![q("?x p ?y")];
        let deduced = vec![q("?a p ?b . ?a r c"), q("?c p ?d . ?c r e")];
        let r = evaluate_bgps(&deduced, &truth);
        assert_eq!(r.per_query[0].deduced, Some(0));
        assert_eq!(r.unmatched_deduced, vec![1]);
    }

    #[test]
    fn duplicate_deductions_count_once() {
        let deduced = vec![q("?a r c"), q("?a p ?b"), q("?c p ?d")];
        let r = evaluate_bgps(&deduced, &[q("?x p ?y")]);
        assert_eq!(r.per_query[0].deduced, Some(1));
        assert_eq!(r.unmatched_deduced, vec![0]);
        assert_eq!(r.counts.deduced_patterns, 2);
    }

    #[test]
    fn assignment_is_global() {
        // greedy would give deduced 0 to truth 0 and leave truth 1 empty
        let truth = vec![q("?x p ?y"), q("?x p ?y . ?y q ?z")];
        let deduced = vec![q("?a p ?b . ?b q ?c"), q("?a p ?b")];
        let r = evaluate_bgps(&deduced, &truth);
        assert_eq!(r.per_query[0].deduced, Some(1));
        assert_eq!(r.per_query[1].deduced, Some(0));
        assert!(r.micro.all_ones());
    }

    #[test]
    fn interleaving_the_example_is_harmless() {
        use crate::fixtures::example_log;
        use crate::log::TpfLog;
        use crate::pipeline::{lift, GapSpec, LiftConfig};

        let cfg = LiftConfig::with_gap(GapSpec::Ticks(8));
        let (q3, q4): (Vec<_>, Vec<_>) = example_log()
            .into_entries()
            .into_iter()
            .partition(|e| [1, 3, 5].contains(&e.ts));
        let isolated = vec![
            lift(&TpfLog::new(q3), &cfg).unwrap(),
            lift(&TpfLog::new(q4), &cfg).unwrap(),
        ];
        let concurrent = lift(&example_log(), &cfg).unwrap();
        assert!(concurrency_resistance(&isolated, &concurrent).micro.all_ones());
        assert!(concurrency_resistance(&isolated[..1], &isolated[0]).micro.all_ones());
    }

    #[test]
    fn shared_template_at_small_gap_hurts_recall() {
        use crate::fixtures::entry;
        use crate::log::TpfLog;
        use crate::pipeline::{lift, GapSpec, LiftConfig};

        // two clients run ?x p2 toto . ?x p1 ?y, interleaved
        let a = vec![
            entry(1, "?s p2 toto", &[("s", &["c1"])]),
            entry(3, "c1 p1 ?o", &[("o", &["a"])]),
        ];
        let b = vec![
            entry(2, "?s p2 titi", &[("s", &["c2"])]),
            entry(6, "c2 p1 ?o", &[("o", &["b"])]),
        ];
        let cfg = LiftConfig::with_gap(GapSpec::Ticks(3));
        let isolated = vec![
            lift(&TpfLog::new(a.clone()), &LiftConfig::with_gap(GapSpec::Unbounded)).unwrap(),
            lift(&TpfLog::new(b.clone()), &LiftConfig::with_gap(GapSpec::Unbounded)).unwrap(),
        ];
        let concurrent = lift(&TpfLog::new([a, b].concat()), &cfg).unwrap();
        let r = concurrency_resistance(&isolated, &concurrent);
        // c2 p1 ?o joins the c1 p1 ?o candidate (distance 3) but sits 4
        // ticks after its own source, so that join is lost
        assert!(r.tp_recall() < 1.0, "{}", format_report(&r));
    }

    #[test]
    fn report_table_lists_queries() {
        let r = evaluate_bgps(&[q1()], &[q1()]);
        let text = format_report(&r);
        assert!(text.contains("micro"));
        assert!(text.contains("5/5"));
    }
}
