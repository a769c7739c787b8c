//! Randomized checks over generated stores, queries and logs. Shared by
//! the `properties` test target and the acceptance runner of the CLI.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use lift_core::bgp::{extract_bgps, filter_self_joins};
use lift_core::client::{execute_query, ClientConfig, Clock};
use lift_core::ctp::{ctp_extraction, ingap, Gap};
use lift_core::dtp::{format_dtp_graph, nested_loop_detection};
use lift_core::metrics::{evaluate, evaluate_bgps};
use lift_core::pipeline::{lift, GapSpec, LiftConfig};
use lift_core::rdf::{patterns_equal_up_to_renaming, template_of, MappingSet};
use lift_core::{
    parse_log, shuffle_logs, write_log, Bgp, Exec, LogEntry, ShufflePolicy, Store, Term, TpfLog, Triple, TriplePattern,
};
use proptest::prelude::*;
use proptest::sample::select;

pub const CASES: u32 = 256;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(CASES)
    }
}

// small vocabularies so that patterns share values often

fn entity() -> impl Strategy<Value = Term> {
    (0..5u8).prop_map(|i| Term::iri(format!("e{i}")))
}

fn object() -> impl Strategy<Value = Term> {
    prop_oneof![
        4 => entity(),
        1 => select(vec!["a", "b c"]).prop_map(Term::literal),
        1 => select(vec!["a", "x\"y"]).prop_map(|s| Term::lang_literal(s, "en")),
    ]
}

fn predicate() -> impl Strategy<Value = Term> {
    (0..3u8).prop_map(|i| Term::iri(format!("p{i}")))
}

fn triple() -> impl Strategy<Value = Triple> {
    (entity(), predicate(), object()).prop_map(|(s, p, o)| Triple::new(s, p, o).unwrap())
}

fn store() -> impl Strategy<Value = Store> {
    prop::collection::vec(triple(), 0..30).prop_map(Store::from_triples)
}

fn var() -> impl Strategy<Value = Term> {
    select(vec!["x", "y", "z"]).prop_map(Term::var)
}

fn pattern() -> impl Strategy<Value = TriplePattern> {
    (
        prop_oneof![3 => var(), 1 => entity()],
        predicate(),
        prop_oneof![3 => var(), 1 => object()],
    )
        .prop_map(|(s, p, o)| TriplePattern::new(s, p, o))
}

fn query() -> impl Strategy<Value = Bgp> {
    prop::collection::vec(pattern(), 1..4).prop_map(Bgp::new)
}

/// Logs of real client runs, interleaved and spread over a few ips.
fn client_log() -> impl Strategy<Value = TpfLog> {
    (
        store(),
        prop::collection::vec(query(), 1..4),
        any::<u64>(),
        any::<bool>(),
        1..4usize,
        1..3u8,
    )
        .prop_map(|(store, queries, seed, probe_first, page_size, ips)| {
            let logs: Vec<TpfLog> = queries
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    let cfg = ClientConfig {
                        ip: format!("10.0.0.{}", i as u8 % ips),
                        probe_first,
                        page_size,
                        clock: Clock { start: 0, step: 1 },
                    };
                    TpfLog::new(execute_query(&store, q, &cfg).unwrap().log)
                })
                .collect();
            shuffle_logs(&logs, &ShufflePolicy::random(seed))
        })
}

fn gap() -> impl Strategy<Value = Gap> {
    prop_oneof![(1..12i64).prop_map(Gap::Ticks), Just(Gap::Unbounded)]
}

fn rows_of(rows: &[HashMap<String, Term>]) -> Vec<BTreeMap<String, Term>> {
    let mut v: Vec<_> = rows.iter().map(|r| r.clone().into_iter().collect()).collect();
    v.sort();
    v
}

/// Every solution of `q` over `store`, by scanning all triples per pattern.
fn brute_force(store: &Store, q: &Bgp) -> Vec<BTreeMap<String, Term>> {
    fn go(store: &Store, pats: &[TriplePattern], row: BTreeMap<String, Term>, out: &mut Vec<BTreeMap<String, Term>>) {
        let Some((tp, rest)) = pats.split_first() else {
            out.push(row);
            return;
        };
        'triples: for t in store.triples() {
            let mut r = row.clone();
            for (pt, tt) in [(&tp.s, &t.s), (&tp.p, &t.p), (&tp.o, &t.o)] {
                match pt {
                    Term::Variable(v) => match r.get(v) {
                        Some(bound) if bound != tt => continue 'triples,
                        Some(_) => {}
                        None => {
                            r.insert(v.clone(), tt.clone());
                        }
                    },
                    c if c != tt => continue 'triples,
                    _ => {}
                }
            }
            go(store, rest, r, out);
        }
    }
    let mut out = Vec::new();
    go(store, q.patterns(), BTreeMap::new(), &mut out);
    out.sort();
    out
}

fn dump(log: &TpfLog) -> String {
    let mut buf = Vec::new();
    write_log(&mut buf, log).unwrap();
    String::from_utf8(buf).unwrap()
}

fn rename(q: &Bgp, suffix: &str) -> Bgp {
    let mut row = HashMap::new();
    for tp in q.patterns() {
        for v in tp.variables() {
            row.insert(v.to_owned(), Term::var(format!("{v}{suffix}")));
        }
    }
    Bgp::new(q.patterns().iter().map(|tp| tp.substitute(&row)))
}

pub fn template_is_idempotent() {
    proptest!(cfg(), |(tp in pattern())| {
        let (t, _) = template_of(&tp).unwrap();
        let (again, seeds) = template_of(&t).unwrap();
        prop_assert_eq!(again, t);
        prop_assert!(seeds.is_empty());
    });
}

pub fn renaming_equivalence_is_an_equivalence() {
    proptest!(cfg(), |(a in query(), b in query(), c in query())| {
        prop_assert!(patterns_equal_up_to_renaming(&a, &a));
        prop_assert!(patterns_equal_up_to_renaming(&a, &rename(&a, "_r")));
        prop_assert_eq!(patterns_equal_up_to_renaming(&a, &b), patterns_equal_up_to_renaming(&b, &a));
        if patterns_equal_up_to_renaming(&a, &b) && patterns_equal_up_to_renaming(&b, &c) {
            prop_assert!(patterns_equal_up_to_renaming(&a, &c));
        }
    });
}

pub fn pages_partition_the_matches() {
    proptest!(cfg(), |(store in store(), tp in pattern(), size in 1..6usize)| {
        let all: Vec<&Triple> = store.matches(&tp).collect();
        let first = store.evaluate_fragment(&tp, 1, size);
        prop_assert_eq!(first.total_count, store.triples().iter().filter(|t| tp.matches(t)).count());
        let mut paged = Vec::new();
        for page in 1..=first.page_count() {
            let f = store.evaluate_fragment(&tp, page, size);
            prop_assert!(f.triples.len() <= size);
            paged.extend(f.triples);
        }
        prop_assert_eq!(paged.iter().collect::<Vec<_>>(), all);
        let distinct: BTreeSet<&Triple> = paged.iter().collect();
        prop_assert_eq!(distinct.len(), paged.len());
    });
}

pub fn solutions_match_brute_force() {
    proptest!(cfg(), |(store in store(), q in query(), probe in any::<bool>(), size in 1..4usize)| {
        let cfg = ClientConfig { probe_first: probe, page_size: size, ..Default::default() };
        let exec = execute_query(&store, &q, &cfg).unwrap();
        prop_assert_eq!(rows_of(&exec.solutions), brute_force(&store, &q));
    });
}

pub fn shuffle_conserves_and_keeps_order() {
    proptest!(cfg(), |(logs in prop::collection::vec(client_log(), 1..4), seed in any::<u64>(), round_robin in any::<bool>())| {
        // one ip per source so each can be traced through the merge
        let logs: Vec<TpfLog> = logs
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                TpfLog::new(l.into_entries().into_iter().map(|mut e| { e.ip = format!("src{i}"); e }).collect())
            })
            .collect();
        let policy = if round_robin { ShufflePolicy::round_robin() } else { ShufflePolicy::random(seed) };
        let merged = shuffle_logs(&logs, &policy);
        prop_assert_eq!(merged.len(), logs.iter().map(TpfLog::len).sum::<usize>());
        prop_assert!(merged.entries().windows(2).all(|w| w[0].ts <= w[1].ts));
        for (i, l) in logs.iter().enumerate() {
            let ip = format!("src{i}");
            let got: Vec<(&TriplePattern, &MappingSet)> =
                merged.entries().iter().filter(|e| e.ip == ip).map(|e| (&e.tp, &e.outputs)).collect();
            let want: Vec<(&TriplePattern, &MappingSet)> = l.entries().iter().map(|e| (&e.tp, &e.outputs)).collect();
            prop_assert_eq!(got, want);
        }
    });
}

pub fn ctps_partition_the_log() {
    proptest!(cfg(), |(log in client_log(), g in gap())| {
        let ctps = ctp_extraction(&log, g);
        let mut seen: Vec<usize> = ctps.iter().flat_map(|c| c.provenance.iter().map(|e| e.log_index)).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..log.len()).collect::<Vec<_>>());
        for c in &ctps {
            for e in &c.provenance {
                let entry = &log.entries()[e.log_index];
                prop_assert_eq!(&entry.ip, &c.ip);
                prop_assert_eq!(&template_of(&entry.tp).unwrap().0, &c.template);
            }
        }
        if g == Gap::Unbounded {
            let keys: BTreeSet<(String, String)> = ctps.iter().map(|c| (c.ip.clone(), c.template.to_string())).collect();
            prop_assert_eq!(keys.len(), ctps.len());
        }
    });
}

pub fn fewer_ctps_as_the_gap_grows() {
    proptest!(cfg(), |(log in client_log())| {
        let counts: Vec<usize> = [1, 2, 3, 5, 8, 13]
            .into_iter()
            .map(Gap::Ticks)
            .chain([Gap::Unbounded])
            .map(|g| ctp_extraction(&log, g).len())
            .collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{:?}", counts);
    });
}

pub fn splits_conserve_and_edges_include() {
    proptest!(cfg(), |(log in client_log(), g in gap())| {
        let ctps = ctp_extraction(&log, g);
        let mut before: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for c in &ctps {
            before.insert(c.id, c.provenance.iter().map(|e| e.log_index).collect());
        }
        let graph = nested_loop_detection(ctps.clone(), g);
        prop_assert_eq!(&graph, &nested_loop_detection(ctps, g));
        let mut after: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for n in &graph.nodes {
            after.entry(n.origin_ctp).or_default().extend(n.provenance.iter().map(|e| e.log_index));
        }
        for v in before.values_mut().chain(after.values_mut()) {
            v.sort_unstable();
        }
        prop_assert_eq!(before, after);
        for (i, n) in graph.nodes.iter().enumerate() {
            prop_assert_eq!(n.id, i + 1);
        }
        for e in &graph.edges {
            let (p, c) = (graph.node(e.parent), graph.node(e.child));
            let inputs = c.inputs.get(&e.child_var).expect("child binds the edge variable");
            let outputs = p.outputs.get(&e.parent_var).expect("parent binds the edge variable");
            prop_assert!(inputs.iter().all(|v| outputs.contains(v)));
            prop_assert!(ingap(c.ts_min, p.ts_max, g), "{:?} {}\n{}", g, dump(&log), format_dtp_graph(&graph));
        }
    });
}

pub fn one_bgp_per_component() {
    proptest!(cfg(), |(log in client_log(), g in gap())| {
        let graph = nested_loop_detection(ctp_extraction(&log, g), g);
        let mut root: Vec<usize> = (0..=graph.nodes.len()).collect();
        fn find(root: &mut [usize], x: usize) -> usize {
            if root[x] != x {
                let r = find(root, root[x]);
                root[x] = r;
            }
            root[x]
        }
        for e in &graph.edges {
            let (a, b) = (find(&mut root, e.parent), find(&mut root, e.child));
            root[a] = b;
        }
        let components: BTreeSet<usize> = (1..=graph.nodes.len()).map(|i| find(&mut root, i)).collect();
        let bgps = extract_bgps(&graph);
        prop_assert_eq!(bgps.len(), components.len());
        let once = filter_self_joins(&bgps);
        prop_assert_eq!(filter_self_joins(&once), once);
    });
}

pub fn self_evaluation_is_perfect() {
    proptest!(cfg(), |(qs in prop::collection::vec(query(), 1..5))| {
        let r = evaluate_bgps(&qs, &qs);
        prop_assert!(r.micro.all_ones(), "{:?}", r.micro);
        prop_assert!(r.macro_avg.all_ones(), "{:?}", r.macro_avg);
    });
}

pub fn metrics_are_bounded_and_renaming_blind() {
    proptest!(cfg(), |(deduced in prop::collection::vec(query(), 0..4), truth in prop::collection::vec(query(), 1..4))| {
        let r = evaluate_bgps(&deduced, &truth);
        for s in [&r.micro, &r.macro_avg] {
            for m in [s.tp_precision, s.tp_recall, s.tp_quality, s.join_precision, s.join_recall, s.join_quality, s.quality] {
                prop_assert!((0.0..=1.0).contains(&m));
            }
        }
        let renamed: Vec<Bgp> = deduced.iter().map(|q| rename(q, "_d")).collect();
        let truth_renamed: Vec<Bgp> = truth.iter().map(|q| rename(q, "_t")).collect();
        let again = evaluate_bgps(&renamed, &truth_renamed);
        prop_assert_eq!(again.micro, r.micro);
        prop_assert_eq!(again.macro_avg, r.macro_avg);
    });
}

pub fn pipeline_is_deterministic_and_slicing_neutral() {
    proptest!(cfg(), |(log in client_log(), ticks in 1..12i64)| {
        let mut cfg = LiftConfig::with_gap(GapSpec::Ticks(ticks));
        cfg.exec = Exec::Sequential;
        let seq = lift(&log, &cfg).unwrap();
        cfg.exec = Exec::Parallel;
        prop_assert_eq!(&lift(&log, &cfg).unwrap(), &seq);
        cfg.slice = Some(GapSpec::Unbounded);
        prop_assert_eq!(lift(&log, &cfg), Ok(seq.clone()));
        let report = evaluate(&seq, &seq.iter().map(|d| d.bgp.clone()).collect::<Vec<_>>());
        prop_assert!(report.micro.all_ones());
    });
}

fn log_entry() -> impl Strategy<Value = LogEntry> {
    let term = prop_oneof![
        "[a-z][a-z0-9:/#._-]{0,8}".prop_map(Term::iri),
        "[ -~éß\u{1F600}]{0,8}".prop_map(Term::literal),
        ("[ -~]{0,6}", "[a-z]{2}(-[A-Z]{2})?").prop_map(|(l, t)| Term::lang_literal(l, t)),
    ];
    let mu = prop::collection::btree_map(select(vec!["s", "o"]), prop::collection::vec(term.clone(), 1..4), 0..3);
    (
        "[0-9]{1,3}(\\.[0-9]{1,3}){3}",
        any::<i64>(),
        prop_oneof![Just(Term::var("s")), "[a-z]{1,5}".prop_map(Term::iri)],
        "[a-z]{1,5}".prop_map(Term::iri),
        prop_oneof![Just(Term::var("o")), term],
        mu,
    )
        .prop_map(|(ip, ts, s, p, o, mu)| {
            let tp = TriplePattern::new(s, p, o);
            let mut outputs = MappingSet::new();
            // outputs only bind variables of the pattern
            for (v, values) in mu.into_iter().filter(|(v, _)| tp.has_variable(v)) {
                for t in values {
                    outputs.insert(v, t);
                }
            }
            LogEntry { ip, ts, tp, outputs }
        })
}

pub fn log_round_trip() {
    proptest!(cfg(), |(entries in prop::collection::vec(log_entry(), 0..20))| {
        let log = TpfLog::new(entries);
        let mut buf = Vec::new();
        write_log(&mut buf, &log).unwrap();
        let (back, rejects) = parse_log(buf.as_slice()).unwrap();
        prop_assert!(rejects.is_empty(), "{:?}", rejects);
        prop_assert_eq!(&back, &log);
        let mut again = Vec::new();
        write_log(&mut again, &back).unwrap();
        prop_assert_eq!(again, buf);
    });
}

pub fn parsing_never_panics() {
    proptest!(cfg(), |(lines in prop::collection::vec("[ -~\\t]{0,60}", 0..10))| {
        let text = lines.join("\n");
        let (log, rejects) = parse_log(text.as_bytes()).unwrap();
        let nonblank = lines.iter().filter(|l| !l.trim().is_empty()).count();
        prop_assert!(log.len() + rejects.len() <= nonblank);
    });
}

pub fn large_log_round_trip() {
    let log = lift_core::workload::scale_log(5, 20, 10_000);
    let mut buf = Vec::new();
    write_log(&mut buf, &log).unwrap();
    let (back, rejects) = parse_log(buf.as_slice()).unwrap();
    assert!(rejects.is_empty());
    assert_eq!(back, log);
}

/// Every suite by name, for runners outside the test harness.
pub const SUITES: &[(&str, fn())] = &[
    ("template_is_idempotent", template_is_idempotent),
    (
        "renaming_equivalence_is_an_equivalence",
        renaming_equivalence_is_an_equivalence,
    ),
    ("pages_partition_the_matches", pages_partition_the_matches),
    ("solutions_match_brute_force", solutions_match_brute_force),
    ("shuffle_conserves_and_keeps_order", shuffle_conserves_and_keeps_order),
    ("ctps_partition_the_log", ctps_partition_the_log),
    ("fewer_ctps_as_the_gap_grows", fewer_ctps_as_the_gap_grows),
    ("splits_conserve_and_edges_include", splits_conserve_and_edges_include),
    ("one_bgp_per_component", one_bgp_per_component),
    ("self_evaluation_is_perfect", self_evaluation_is_perfect),
    (
        "metrics_are_bounded_and_renaming_blind",
        metrics_are_bounded_and_renaming_blind,
    ),
    (
        "pipeline_is_deterministic_and_slicing_neutral",
        pipeline_is_deterministic_and_slicing_neutral,
    ),
    ("log_round_trip", log_round_trip),
    ("parsing_never_panics", parsing_never_panics),
    ("large_log_round_trip", large_log_round_trip),
];
