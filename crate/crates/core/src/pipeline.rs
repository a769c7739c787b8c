//! The three extraction phases wired together, per ip partition and per
//! time slice.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;

use crate::bgp::{extract_bgps, filter_self_joins, max_fresh, DeducedBgp};
use crate::ctp::{extract_ctps, Ctp, Gap};
use crate::dtp::{nested_loop_detection, DtpGraph};
use crate::error::ConfigError;
use crate::log::{LogEntry, TpfLog};
use crate::metrics::{evaluate, EvalReport};
use crate::par::{self, Exec};
use crate::rdf::Bgp;

/// A duration given in ticks, as a share of the log duration, or unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GapSpec {
    Unbounded,
    Ticks(i64),
    Percent(f64),
}

impl GapSpec {
    /// Concrete gap for a log spanning `duration` ticks. A percentage
    /// rounds up and never goes below one tick.
    pub fn resolve(self, duration: i64) -> Result<Gap, ConfigError> {
        match self {
            GapSpec::Unbounded => Ok(Gap::Unbounded),
            GapSpec::Ticks(g) if g > 0 => Ok(Gap::Ticks(g)),
            GapSpec::Ticks(_) => Err(ConfigError::NonPositiveGap),
            GapSpec::Percent(p) if p > 0.0 && p.is_finite() => {
                let ticks = (p / 100.0 * duration.max(0) as f64).ceil() as i64;
                Ok(Gap::Ticks(ticks.max(1)))
            }
            GapSpec::Percent(_) => Err(ConfigError::NonPositiveGap),
        }
    }
}

impl FromStr for GapSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ConfigError::InvalidGap(s.to_owned());
        match s {
            "unbounded" | "inf" | "none" => return Ok(GapSpec::Unbounded),
            _ => {}
        }
        if let Some(p) = s.strip_suffix('%') {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(ConfigError::NonPositiveGap);
            }
            return Ok(GapSpec::Percent(p));
        }
        let g: i64 = s.parse().map_err(|_| bad())?;
        if g <= 0 {
            return Err(ConfigError::NonPositiveGap);
        }
        Ok(GapSpec::Ticks(g))
    }
}

impl fmt::Display for GapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GapSpec::Unbounded => f.write_str("unbounded"),
            GapSpec::Ticks(g) => write!(f, "{g}"),
            GapSpec::Percent(p) => write!(f, "{p}%"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftConfig {
    pub gap: GapSpec,
    /// Process the log in disjoint slices of this length.
    pub slice: Option<GapSpec>,
    pub filter_self_joins: bool,
    /// Never relate entries from different ips.
    pub per_ip: bool,
    pub exec: Exec,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig {
            gap: GapSpec::Unbounded,
            slice: None,
            filter_self_joins: false,
            per_ip: false,
            exec: Exec::default(),
        }
    }
}

impl LiftConfig {
    pub fn with_gap(gap: GapSpec) -> Self {
        LiftConfig {
            gap,
            ..Default::default()
        }
    }

    /// Gap and slice length in ticks for `log`.
    pub fn resolve(&self, log: &TpfLog) -> Result<(Gap, Option<i64>), ConfigError> {
        let duration = log.duration();
        let gap = self.gap.resolve(duration)?;
        let slice = match self.slice {
            None | Some(GapSpec::Unbounded) => None,
            Some(spec) => match spec.resolve(duration) {
                Ok(Gap::Ticks(s)) => Some(s),
                Ok(Gap::Unbounded) => None,
                Err(ConfigError::NonPositiveGap) => return Err(ConfigError::NonPositiveSlice),
                Err(e) => return Err(e),
            },
        };
        if let Some(s) = slice {
            let too_short = match gap {
                Gap::Unbounded => true,
                Gap::Ticks(g) => s < g,
            };
            if too_short {
                return Err(ConfigError::SliceShorterThanGap {
                    slice: s.to_string(),
                    gap: match gap {
                        Gap::Unbounded => "unbounded".into(),
                        Gap::Ticks(g) => g.to_string(),
                    },
                });
            }
        }
        Ok((gap, slice))
    }
}

/// Intermediate results of one work unit.
#[derive(Clone, Debug)]
pub struct UnitTrace {
    pub ip: Option<String>,
    /// `[start, end)` of the slice, when slicing.
    pub window: Option<(i64, i64)>,
    pub entries: usize,
    pub ctps: Vec<Ctp>,
    pub graph: DtpGraph,
}

#[derive(Clone, Debug)]
pub struct LiftTrace {
    pub gap: Gap,
    pub units: Vec<UnitTrace>,
    pub bgps: Vec<DeducedBgp>,
}

/// Entries of one partition, by slice index.
type Slices<'a> = BTreeMap<i64, Vec<(usize, &'a LogEntry)>>;

struct Unit<'a> {
    ip: Option<&'a str>,
    window: Option<(i64, i64)>,
    entries: Vec<(usize, &'a LogEntry)>,
}

fn work_units(log: &TpfLog, per_ip: bool, slice: Option<i64>) -> Vec<Unit<'_>> {
    let Some(first) = log.first_ts() else {
        return Vec::new();
    };
    let mut groups: IndexMap<Option<&str>, Slices<'_>> = IndexMap::new();
    for (i, e) in log.entries().iter().enumerate() {
        let ip = per_ip.then_some(e.ip.as_str());
        let k = slice.map_or(0, |s| (e.ts - first).div_euclid(s));
        groups.entry(ip).or_default().entry(k).or_default().push((i, e));
    }
    groups
        .into_iter()
        .flat_map(|(ip, slices)| {
            slices.into_iter().map(move |(k, entries)| Unit {
                ip,
                window: slice.map(|s| (first + k * s, first + (k + 1) * s)),
                entries,
            })
        })
        .collect()
}

fn run_unit(unit: &Unit<'_>, gap: Gap, filter: bool, keep: bool) -> (Option<UnitTrace>, Vec<DeducedBgp>, usize) {
    let ctps = extract_ctps(unit.entries.iter().copied(), gap);
    let kept_ctps = if keep { ctps.clone() } else { Vec::new() };
    let graph = nested_loop_detection(ctps, gap);
    let mut bgps = extract_bgps(&graph);
    if filter {
        bgps = filter_self_joins(&bgps);
    }
    let nodes = graph.nodes.len();
    let trace = keep.then(|| UnitTrace {
        ip: unit.ip.map(str::to_owned),
        window: unit.window,
        entries: unit.entries.len(),
        ctps: kept_ctps,
        graph,
    });
    (trace, bgps, nodes)
}

fn run(log: &TpfLog, cfg: &LiftConfig, keep: bool) -> Result<LiftTrace, ConfigError> {
    let (gap, slice) = cfg.resolve(log)?;
    let units = work_units(log, cfg.per_ip, slice);
    let filter = cfg.filter_self_joins;
    let results = par::map(units, cfg.exec, |u| run_unit(&u, gap, filter, keep));
    let single = results.len() == 1;
    let mut traces = Vec::new();
    let mut bgps = Vec::new();
    let (mut dtp_offset, mut var_offset) = (0, 0);
    for (trace, unit_bgps, nodes) in results {
        traces.extend(trace);
        let fresh = max_fresh(&unit_bgps);
        if single {
            bgps = unit_bgps;
        } else {
            bgps.extend(unit_bgps.iter().map(|b| b.offset(dtp_offset, var_offset)));
        }
        dtp_offset += nodes;
        var_offset += fresh;
    }
    Ok(LiftTrace {
        gap,
        units: traces,
        bgps,
    })
}

/// Deduce the BGPs of `log`.
pub fn lift(log: &TpfLog, cfg: &LiftConfig) -> Result<Vec<DeducedBgp>, ConfigError> {
    run(log, cfg, false).map(|t| t.bgps)
}

/// Like [`lift`], keeping candidates and graphs of every work unit.
pub fn lift_traced(log: &TpfLog, cfg: &LiftConfig) -> Result<LiftTrace, ConfigError> {
    run(log, cfg, true)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub gap: String,
    /// Resolved gap in ticks, `None` when unbounded.
    pub ticks: Option<i64>,
    pub bgps: usize,
    pub report: EvalReport,
}

/// One lift and evaluation per gap.
pub fn sweep(log: &TpfLog, gaps: &[GapSpec], cfg: &LiftConfig, truth: &[Bgp]) -> Result<Vec<SweepRow>, ConfigError> {
    let runs: Vec<LiftConfig> = gaps
        .iter()
        .map(|&gap| LiftConfig {
            gap,
            exec: Exec::Sequential,
            ..cfg.clone()
        })
        .collect();
    for c in &runs {
        c.resolve(log)?;
    }
    par::map(runs, cfg.exec, |c| {
        let (gap, _) = c.resolve(log)?;
        let bgps = lift(log, &c)?;
        Ok(SweepRow {
            gap: c.gap.to_string(),
            ticks: match gap {
                Gap::Ticks(t) => Some(t),
                Gap::Unbounded => None,
            },
            bgps: bgps.len(),
            report: evaluate(&bgps, truth),
        })
    })
    .into_iter()
    .collect()
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:<10} {:>8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "gap", "ticks", "bgps", "tpP", "tpR", "joinP", "joinR", "quality"
    );
    for r in rows {
        let s = &r.report.micro;
        let ticks = r.ticks.map_or("-".to_owned(), |t| t.to_string());
        out.push_str(&format!(
            "{:<10} {:>8} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
            r.gap, ticks, r.bgps, s.tp_precision, s.tp_recall, s.join_precision, s.join_recall, s.quality
        ));
    }
    out
}
