//! Deduction of basic graph patterns from Triple Pattern Fragment server
//! logs.
//!
//! A log of single triple pattern requests goes through three phases:
//! candidate extraction ([`ctp`]), nested-loop detection ([`dtp`]) and
//! BGP assembly ([`bgp`]). [`pipeline`] chains them over time slices and ip
//! partitions; [`metrics`] scores the result against known queries.
//! [`client`] and [`shuffle`] produce logs to test against.

pub mod bgp;
pub mod client;
pub mod ctp;
pub mod dtp;
pub mod error;
pub mod log;
pub mod metrics;
pub mod output;
pub mod par;
pub mod pipeline;
pub mod rdf;
pub mod shuffle;
pub mod store;
pub mod syntax;
pub mod workload;

#[cfg(test)]
mod fixtures;

pub use bgp::{bgp_stats, extract_bgps, filter_self_joins, BgpStats, DeducedBgp};
pub use client::{execute_query, ClientConfig, Clock, Execution};
pub use ctp::{ctp_extraction, Ctp, Gap};
pub use dtp::{nested_loop_detection, Dtp, DtpGraph};
pub use error::{ConfigError, ModelError, ParseError};
pub use log::{parse_log, write_log, LogEntry, TpfLog};
pub use metrics::{concurrency_resistance, evaluate, EvalReport};
pub use par::Exec;
pub use pipeline::{lift, GapSpec, LiftConfig};
pub use rdf::{Bgp, Position, Term, Triple, TriplePattern};
pub use shuffle::{shuffle_logs, ShuffleMode, ShufflePolicy};
pub use store::Store;
