//! BGP documents: a canonical JSON form (read back by `eval` and `stats`)
//! and an XML rendering.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::bgp::DeducedBgp;
use crate::error::ParseError;
use crate::rdf::{JoinEdge, Position};
use crate::syntax::parse_pattern;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub input: String,
    pub gap: String,
    /// Resolved gap in ticks, absent when unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_ticks: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
    pub entries: usize,
    pub rejects: usize,
    pub bgps: usize,
    pub filter_self_joins: bool,
    pub per_ip: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinRecord {
    pub left: usize,
    pub left_pos: Position,
    pub right: usize,
    pub right_pos: Position,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BgpRecord {
    pub id: usize,
    pub patterns: Vec<String>,
    pub joins: Vec<JoinRecord>,
    pub support: Vec<usize>,
    pub pattern_support: Vec<Vec<usize>>,
    pub pattern_windows: Vec<(i64, i64)>,
    pub window: (i64, i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BgpDocument {
    pub meta: DocumentMeta,
    pub bgps: Vec<BgpRecord>,
}

impl BgpDocument {
    pub fn new(mut meta: DocumentMeta, bgps: &[DeducedBgp]) -> Self {
        meta.bgps = bgps.len();
        let records = bgps
            .iter()
            .enumerate()
            .map(|(i, b)| BgpRecord {
                id: i + 1,
                patterns: b.bgp.patterns().iter().map(|tp| tp.to_string()).collect(),
                joins: b
                    .detected_joins
                    .iter()
                    .map(|j| JoinRecord {
                        left: j.left,
                        left_pos: j.left_pos,
                        right: j.right,
                        right_pos: j.right_pos,
                    })
                    .collect(),
                support: b.support.clone(),
                pattern_support: b.pattern_support.clone(),
                pattern_windows: b.pattern_windows.clone(),
                window: (b.window_start, b.window_end),
            })
            .collect();
        BgpDocument { meta, bgps: records }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ParseError> {
        serde_json::from_reader(reader).map_err(|e| {
            if e.is_io() {
                ParseError::Io(e.into())
            } else {
                ParseError::Syntax(format!("invalid BGP document: {e}"))
            }
        })
    }

    /// Rebuild the deduced BGPs the document describes.
    pub fn deduced(&self) -> Result<Vec<DeducedBgp>, ParseError> {
        self.bgps
            .iter()
            .map(|r| {
                let bad = |msg: String| ParseError::Syntax(format!("bgp {}: {msg}", r.id));
                let patterns = r
                    .patterns
                    .iter()
                    .map(|p| parse_pattern(p).map_err(bad))
                    .collect::<Result<Vec<_>, _>>()?;
                let n = patterns.len();
                if r.pattern_support.len() != n || r.pattern_windows.len() != n {
                    return Err(bad("per-pattern lists do not match the patterns".into()));
                }
                let joins = r
                    .joins
                    .iter()
                    .map(|j| {
                        if j.left >= n || j.right >= n {
                            Err(bad(format!("join refers to missing pattern {}", j.left.max(j.right))))
                        } else {
                            Ok(JoinEdge::new(j.left, j.left_pos, j.right, j.right_pos))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(DeducedBgp::from_parts(
                    patterns,
                    joins,
                    r.pattern_support.clone(),
                    r.pattern_windows.clone(),
                ))
            })
            .collect()
    }

    pub fn to_xml(&self) -> String {
        let m = &self.meta;
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = write!(
            out,
            "<bgps input=\"{}\" gap=\"{}\" entries=\"{}\" rejects=\"{}\" count=\"{}\" filterSelfJoins=\"{}\" perIp=\"{}\"",
            escape(&m.input),
            escape(&m.gap),
            m.entries,
            m.rejects,
            m.bgps,
            m.filter_self_joins,
            m.per_ip
        );
        if let Some(s) = &m.slice {
            let _ = write!(out, " slice=\"{}\"", escape(s));
        }
        out.push_str(">\n");
        for b in &self.bgps {
            let support: Vec<String> = b.support.iter().map(usize::to_string).collect();
            let _ = writeln!(
                out,
                "  <bgp id=\"{}\" start=\"{}\" end=\"{}\" support=\"{}\">",
                b.id,
                b.window.0,
                b.window.1,
                support.join(" ")
            );
            for (i, p) in b.patterns.iter().enumerate() {
                let _ = writeln!(out, "    <tp index=\"{i}\">{}</tp>", escape(p));
            }
            for j in &b.joins {
                let _ = writeln!(
                    out,
                    "    <join left=\"{}\" leftPos=\"{}\" right=\"{}\" rightPos=\"{}\"/>",
                    j.left,
                    j.left_pos.as_str(),
                    j.right,
                    j.right_pos.as_str()
                );
            }
            out.push_str("  </bgp>\n");
        }
        out.push_str("</bgps>\n");
        out
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}
