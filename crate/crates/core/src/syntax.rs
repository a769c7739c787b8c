//! Textual term syntax shared by triple files, query files, logs and BGP
//! documents.
//!
//! * variables: `?name`
//! * IRIs: `<anything-without-spaces>` or a bare token such as `p1` or
//!   `http://example.org/a`; `prefix:local` is expanded when the prefix was
//!   declared
//! * literals: `"lexical"` or `"lexical"@lang`, with `\"`, `\\`, `\n`, `\r`
//!   and `\t` escapes
//!
//! The writer emits bare IRIs whenever re-reading them is unambiguous and
//! falls back to angle brackets otherwise.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::ParseError;
use crate::rdf::{is_reserved, Bgp, Term, Triple, TriplePattern};

/// Declared `prefix:` abbreviations.
#[derive(Clone, Debug, Default)]
pub struct Prefixes {
    map: HashMap<String, String>,
}

impl Prefixes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, prefix: &str, namespace: &str) {
        self.map.insert(prefix.to_owned(), namespace.to_owned());
    }

    fn expand(&self, token: &str) -> Option<String> {
        let (prefix, local) = token.split_once(':')?;
        self.map.get(prefix).map(|ns| format!("{ns}{local}"))
    }
}

fn bare_safe(iri: &str) -> bool {
    let Some(first) = iri.chars().next() else {
        return false;
    };
    !matches!(first, '?' | '"' | '<' | '#' | '@')
        && iri != "."
        && !iri
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"' | '{' | '}'))
}

pub(crate) fn write_term(f: &mut impl fmt::Write, term: &Term) -> fmt::Result {
    match term {
        Term::Variable(name) => write!(f, "?{name}"),
        Term::Iri(iri) if bare_safe(iri) => f.write_str(iri),
        Term::Iri(iri) => write!(f, "<{iri}>"),
        Term::Literal { lexical, lang } => {
            f.write_char('"')?;
            for c in lexical.chars() {
                match c {
                    '"' => f.write_str("\\\"")?,
                    '\\' => f.write_str("\\\\")?,
                    '\n' => f.write_str("\\n")?,
                    '\r' => f.write_str("\\r")?,
                    '\t' => f.write_str("\\t")?,
                    c => f.write_char(c)?,
                }
            }
            f.write_char('"')?;
            if let Some(lang) = lang {
                write!(f, "@{lang}")?;
            }
            Ok(())
        }
    }
}

pub fn term_to_string(term: &Term) -> String {
    term.to_string()
}

fn valid_var_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// Parse a single term token.
pub fn parse_term(token: &str, prefixes: &Prefixes) -> Result<Term, String> {
    if let Some(name) = token.strip_prefix('?') {
        if !valid_var_name(name) {
            return Err(format!("invalid variable `{token}`"));
        }
        return Ok(Term::var(name));
    }
    if let Some(rest) = token.strip_prefix('<') {
        let inner = rest
            .strip_suffix('>')
            .ok_or_else(|| format!("unterminated IRI `{token}`"))?;
        if inner.is_empty() || inner.chars().any(|c| c.is_whitespace() || c == '<' || c == '>') {
            return Err(format!("invalid IRI `{token}`"));
        }
        return Ok(Term::iri(inner));
    }
    if token.starts_with('"') {
        return parse_literal(token);
    }
    if !bare_safe(token) {
        return Err(format!("invalid term `{token}`"));
    }
    Ok(Term::iri(prefixes.expand(token).unwrap_or_else(|| token.to_owned())))
}

fn parse_literal(token: &str) -> Result<Term, String> {
    let mut chars = token.char_indices().skip(1);
    let mut lexical = String::new();
    let mut end = None;
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => {
                let (_, e) = chars.next().ok_or_else(|| format!("dangling escape in `{token}`"))?;
                lexical.push(match e {
                    '"' => '"',
                    '\\' => '\\',
                    'n' => '\n',
                    'r' => '\r',
                    't' => '\t',
                    other => return Err(format!("unknown escape `\\{other}`")),
                });
            }
            '"' => {
                end = Some(i);
                break;
            }
            c => lexical.push(c),
        }
    }
    let end = end.ok_or_else(|| format!("unterminated literal `{token}`"))?;
    let tail = &token[end + 1..];
    if tail.is_empty() {
        return Ok(Term::literal(lexical));
    }
    let lang = tail
        .strip_prefix('@')
        .filter(|l| !l.is_empty() && l.chars().all(|c| c.is_ascii_alphanumeric() || c == '-'))
        .ok_or_else(|| format!("invalid literal suffix `{tail}`"))?;
    Ok(Term::lang_literal(lexical, lang))
}

/// Split a line into tokens. Quoted literals (with an optional language tag)
/// and `<...>` IRIs are single tokens; `{` and `}` always stand alone; a `.`
/// glued to the end of a variable or literal is split off.
pub fn tokenize(line: &str) -> Result<Vec<&str>, String> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            b'{' | b'}' => {
                i += 1;
            }
            b'"' => {
                i += 1;
                let mut closed = false;
                while i < bytes.len() {
                    match bytes[i] {
                        b'\\' => i += 2,
                        b'"' => {
                            i += 1;
                            closed = true;
                            break;
                        }
                        _ => i += 1,
                    }
                }
                if !closed {
                    return Err("unterminated literal".into());
                }
                if i < bytes.len() && bytes[i] == b'@' {
                    i += 1;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'-') {
                        i += 1;
                    }
                }
            }
            b'<' => {
                while i < bytes.len() && bytes[i] != b'>' && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                if i >= bytes.len() || bytes[i] != b'>' {
                    return Err("unterminated IRI".into());
                }
                i += 1;
            }
            _ => {
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'{' | b'}') {
                    i += 1;
                }
                if c == b'?' && i - start > 1 && bytes[i - 1] == b'.' {
                    i -= 1;
                }
            }
        }
        out.push(&line[start..i]);
        if i < bytes.len() && bytes[i] == b'.' && matches!(c, b'"' | b'<' | b'?') {
            out.push(&line[i..i + 1]);
            i += 1;
        }
    }
    Ok(out)
}

fn parse_prefix_decl(tokens: &[&str], prefixes: &mut Prefixes) -> Result<(), String> {
    let (name, iri) = match tokens {
        [_, name, iri] | [_, name, iri, "."] => (name, iri),
        _ => return Err("malformed prefix declaration".into()),
    };
    let name = name
        .strip_suffix(':')
        .ok_or_else(|| format!("prefix `{name}` must end with `:`"))?;
    let ns = iri
        .strip_prefix('<')
        .and_then(|s| s.strip_suffix('>'))
        .ok_or_else(|| format!("prefix namespace `{iri}` must be an <IRI>"))?;
    prefixes.declare(name, ns);
    Ok(())
}

/// Read a triple file: one `s p o` triple per line, `#` comment lines,
/// optional `@prefix p: <ns> .` declarations.
pub fn read_triples<R: BufRead>(reader: R) -> Result<Vec<Triple>, ParseError> {
    let mut prefixes = Prefixes::new();
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = tokenize(trimmed).map_err(|e| ParseError::line(lineno, e))?;
        if tokens[0] == "@prefix" {
            parse_prefix_decl(&tokens, &mut prefixes).map_err(|e| ParseError::line(lineno, e))?;
            continue;
        }
        let fields = match tokens.as_slice() {
            [s, p, o] | [s, p, o, "."] => [*s, *p, *o],
            _ => {
                return Err(ParseError::line(
                    lineno,
                    format!("expected 3 fields, found {}", tokens.len()),
                ))
            }
        };
        let mut terms = Vec::with_capacity(3);
        for f in fields {
            terms.push(parse_term(f, &prefixes).map_err(|e| ParseError::line(lineno, e))?);
        }
        let o = terms.pop().unwrap();
        let p = terms.pop().unwrap();
        let s = terms.pop().unwrap();
        let triple = Triple::new(s, p, o).map_err(|e| ParseError::line(lineno, e.to_string()))?;
        triples.push(triple);
    }
    Ok(triples)
}

pub fn write_triples<'a, W: Write>(mut out: W, triples: impl IntoIterator<Item = &'a Triple>) -> std::io::Result<()> {
    for t in triples {
        writeln!(out, "{t}")?;
    }
    Ok(())
}

/// Parse a pattern written as three term tokens, e.g. `?s p1 "x"@en`.
pub fn parse_pattern(text: &str) -> Result<TriplePattern, String> {
    let tokens = tokenize(text)?;
    let [s, p, o] = tokens.as_slice() else {
        return Err(format!("expected 3 terms in `{text}`"));
    };
    let prefixes = Prefixes::new();
    Ok(TriplePattern::new(
        parse_term(s, &prefixes)?,
        parse_term(p, &prefixes)?,
        parse_term(o, &prefixes)?,
    ))
}

/// Parse the minimal query language `SELECT * WHERE { tp . tp . ... }`,
/// with optional leading `PREFIX p: <ns>` declarations.
pub fn parse_query(text: &str) -> Result<Bgp, ParseError> {
    let mut tokens: Vec<&str> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        tokens.extend(tokenize(trimmed).map_err(|e| ParseError::line(idx + 1, e))?);
    }
    let syntax = |m: String| ParseError::Syntax(m);
    let mut prefixes = Prefixes::new();
    let mut pos = 0;
    while pos < tokens.len() && tokens[pos].eq_ignore_ascii_case("PREFIX") {
        if pos + 2 >= tokens.len() {
            return Err(syntax("truncated PREFIX declaration".into()));
        }
        parse_prefix_decl(&tokens[pos..pos + 3], &mut prefixes).map_err(syntax)?;
        pos += 3;
    }
    if !tokens.get(pos).is_some_and(|t| t.eq_ignore_ascii_case("SELECT")) {
        return Err(syntax("expected SELECT".into()));
    }
    pos += 1;
    while pos < tokens.len() && !tokens[pos].eq_ignore_ascii_case("WHERE") && tokens[pos] != "{" {
        pos += 1;
    }
    if tokens.get(pos).is_some_and(|t| t.eq_ignore_ascii_case("WHERE")) {
        pos += 1;
    }
    if tokens.get(pos) != Some(&"{") {
        return Err(syntax("expected `{`".into()));
    }
    pos += 1;
    let close = tokens[pos..]
        .iter()
        .position(|t| *t == "}")
        .map(|off| pos + off)
        .ok_or_else(|| syntax("expected `}`".into()))?;
    if close + 1 != tokens.len() {
        return Err(syntax(format!(
            "unsupported content after `}}`: `{}`",
            tokens[close + 1..].join(" ")
        )));
    }
    let mut patterns = Vec::new();
    for group in tokens[pos..close].split(|t| *t == ".") {
        if group.is_empty() {
            continue;
        }
        if group[0].eq_ignore_ascii_case("FILTER")
            || group[0].eq_ignore_ascii_case("OPTIONAL")
            || group[0].eq_ignore_ascii_case("UNION")
        {
            return Err(syntax(format!("`{}` is not supported", group[0])));
        }
        let [s, p, o] = group else {
            return Err(syntax(format!("expected 3 terms in `{}`", group.join(" "))));
        };
        let mut terms = Vec::with_capacity(3);
        for t in [s, p, o] {
            let term = parse_term(t, &prefixes).map_err(syntax)?;
            if let Term::Variable(name) = &term {
                if is_reserved(name) {
                    return Err(syntax(format!("variable name `?{name}` is reserved")));
                }
            }
            terms.push(term);
        }
        let o = terms.pop().unwrap();
        let p = terms.pop().unwrap();
        let s = terms.pop().unwrap();
        if s.is_literal() || p.is_literal() {
            return Err(syntax(format!(
                "literal outside object position in `{}`",
                group.join(" ")
            )));
        }
        patterns.push(TriplePattern::new(s, p, o));
    }
    if patterns.is_empty() {
        return Err(syntax("query has no triple pattern".into()));
    }
    Ok(Bgp::new(patterns))
}

pub fn format_query(bgp: &Bgp) -> String {
    let body: Vec<String> = bgp.patterns().iter().map(ToString::to_string).collect();
    format!("SELECT * WHERE {{ {} }}\n", body.join(" . "))
}
