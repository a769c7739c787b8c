//! RDF vocabulary shared by every stage: terms, triple patterns, triples,
//! basic graph patterns and variable-to-values mapping tables.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Reserved variable standing for a constant found in subject position.
pub const SUBJECT_INPUT: &str = "_inS";
/// Reserved variable standing for a constant found in object position.
pub const OBJECT_INPUT: &str = "_inO";

pub fn is_reserved(name: &str) -> bool {
    name == SUBJECT_INPUT || name == OBJECT_INPUT
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    Literal { lexical: String, lang: Option<String> },
    Variable(String),
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri(value.into())
    }

    pub fn literal(lexical: impl Into<String>) -> Self {
        Term::Literal {
            lexical: lexical.into(),
            lang: None,
        }
    }

    pub fn lang_literal(lexical: impl Into<String>, lang: impl Into<String>) -> Self {
        Term::Literal {
            lexical: lexical.into(),
            lang: Some(lang.into()),
        }
    }

    /// Variable constructor; `name` is given without the leading `?`.
    pub fn var(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    pub fn as_variable(&self) -> Option<&str> {
        match self {
            Term::Variable(name) => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::syntax::write_term(f, self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Subject,
    Object,
}

impl Position {
    pub fn as_str(self) -> &'static str {
        match self {
            Position::Subject => "subject",
            Position::Object => "object",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriplePattern {
    pub s: Term,
    pub p: Term,
    pub o: Term,
}

impl TriplePattern {
    pub fn new(s: Term, p: Term, o: Term) -> Self {
        TriplePattern { s, p, o }
    }

    pub fn get(&self, pos: Position) -> &Term {
        match pos {
            Position::Subject => &self.s,
            Position::Object => &self.o,
        }
    }

    pub fn get_mut(&mut self, pos: Position) -> &mut Term {
        match pos {
            Position::Subject => &mut self.s,
            Position::Object => &mut self.o,
        }
    }

    /// Distinct variable names in s, p, o order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::with_capacity(3);
        for t in [&self.s, &self.p, &self.o] {
            if let Term::Variable(v) = t {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn has_variable(&self, name: &str) -> bool {
        [&self.s, &self.p, &self.o]
            .into_iter()
            .any(|t| t.as_variable() == Some(name))
    }

    /// First subject/object position holding `name`.
    pub fn position_of(&self, name: &str) -> Option<Position> {
        if self.s.as_variable() == Some(name) {
            Some(Position::Subject)
        } else if self.o.as_variable() == Some(name) {
            Some(Position::Object)
        } else {
            None
        }
    }

    pub fn is_ground(&self) -> bool {
        !self.s.is_variable() && !self.p.is_variable() && !self.o.is_variable()
    }

    /// Whether `triple` is an answer to this pattern, honouring repeated
    /// variables (`?x p ?x` only matches triples with s = o).
    pub fn matches(&self, triple: &Triple) -> bool {
        let mut seen: [(Option<&str>, &Term); 3] = [(None, &triple.s); 3];
        for (i, (pat, val)) in [(&self.s, &triple.s), (&self.p, &triple.p), (&self.o, &triple.o)]
            .into_iter()
            .enumerate()
        {
            match pat {
                Term::Variable(v) => {
                    if seen[..i]
                        .iter()
                        .any(|(name, bound)| *name == Some(v.as_str()) && *bound != val)
                    {
                        return false;
                    }
                    seen[i] = (Some(v), val);
                }
                constant => {
                    if constant != val {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Replace variables bound in `row`.
    pub fn substitute(&self, row: &HashMap<String, Term>) -> TriplePattern {
        let sub = |t: &Term| match t {
            Term::Variable(v) => row.get(v).cloned().unwrap_or_else(|| t.clone()),
            _ => t.clone(),
        };
        TriplePattern::new(sub(&self.s), sub(&self.p), sub(&self.o))
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.s, self.p, self.o)
    }
}

/// A ground RDF triple. Subject and predicate are IRIs, object an IRI or literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub s: Term,
    pub p: Term,
    pub o: Term,
}

impl Triple {
    pub fn new(s: Term, p: Term, o: Term) -> Result<Self, ModelError> {
        if !s.is_iri() {
            return Err(ModelError::InvalidTriple(format!("subject {s} is not an IRI")));
        }
        if !p.is_iri() {
            return Err(ModelError::InvalidTriple(format!("predicate {p} is not an IRI")));
        }
        if o.is_variable() {
            return Err(ModelError::InvalidTriple(format!("object {o} is a variable")));
        }
        Ok(Triple { s, p, o })
    }

    pub fn get(&self, pos: Position) -> &Term {
        match pos {
            Position::Subject => &self.s,
            Position::Object => &self.o,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.s, self.p, self.o)
    }
}

/// Variable name (without `?`) to an insertion-ordered, duplicate-free set of
/// values. Equality ignores insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MappingSet {
    bindings: IndexMap<String, IndexSet<Term>>,
}

impl MappingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: &str, value: Term) -> bool {
        debug_assert!(!value.is_variable());
        match self.bindings.get_mut(var) {
            Some(set) => set.insert(value),
            None => {
                let mut set = IndexSet::with_capacity(1);
                set.insert(value);
                self.bindings.insert(var.to_owned(), set);
                true
            }
        }
    }

    pub fn union_with(&mut self, other: &MappingSet) {
        for (var, values) in &other.bindings {
            match self.bindings.get_mut(var) {
                Some(set) => set.extend(values.iter().cloned()),
                None => {
                    self.bindings.insert(var.clone(), values.clone());
                }
            }
        }
    }

    pub fn get(&self, var: &str) -> Option<&IndexSet<Term>> {
        self.bindings.get(var)
    }

    pub fn contains(&self, var: &str, value: &Term) -> bool {
        self.bindings.get(var).is_some_and(|s| s.contains(value))
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IndexSet<Term>)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Number of bound variables.
    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    /// Variable names in ascending order.
    pub fn sorted_variables(&self) -> Vec<&str> {
        let mut vars: Vec<&str> = self.variables().collect();
        vars.sort_unstable();
        vars
    }
}

impl FromIterator<(String, Term)> for MappingSet {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        let mut m = MappingSet::new();
        for (var, value) in iter {
            m.insert(&var, value);
        }
        m
    }
}

/// Replace bound subject/object by reserved variables and record the replaced
/// constants. The predicate is never replaced.
pub fn template_of(tp: &TriplePattern) -> Result<(TriplePattern, MappingSet), ModelError> {
    if tp.p.is_variable() {
        return Err(ModelError::UnboundPredicate);
    }
    let mut template = tp.clone();
    let mut seeds = MappingSet::new();
    if !tp.s.is_variable() {
        seeds.insert(SUBJECT_INPUT, tp.s.clone());
        template.s = Term::var(SUBJECT_INPUT);
    }
    if !tp.o.is_variable() {
        seeds.insert(OBJECT_INPUT, tp.o.clone());
        template.o = Term::var(OBJECT_INPUT);
    }
    Ok((template, seeds))
}

/// Two positions of distinct patterns holding the same variable.
/// Stored with `left < right`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinEdge {
    pub left: usize,
    pub left_pos: Position,
    pub right: usize,
    pub right_pos: Position,
}

impl JoinEdge {
    pub fn new(a: usize, pos_a: Position, b: usize, pos_b: Position) -> Self {
        if (a, pos_a) <= (b, pos_b) {
            JoinEdge {
                left: a,
                left_pos: pos_a,
                right: b,
                right_pos: pos_b,
            }
        } else {
            JoinEdge {
                left: b,
                left_pos: pos_b,
                right: a,
                right_pos: pos_a,
            }
        }
    }
}

/// A basic graph pattern. Patterns are duplicate-free; joins are every pair
/// of subject/object positions in distinct patterns that share a variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bgp {
    patterns: Vec<TriplePattern>,
    joins: BTreeSet<JoinEdge>,
}

impl Bgp {
    pub fn new(patterns: impl IntoIterator<Item = TriplePattern>) -> Self {
        let mut seen: HashSet<TriplePattern> = HashSet::new();
        let mut unique: Vec<TriplePattern> = Vec::new();
        for tp in patterns {
            if !seen.contains(&tp) {
                seen.insert(tp.clone());
                unique.push(tp);
            }
        }
        let joins = shared_variable_joins(&unique);
        Bgp {
            patterns: unique,
            joins,
        }
    }

    pub fn patterns(&self) -> &[TriplePattern] {
        &self.patterns
    }

    pub fn joins(&self) -> &BTreeSet<JoinEdge> {
        &self.joins
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// True iff some bijective variable renaming maps `self` onto `other`.
    pub fn equal_up_to_renaming(&self, other: &Bgp) -> bool {
        patterns_equal_up_to_renaming(self, other)
    }
}

impl fmt::Display for Bgp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, tp) in self.patterns.iter().enumerate() {
            if i > 0 {
                f.write_str(" .")?;
            }
            write!(f, " {tp}")?;
        }
        f.write_str(" }")
    }
}

pub(crate) fn shared_variable_joins(patterns: &[TriplePattern]) -> BTreeSet<JoinEdge> {
    let mut occurrences: HashMap<&str, Vec<(usize, Position)>> = HashMap::new();
    for (i, tp) in patterns.iter().enumerate() {
        for pos in [Position::Subject, Position::Object] {
            if let Term::Variable(v) = tp.get(pos) {
                occurrences.entry(v).or_default().push((i, pos));
            }
        }
    }
    let mut joins = BTreeSet::new();
    for occ in occurrences.values() {
        for (k, &(i, pi)) in occ.iter().enumerate() {
            for &(j, pj) in &occ[k + 1..] {
                if i != j {
                    joins.insert(JoinEdge::new(i, pi, j, pj));
                }
            }
        }
    }
    joins
}

/// Partial bijection between the variables of two patterns sets.
#[derive(Clone, Debug, Default)]
pub(crate) struct Renaming {
    forward: HashMap<String, String>,
    backward: HashMap<String, String>,
}

impl Renaming {
    fn bind(&mut self, a: &str, b: &str) -> bool {
        match (self.forward.get(a), self.backward.get(b)) {
            (Some(x), Some(y)) => x == b && y == a,
            (None, None) => {
                self.forward.insert(a.to_owned(), b.to_owned());
                self.backward.insert(b.to_owned(), a.to_owned());
                true
            }
            _ => false,
        }
    }

    fn unify_term(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Variable(x), Term::Variable(y)) => self.bind(x, y),
            (Term::Variable(_), _) | (_, Term::Variable(_)) => false,
            _ => a == b,
        }
    }

    /// Extend the renaming so that `a` maps onto `b`; returns the extended
    /// renaming, or `None` when they are incompatible.
    pub(crate) fn unify(&self, a: &TriplePattern, b: &TriplePattern) -> Option<Renaming> {
        if a.p != b.p && (!a.p.is_variable() || !b.p.is_variable()) {
            return None;
        }
        let mut next = self.clone();
        (next.unify_term(&a.s, &b.s) && next.unify_term(&a.p, &b.p) && next.unify_term(&a.o, &b.o)).then_some(next)
    }
}

/// Exhaustive search over pattern bijections consistent with a variable
/// bijection; joins are compared under the induced pattern permutation.
pub fn patterns_equal_up_to_renaming(a: &Bgp, b: &Bgp) -> bool {
    if a.patterns.len() != b.patterns.len() || a.joins.len() != b.joins.len() {
        return false;
    }
    let mut assignment = vec![usize::MAX; a.patterns.len()];
    let mut used = vec![false; b.patterns.len()];
    search_bijection(a, b, 0, &Renaming::default(), &mut assignment, &mut used)
}

fn search_bijection(
    a: &Bgp,
    b: &Bgp,
    i: usize,
    renaming: &Renaming,
    assignment: &mut [usize],
    used: &mut [bool],
) -> bool {
    if i == a.patterns.len() {
        let mapped: BTreeSet<JoinEdge> = a
            .joins
            .iter()
            .map(|j| JoinEdge::new(assignment[j.left], j.left_pos, assignment[j.right], j.right_pos))
            .collect();
        return mapped == b.joins;
    }
    for j in 0..b.patterns.len() {
        if used[j] {
            continue;
        }
        if let Some(next) = renaming.unify(&a.patterns[i], &b.patterns[j]) {
            used[j] = true;
            assignment[i] = j;
            if search_bijection(a, b, i + 1, &next, assignment, used) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}
