//! In-memory triple store answering single triple patterns page by page,
//! the way a TPF server does.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::ParseError;
use crate::rdf::{Term, Triple, TriplePattern};
use crate::syntax;

pub const DEFAULT_PAGE_SIZE: usize = 100;

#[derive(Clone, Debug, Default)]
pub struct Store {
    // sorted, duplicate-free
    triples: Vec<Triple>,
    by_predicate: HashMap<Term, Vec<u32>>,
    by_predicate_subject: HashMap<(Term, Term), Vec<u32>>,
    by_predicate_object: HashMap<(Term, Term), Vec<u32>>,
}

/// One page of the answer to a triple pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub triples: Vec<Triple>,
    pub total_count: usize,
    pub page: usize,
    pub page_size: usize,
}

impl Fragment {
    /// Number of pages needed to get every match (at least 1).
    pub fn page_count(&self) -> usize {
        self.total_count.div_ceil(self.page_size).max(1)
    }
}

impl Store {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut triples: Vec<Triple> = triples.into_iter().collect();
        triples.sort_unstable();
        triples.dedup();
        let mut store = Store {
            triples,
            ..Default::default()
        };
        for (i, t) in store.triples.iter().enumerate() {
            let i = i as u32;
            store.by_predicate.entry(t.p.clone()).or_default().push(i);
            store
                .by_predicate_subject
                .entry((t.p.clone(), t.s.clone()))
                .or_default()
                .push(i);
            store
                .by_predicate_object
                .entry((t.p.clone(), t.o.clone()))
                .or_default()
                .push(i);
        }
        store
    }

    /// Load a triple file.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, ParseError> {
        Ok(Self::from_triples(syntax::read_triples(reader)?))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// All triples in the store's total order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    // None means "scan everything"
    fn candidate_ids(&self, tp: &TriplePattern) -> Option<&[u32]> {
        fn ids(v: Option<&Vec<u32>>) -> &[u32] {
            v.map_or(&[], |v| v.as_slice())
        }
        match (&tp.s, &tp.p, &tp.o) {
            (_, Term::Variable(_), _) => None,
            (s, p, _) if !s.is_variable() => Some(ids(self.by_predicate_subject.get(&(p.clone(), s.clone())))),
            (_, p, o) if !o.is_variable() => Some(ids(self.by_predicate_object.get(&(p.clone(), o.clone())))),
            (_, p, _) => Some(ids(self.by_predicate.get(p))),
        }
    }

    /// Every triple matching `tp`, in store order.
    pub fn matches<'a>(&'a self, tp: &'a TriplePattern) -> impl Iterator<Item = &'a Triple> + 'a {
        let (all, ids) = match self.candidate_ids(tp) {
            Some(ids) => (None, Some(ids)),
            None => (Some(self.triples.iter()), None),
        };
        let indexed = ids.into_iter().flatten().map(|&i| &self.triples[i as usize]);
        all.into_iter().flatten().chain(indexed).filter(move |t| tp.matches(t))
    }

    pub fn count(&self, tp: &TriplePattern) -> usize {
        self.matches(tp).count()
    }

    /// The `page`-th slice (1-based) of matches plus the exact total count.
    pub fn evaluate_fragment(&self, tp: &TriplePattern, page: usize, page_size: usize) -> Fragment {
        assert!(page >= 1 && page_size >= 1, "page and page size start at 1");
        let mut total = 0;
        let first = (page - 1) * page_size;
        let mut triples = Vec::new();
        for t in self.matches(tp) {
            if total >= first && total < first + page_size {
                triples.push(t.clone());
            }
            total += 1;
        }
        Fragment {
            triples,
            total_count: total,
            page,
            page_size,
        }
    }
}
