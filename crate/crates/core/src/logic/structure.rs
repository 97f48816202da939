use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use super::signature::{RelId, Signature, SortId};
use super::Var;

/// Per-sort domain cardinalities. Elements of a sort of size `n` are the
/// integers `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSizes(Vec<usize>);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("sort count mismatch: signature has {expected} sorts, got {got} sizes")]
    SortCountMismatch { expected: usize, got: usize },
    #[error("domain size for sort `{0}` must be at least 1")]
    EmptySort(String),
    #[error("arity mismatch for `{rel}`: expected {expected}, got {got}")]
    ArityMismatch { rel: String, expected: usize, got: usize },
    #[error("element {element} out of range for sort `{sort}` (size {size})")]
    ElementOutOfRange { element: u32, sort: String, size: usize },
}

impl DomainSizes {
    /// Sizes listed in signature sort order; every size must be >= 1.
    pub fn new(signature: &Signature, sizes: &[usize]) -> Result<Self, StructureError> {
        if sizes.len() != signature.sort_count() {
            return Err(StructureError::SortCountMismatch {
                expected: signature.sort_count(),
                got: sizes.len(),
            });
        }
        for (i, &n) in sizes.iter().enumerate() {
            if n == 0 {
                return Err(StructureError::EmptySort(
                    signature.sort_name(SortId(i)).to_string(),
                ));
            }
        }
        Ok(DomainSizes(sizes.to_vec()))
    }

    /// Single-sorted or uniform convenience: every sort gets size `n`.
    pub fn uniform(signature: &Signature, n: usize) -> Result<Self, StructureError> {
        DomainSizes::new(signature, &vec![n; signature.sort_count()])
    }

    pub fn size(&self, sort: SortId) -> usize {
        self.0[sort.0]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Number of sort-appropriate tuples for the given argument sorts.
    pub fn tuple_count(&self, arg_sorts: &[SortId]) -> usize {
        arg_sorts.iter().map(|s| self.size(*s)).product()
    }
}

/// A finite structure: an interpretation of every relation symbol as a set of
/// sort-appropriate integer tuples. Immutable from the outside once built.
#[derive(Debug, Clone)]
pub struct Structure {
    signature: Arc<Signature>,
    sizes: DomainSizes,
    interp: Vec<HashSet<Vec<u32>>>,
}

impl Structure {
    pub fn empty(signature: Arc<Signature>, sizes: DomainSizes) -> Self {
        let interp = signature.rel_ids().map(|_| HashSet::new()).collect();
        Structure {
            signature,
            sizes,
            interp,
        }
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.signature
    }

    pub fn sizes(&self) -> &DomainSizes {
        &self.sizes
    }

    pub fn check_tuple(&self, rel: RelId, tuple: &[u32]) -> Result<(), StructureError> {
        let r = self.signature.relation(rel);
        if tuple.len() != r.arity() {
            return Err(StructureError::ArityMismatch {
                rel: r.name.clone(),
                expected: r.arity(),
                got: tuple.len(),
            });
        }
        for (i, &e) in tuple.iter().enumerate() {
            let sort = r.arg_sorts[i];
            if (e as usize) >= self.sizes.size(sort) {
                return Err(StructureError::ElementOutOfRange {
                    element: e,
                    sort: self.signature.sort_name(sort).to_string(),
                    size: self.sizes.size(sort),
                });
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, rel: RelId, tuple: Vec<u32>) -> Result<(), StructureError> {
        self.check_tuple(rel, &tuple)?;
        self.interp[rel.0].insert(tuple);
        Ok(())
    }

    /// Insert without sort checking; for tuples produced by grounding,
    /// which are valid by construction.
    pub(crate) fn insert_trusted(&mut self, rel: RelId, tuple: Vec<u32>) {
        self.interp[rel.0].insert(tuple);
    }

    pub fn remove(&mut self, rel: RelId, tuple: &[u32]) {
        self.interp[rel.0].remove(tuple);
    }

    pub fn set(&mut self, rel: RelId, tuple: Vec<u32>, present: bool) -> Result<(), StructureError> {
        if present {
            self.insert(rel, tuple)
        } else {
            self.check_tuple(rel, &tuple)?;
            self.interp[rel.0].remove(&tuple);
            Ok(())
        }
    }

    pub fn holds(&self, rel: RelId, tuple: &[u32]) -> bool {
        self.interp[rel.0].contains(tuple)
    }

    pub fn tuples(&self, rel: RelId) -> &HashSet<Vec<u32>> {
        &self.interp[rel.0]
    }

    pub fn clear_relation(&mut self, rel: RelId) {
        self.interp[rel.0].clear();
    }

    /// Total number of facts, over all relations.
    pub fn fact_count(&self) -> usize {
        self.interp.iter().map(|s| s.len()).sum()
    }

    /// Apply a within-sort permutation of domain elements: `perms[sort][old]
    /// = new`. Used by exchangeability tests.
    pub fn permuted(&self, perms: &[Vec<u32>]) -> Structure {
        let mut out = Structure::empty(self.signature.clone(), self.sizes.clone());
        for (rel, r) in self.signature.relations() {
            for tuple in &self.interp[rel.0] {
                let mapped: Vec<u32> = tuple
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| perms[r.arg_sorts[i].0][e as usize])
                    .collect();
                out.interp[rel.0].insert(mapped);
            }
        }
        out
    }
}

/// A sort-respecting assignment of domain elements to variables, used as the
/// evaluation context for formulas. Scoped pushes/pops make it cheap to
/// extend under quantifiers.
#[derive(Debug, Clone, Default)]
pub struct Binding {
    entries: Vec<(Var, u32)>,
}

impl Binding {
    pub fn new() -> Self {
        Binding { entries: Vec::new() }
    }

    pub fn of(pairs: &[(Var, u32)]) -> Self {
        Binding {
            entries: pairs.to_vec(),
        }
    }

    pub fn push(&mut self, var: Var, value: u32) {
        self.entries.push((var, value));
    }

    pub fn pop(&mut self) {
        self.entries.pop();
    }

    /// Innermost binding wins, matching lexical shadowing.
    pub fn get(&self, var: &Var) -> Option<u32> {
        self.entries
            .iter()
            .rev()
            .find(|(v, _)| {
                v.sort == var.sort
                    && (std::sync::Arc::ptr_eq(&v.name, &var.name) || v.name == var.name)
            })
            .map(|(_, e)| *e)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
