use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Index of a sort within its [`Signature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SortId(pub usize);

/// Index of a relation symbol within its [`Signature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelId(pub usize);

/// A relation symbol: a name plus the list of argument sorts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub arg_sorts: Vec<SortId>,
}

impl Relation {
    pub fn arity(&self) -> usize {
        self.arg_sorts.len()
    }
}

/// A multi-sorted relational signature without equality or function symbols.
/// Sorts and relations keep their declaration order; that order is the
/// canonical iteration order everywhere in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    sorts: Vec<String>,
    relations: Vec<Relation>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("duplicate sort `{0}`")]
    DuplicateSort(String),
    #[error("duplicate relation `{0}`")]
    DuplicateRelation(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
}

impl Signature {
    pub fn new() -> Self {
        Signature {
            sorts: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn add_sort(&mut self, name: &str) -> Result<SortId, SignatureError> {
        if self.sorts.iter().any(|s| s == name) {
            return Err(SignatureError::DuplicateSort(name.to_string()));
        }
        self.sorts.push(name.to_string());
        Ok(SortId(self.sorts.len() - 1))
    }

    pub fn add_relation(&mut self, name: &str, arg_sorts: Vec<SortId>) -> Result<RelId, SignatureError> {
        if self.relations.iter().any(|r| r.name == name) {
            return Err(SignatureError::DuplicateRelation(name.to_string()));
        }
        for s in &arg_sorts {
            if s.0 >= self.sorts.len() {
                return Err(SignatureError::UnknownSort(format!("#{}", s.0)));
            }
        }
        self.relations.push(Relation {
            name: name.to_string(),
            arg_sorts,
        });
        Ok(RelId(self.relations.len() - 1))
    }

    /// Convenience constructor from `(name, arg sort names)` pairs over the
    /// given sorts; used pervasively by tests.
    pub fn build(
        sorts: &[&str],
        relations: &[(&str, &[&str])],
    ) -> Result<Arc<Signature>, SignatureError> {
        let mut sig = Signature::new();
        for s in sorts {
            sig.add_sort(s)?;
        }
        for (name, args) in relations {
            let ids = args
                .iter()
                .map(|a| sig.sort_id(a).ok_or_else(|| SignatureError::UnknownSort(a.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            sig.add_relation(name, ids)?;
        }
        Ok(Arc::new(sig))
    }

    pub fn sort_count(&self) -> usize {
        self.sorts.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn sort_name(&self, id: SortId) -> &str {
        &self.sorts[id.0]
    }

    pub fn sort_id(&self, name: &str) -> Option<SortId> {
        self.sorts.iter().position(|s| s == name).map(SortId)
    }

    pub fn relation(&self, id: RelId) -> &Relation {
        &self.relations[id.0]
    }

    pub fn rel_id(&self, name: &str) -> Option<RelId> {
        self.relations.iter().position(|r| r.name == name).map(RelId)
    }

    pub fn sorts(&self) -> impl Iterator<Item = (SortId, &str)> {
        self.sorts.iter().enumerate().map(|(i, s)| (SortId(i), s.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelId, &Relation)> {
        self.relations.iter().enumerate().map(|(i, r)| (RelId(i), r))
    }

    pub fn rel_ids(&self) -> impl Iterator<Item = RelId> {
        (0..self.relations.len()).map(RelId)
    }

    /// Highest relation arity in the signature.
    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|r| r.arity()).max().unwrap_or(0)
    }
}

impl Default for Signature {
    fn default() -> Self {
        Signature::new()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sorts {
            writeln!(f, "sort {};", s)?;
        }
        for r in &self.relations {
            let args: Vec<&str> = r.arg_sorts.iter().map(|s| self.sort_name(*s)).collect();
            writeln!(f, "relation {}({});", r.name, args.join(", "))?;
        }
        Ok(())
    }
}
