//! Model representation: a DAG over a relational signature where each node
//! carries either a partition of formulas with probabilities or a list of
//! frequency features with a parametric aggregation function.

mod family;
mod root_form;
mod validate;

pub use family::{FamilyError, FamilyKind, FunctionFamily, ParamBounds};
pub use root_form::{to_root_form, RootFormError};
pub use validate::{validate, Diagnostic};

use std::collections::BTreeSet;
use std::sync::Arc;

use num::BigRational;
use thiserror::Error;

use crate::logic::{Formula, RelId, Signature, Var};

/// One partition case: the selecting formula and its probability. The
/// probability is kept as an exact rational so threshold-limit compilation
/// can detect criticality exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCase {
    pub formula: Formula,
    pub prob: BigRational,
}

/// One frequency feature of a functional node: a first-order formula, an
/// optional conditioning formula, and the tuple of variables the frequency
/// ranges over.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub formula: Formula,
    pub condition: Option<Formula>,
    pub binders: Vec<Var>,
}

/// What a node computes: a probability selected by a partition of formulas,
/// or a function of feature frequencies.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeSpec {
    Partition { cases: Vec<PartitionCase> },
    Functional { features: Vec<Feature>, family: FunctionFamily },
}

impl NodeSpec {
    pub fn is_partition(&self) -> bool {
        matches!(self, NodeSpec::Partition { .. })
    }

    /// All relations mentioned by the node's formulas.
    pub fn mentioned_relations(&self) -> BTreeSet<RelId> {
        let mut out = BTreeSet::new();
        match self {
            NodeSpec::Partition { cases } => {
                for c in cases {
                    out.extend(c.formula.relations());
                }
            }
            NodeSpec::Functional { features, .. } => {
                for f in features {
                    out.extend(f.formula.relations());
                    if let Some(c) = &f.condition {
                        out.extend(c.relations());
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("relation `{0}` has no node")]
    MissingNode(String),
    #[error("cycle detected through relation `{0}`")]
    Cycle(String),
    #[error("unknown relation id #{0}")]
    UnknownRelation(usize),
}

/// A lifted model: one node per relation symbol, with a DAG induced by the
/// relations each node mentions plus any explicitly declared parents.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Model {
    signature: Arc<Signature>,
    nodes: Vec<NodeSpec>,
    parents: Vec<BTreeSet<RelId>>,
    topo: Vec<RelId>,
}

impl Model {
    /// Build a model from per-relation specs (indexed by relation id) and
    /// optional extra parent declarations. Fails on cycles.
    pub fn new(
        signature: Arc<Signature>,
        nodes: Vec<NodeSpec>,
        extra_parents: Vec<BTreeSet<RelId>>,
    ) -> Result<Self, ModelError> {
        if nodes.len() != signature.relation_count() {
            let missing = signature
                .relations()
                .nth(nodes.len())
                .map(|(_, r)| r.name.clone())
                .unwrap_or_default();
            return Err(ModelError::MissingNode(missing));
        }
        let mut parents: Vec<BTreeSet<RelId>> = nodes.iter().map(|n| n.mentioned_relations()).collect();
        for (i, extra) in extra_parents.iter().enumerate() {
            parents[i].extend(extra.iter().copied());
        }
        let topo = topo_sort(&signature, &parents)?;
        Ok(Model {
            signature,
            nodes,
            parents,
            topo,
        })
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.signature
    }

    pub fn node(&self, rel: RelId) -> &NodeSpec {
        &self.nodes[rel.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (RelId, &NodeSpec)> {
        self.nodes.iter().enumerate().map(|(i, n)| (RelId(i), n))
    }

    pub fn parents(&self, rel: RelId) -> &BTreeSet<RelId> {
        &self.parents[rel.0]
    }

    /// Relations in a deterministic topological order of the DAG (ties broken
    /// by declaration order).
    pub fn topological_order(&self) -> &[RelId] {
        &self.topo
    }

    pub fn is_root(&self, rel: RelId) -> bool {
        self.parents[rel.0].is_empty()
    }

    /// Strict ancestors of `rel` in the DAG.
    pub fn ancestors(&self, rel: RelId) -> BTreeSet<RelId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<RelId> = self.parents[rel.0].iter().copied().collect();
        while let Some(r) = stack.pop() {
            if out.insert(r) {
                stack.extend(self.parents[r.0].iter().copied());
            }
        }
        out
    }

    /// Strict descendants of `rel` in the DAG.
    pub fn descendants(&self, rel: RelId) -> BTreeSet<RelId> {
        let mut out = BTreeSet::new();
        for r in self.signature.rel_ids() {
            if self.ancestors(r).contains(&rel) {
                out.insert(r);
            }
        }
        out
    }

    pub fn all_partition(&self) -> bool {
        self.nodes.iter().all(|n| n.is_partition())
    }

    pub fn all_functional(&self) -> bool {
        self.nodes.iter().all(|n| !n.is_partition())
    }

    /// Quantifier-free: every formula is quantifier-free with no frequency
    /// binders, so node probabilities depend only on the atoms of the node's
    /// own argument tuple.
    pub fn is_quantifier_free(&self) -> bool {
        self.nodes.iter().all(|n| match n {
            NodeSpec::Partition { cases } => cases.iter().all(|c| c.formula.is_quantifier_free()),
            NodeSpec::Functional { features, .. } => features.iter().all(|f| {
                f.binders.is_empty()
                    && f.formula.is_quantifier_free()
                    && f.condition.as_ref().map_or(true, |c| c.is_quantifier_free())
            }),
        })
    }

    /// Replace the node of `rel` (same signature, parents recomputed).
    pub fn with_node(&self, rel: RelId, node: NodeSpec) -> Result<Model, ModelError> {
        let mut nodes = self.nodes.clone();
        nodes[rel.0] = node;
        Model::new(self.signature.clone(), nodes, vec![BTreeSet::new(); self.nodes.len()])
    }

    /// Canonical argument variables `x1..xk` for a relation, with its sorts.
    pub fn arg_vars(&self, rel: RelId) -> Vec<Var> {
        let r = self.signature.relation(rel);
        r.arg_sorts
            .iter()
            .enumerate()
            .map(|(i, s)| Var::new(&format!("x{}", i + 1), *s))
            .collect()
    }
}

fn topo_sort(signature: &Signature, parents: &[BTreeSet<RelId>]) -> Result<Vec<RelId>, ModelError> {
    let n = parents.len();
    let mut indeg = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, ps) in parents.iter().enumerate() {
        for p in ps {
            if p.0 >= n {
                return Err(ModelError::UnknownRelation(p.0));
            }
            if p.0 == i {
                return Err(ModelError::Cycle(signature.relation(RelId(i)).name.clone()));
            }
            indeg[i] += 1;
            children[p.0].push(i);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        ready.sort_unstable();
        let next = ready.remove(0);
        order.push(RelId(next));
        for &c in &children[next] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.push(c);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap();
        return Err(ModelError::Cycle(signature.relation(RelId(stuck)).name.clone()));
    }
    Ok(order)
}
