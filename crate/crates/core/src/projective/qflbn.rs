use std::collections::BTreeSet;
use std::sync::Arc;

use num::{BigRational, One, ToPrimitive, Zero};

use crate::caps::Caps;
use crate::ground::{GroundAtom, Kahan};
use crate::inference::Query;
use crate::logic::{
    enumerate_diagrams_of, extensions_of, AtomicDiagram, DiagramAtom, RelId, Signature, SortId,
    Term, Var,
};
use crate::model::{Feature, FunctionFamily, Model, NodeSpec};

use super::CompileError;

/// Probability scalar for limit computations: `f64` for compiled functional
/// limits, exact rationals for threshold compilation and criticality
/// detection.
pub trait Prob:
    Clone
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + std::ops::Sub<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn to_f64_lossy(&self) -> f64;
}

impl Prob for f64 {
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Prob for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// One compiled relation: the relations its probability depends on, the
/// canonical atom patterns of those relations over the argument variables
/// `x1..xk`, and the probability per complete truth assignment of the
/// patterns (entry `i` has pattern `b` true iff `(i >> b) & 1 == 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct QfNode<P> {
    pub deps: Vec<RelId>,
    pub patterns: Vec<DiagramAtom>,
    pub table: Vec<P>,
}

/// A quantifier-free lifted network: per relation, a probability for each
/// complete atomic diagram of its dependency relations over its own argument
/// tuple. Induces a projective family of distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct QfLbn<P = f64> {
    signature: Arc<Signature>,
    order: Vec<RelId>,
    nodes: Vec<Option<QfNode<P>>>,
}

impl<P: Prob> QfLbn<P> {
    pub fn new(signature: Arc<Signature>) -> Self {
        let n = signature.relation_count();
        QfLbn {
            signature,
            order: Vec::new(),
            nodes: vec![None; n],
        }
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.signature
    }

    /// Relations in processing (topological) order.
    pub fn order(&self) -> &[RelId] {
        &self.order
    }

    pub fn push_node(&mut self, rel: RelId, node: QfNode<P>) {
        assert!(self.nodes[rel.0].is_none(), "node already compiled");
        self.nodes[rel.0] = Some(node);
        self.order.push(rel);
    }

    pub fn node(&self, rel: RelId) -> Result<&QfNode<P>, CompileError> {
        self.nodes[rel.0]
            .as_ref()
            .ok_or(CompileError::UnknownRelation(rel.0))
    }

    pub fn has_node(&self, rel: RelId) -> bool {
        self.nodes[rel.0].is_some()
    }

    /// Transitive closure of a relation set under node dependencies,
    /// ascending.
    pub fn closure(&self, rels: &BTreeSet<RelId>) -> Result<Vec<RelId>, CompileError> {
        let mut out: BTreeSet<RelId> = BTreeSet::new();
        let mut stack: Vec<RelId> = rels.iter().copied().collect();
        while let Some(r) = stack.pop() {
            if out.insert(r) {
                stack.extend(self.node(r)?.deps.iter().copied());
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Probability that the given atom (with argument tuple expressed as
    /// indices into a diagram's variable list) is true, given the diagram.
    /// `None` when the diagram does not determine all dependency atoms.
    pub fn atom_q(&self, d: &AtomicDiagram, rel: RelId, args: &[usize]) -> Option<P> {
        let node = self.nodes[rel.0].as_ref()?;
        let mut idx = 0usize;
        for (b, pat) in node.patterns.iter().enumerate() {
            let concrete: Vec<usize> = pat.args.iter().map(|&i| args[i]).collect();
            match d.lookup(pat.rel, &concrete) {
                Some(true) => idx |= 1 << b,
                Some(false) => {}
                None => return None,
            }
        }
        Some(node.table[idx].clone())
    }

    /// Probability of a full diagram over a dependency-closed relation set:
    /// the product, in topological order, of each atom's conditional
    /// probability given the diagram.
    pub fn closed_diagram_prob(&self, d: &AtomicDiagram) -> Result<P, CompileError> {
        let mut prob = P::one();
        for &rel in &self.order {
            if !d.rels().contains(&rel) {
                continue;
            }
            for (atom, value) in d.atoms().iter().zip(d.values().iter()) {
                if atom.rel != rel {
                    continue;
                }
                let q = self
                    .atom_q(d, rel, &atom.args)
                    .ok_or_else(|| CompileError::Unsupported(
                        "diagram does not cover the dependencies of its relations".into(),
                    ))?;
                let factor = if *value { q } else { P::one() - q };
                if factor.is_zero() {
                    return Ok(P::zero());
                }
                prob = prob * factor;
            }
        }
        Ok(prob)
    }

    /// Probability of an arbitrary diagram; diagrams over non-closed
    /// relation sets are summed over the completions of the missing
    /// dependency atoms.
    pub fn diagram_prob(&self, d: &AtomicDiagram, caps: &Caps) -> Result<P, CompileError> {
        let rels: BTreeSet<RelId> = d.rels().iter().copied().collect();
        let closed = self.closure(&rels)?;
        if closed.len() == rels.len() {
            return self.closed_diagram_prob(d);
        }
        let mut total = P::zero();
        for full in extensions_of(&self.signature, d, &[], &closed, caps)? {
            total = total + self.closed_diagram_prob(&full)?;
        }
        Ok(total)
    }

    pub fn is_reachable(&self, d: &AtomicDiagram, caps: &Caps) -> Result<bool, CompileError> {
        Ok(!self.diagram_prob(d, caps)?.is_zero())
    }

    /// Convert probabilities (rational limits become f64 for downstream
    /// numeric use).
    pub fn map_probs<Q2: Prob>(&self, f: impl Fn(&P) -> Q2) -> QfLbn<Q2> {
        QfLbn {
            signature: self.signature.clone(),
            order: self.order.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| {
                    n.as_ref().map(|n| QfNode {
                        deps: n.deps.clone(),
                        patterns: n.patterns.clone(),
                        table: n.table.iter().map(&f).collect(),
                    })
                })
                .collect(),
        }
    }
}

impl QfLbn<f64> {
    /// Render the network as an ordinary model: each compiled relation
    /// becomes a functional node with one degenerate feature per pattern
    /// atom and a table function holding the compiled probabilities. The
    /// result grounds, samples and re-compiles to itself.
    pub fn to_model(&self) -> Result<Model, CompileError> {
        let mut nodes = Vec::with_capacity(self.signature.relation_count());
        for rel in self.signature.rel_ids() {
            let node = self.node(rel)?;
            let xvars = arg_vars(&self.signature, rel);
            if node.patterns.is_empty() {
                nodes.push(NodeSpec::Functional {
                    features: Vec::new(),
                    family: FunctionFamily::constant(node.table[0]),
                });
                continue;
            }
            let features: Vec<Feature> = node
                .patterns
                .iter()
                .enumerate()
                .map(|(i, pat)| Feature {
                    name: format!("d{}", i),
                    formula: crate::logic::Formula::Atom {
                        rel: pat.rel,
                        args: pat.args.iter().map(|&a| Term::Var(xvars[a].clone())).collect(),
                    },
                    condition: None,
                    binders: Vec::new(),
                })
                .collect();
            nodes.push(NodeSpec::Functional {
                features,
                family: FunctionFamily::table(node.patterns.len(), node.table.clone()),
            });
        }
        let extra = vec![BTreeSet::new(); nodes.len()];
        Model::new(self.signature.clone(), nodes, extra)
            .map_err(|e| CompileError::Model(e.to_string()))
    }
}

pub(crate) fn arg_vars(sig: &Signature, rel: RelId) -> Vec<Var> {
    sig.relation(rel)
        .arg_sorts
        .iter()
        .enumerate()
        .map(|(i, s)| Var::new(&format!("x{}", i + 1), *s))
        .collect()
}

/// Exact probability of a ground query under the asymptotic limit: sum of
/// diagram probabilities consistent with target and evidence, normalized by
/// the evidence mass. Element identity only matters up to equality, so the
/// named elements become diagram variables.
pub fn limit_query(net: &QfLbn<f64>, query: &Query, caps: &Caps) -> Result<f64, CompileError> {
    // distinct (sort, element) pairs -> variables
    let mut elems: BTreeSet<(SortId, u32)> = BTreeSet::new();
    let mut rels: BTreeSet<RelId> = BTreeSet::new();
    let mut collect = |atom: &GroundAtom| {
        rels.insert(atom.rel);
        let sorts = &net.signature().relation(atom.rel).arg_sorts;
        for (i, &e) in atom.args.iter().enumerate() {
            elems.insert((sorts[i], e));
        }
    };
    collect(&query.target.atom);
    for l in &query.evidence {
        collect(&l.atom);
    }
    let elems: Vec<(SortId, u32)> = elems.into_iter().collect();
    let vars: Vec<Var> = elems
        .iter()
        .enumerate()
        .map(|(i, (s, _))| Var::new(&format!("e{}", i), *s))
        .collect();
    let var_of = |sort: SortId, e: u32| -> usize {
        elems.iter().position(|&(s, v)| s == sort && v == e).unwrap()
    };
    let atom_indices = |atom: &GroundAtom| -> Vec<usize> {
        let sorts = &net.signature().relation(atom.rel).arg_sorts;
        atom.args
            .iter()
            .enumerate()
            .map(|(i, &e)| var_of(sorts[i], e))
            .collect()
    };
    let closed = net.closure(&rels)?;
    let mut num = Kahan::default();
    let mut den = Kahan::default();
    let consistent = |d: &AtomicDiagram, atom: &GroundAtom, positive: bool| -> bool {
        d.lookup(atom.rel, &atom_indices(atom)) == Some(positive)
    };
    if vars.is_empty() {
        return Err(CompileError::Unsupported("query mentions no elements".into()));
    }
    for d in enumerate_diagrams_of(net.signature(), &closed, &vars, caps)? {
        if !query.evidence.iter().all(|l| consistent(&d, &l.atom, l.positive)) {
            continue;
        }
        let p = net.closed_diagram_prob(&d)?.to_f64_lossy();
        den.add(p);
        if consistent(&d, &query.target.atom, query.target.positive) {
            num.add(p);
        }
    }
    if den.total() <= 0.0 {
        return Err(CompileError::ZeroEvidence);
    }
    Ok(num.total() / den.total())
}

/// Remove dependency relations whose atoms provably never change the
/// compiled probability (every pair of table entries that differ only on
/// that relation's patterns agree). Keeps output tables minimal and, for
/// context-independent nodes, collapses them to a single entry.
pub fn prune_node<P: Prob>(node: QfNode<P>) -> QfNode<P> {
    let mut node = node;
    'retry: loop {
        let rels: Vec<RelId> = node.deps.clone();
        for w in rels {
            let keep_idx: Vec<usize> = node
                .patterns
                .iter()
                .enumerate()
                .filter(|(_, p)| p.rel != w)
                .map(|(i, _)| i)
                .collect();
            if keep_idx.len() == node.patterns.len() {
                continue;
            }
            // does the table depend on w's patterns?
            let project = |j: usize| -> usize {
                let mut key = 0usize;
                for (nb, &ob) in keep_idx.iter().enumerate() {
                    if (j >> ob) & 1 == 1 {
                        key |= 1 << nb;
                    }
                }
                key
            };
            let new_len = 1usize << keep_idx.len();
            let mut rep: Vec<Option<&P>> = vec![None; new_len];
            let mut depends = false;
            for (j, v) in node.table.iter().enumerate() {
                let key = project(j);
                match rep[key] {
                    None => rep[key] = Some(v),
                    Some(prev) => {
                        if prev != v {
                            depends = true;
                            break;
                        }
                    }
                }
            }
            if depends {
                continue;
            }
            let new_table: Vec<P> = (0..node.table.len())
                .filter(|&j| {
                    // representative: all w-bits zero
                    node.patterns
                        .iter()
                        .enumerate()
                        .all(|(b, p)| p.rel != w || (j >> b) & 1 == 0)
                })
                .map(|j| node.table[j].clone())
                .collect();
            debug_assert_eq!(new_table.len(), new_len);
            node = QfNode {
                deps: node.deps.iter().copied().filter(|&r| r != w).collect(),
                patterns: keep_idx.iter().map(|&i| node.patterns[i].clone()).collect(),
                table: new_table,
            };
            continue 'retry;
        }
        return node;
    }
}

