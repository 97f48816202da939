//! Grounding semantics: the Bayesian network a model induces over the ground
//! atoms of a finite domain, with pointwise conditional probabilities and
//! exact world enumeration.
//!
//! Conditional probability tables are never materialized: a functional
//! node's probability conditions on entire parent layers, so tables would be
//! exponentially large. Everything is computed pointwise via [`atom_prob`].

use num::ToPrimitive;
use thiserror::Error;

use crate::caps::Caps;
use crate::logic::{Binding, DomainSizes, EvalError, Evaluator, Formula, RelId, Structure, Term};
use crate::model::{FamilyError, Model, NodeSpec};

/// A ground atom: relation symbol plus a sort-appropriate element tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundAtom {
    pub rel: RelId,
    pub args: Vec<u32>,
}

impl GroundAtom {
    pub fn new(rel: RelId, args: Vec<u32>) -> Self {
        GroundAtom { rel, args }
    }

    pub fn display(&self, model: &Model) -> String {
        let name = &model.signature().relation(self.rel).name;
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        format!("{}({})", name, args.join(", "))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundError {
    #[error("partition violation at {atom}: {true_cases} cases are true (expected exactly 1)")]
    PartitionViolation { atom: String, true_cases: usize },
    #[error("feature `{feature}` at {atom}: conditioning formula never satisfied")]
    EmptyFeatureCondition { atom: String, feature: String },
    #[error("{atoms} ground atoms exceed enumeration cap {cap}")]
    CapExceeded { atoms: usize, cap: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("domain sizes: {0}")]
    Sizes(String),
}

/// The grounded network: the model, the domain sizes, and the ground atoms
/// listed one layer per relation following the model's topological order.
#[derive(Debug, Clone)]
pub struct GroundNet {
    model: Model,
    sizes: DomainSizes,
    layers: Vec<(RelId, Vec<GroundAtom>)>,
}

/// Ground a model on the given domain sizes. The layering is deterministic:
/// relations in topological order, tuples lexicographic.
pub fn ground(model: &Model, sizes: &DomainSizes) -> Result<GroundNet, GroundError> {
    if sizes.as_slice().len() != model.signature().sort_count() {
        return Err(GroundError::Sizes(format!(
            "expected {} sorts, got {}",
            model.signature().sort_count(),
            sizes.as_slice().len()
        )));
    }
    let mut layers = Vec::new();
    for &rel in model.topological_order() {
        layers.push((rel, relation_atoms(model, sizes, rel)));
    }
    Ok(GroundNet {
        model: model.clone(),
        sizes: sizes.clone(),
        layers,
    })
}

fn relation_atoms(model: &Model, sizes: &DomainSizes, rel: RelId) -> Vec<GroundAtom> {
    let r = model.signature().relation(rel);
    let dims: Vec<usize> = r.arg_sorts.iter().map(|s| sizes.size(*s)).collect();
    let mut out = Vec::with_capacity(dims.iter().product());
    let mut tuple = vec![0u32; dims.len()];
    if dims.is_empty() {
        out.push(GroundAtom::new(rel, Vec::new()));
        return out;
    }
    'outer: loop {
        out.push(GroundAtom::new(rel, tuple.clone()));
        for i in (0..tuple.len()).rev() {
            tuple[i] += 1;
            if (tuple[i] as usize) < dims[i] {
                continue 'outer;
            }
            tuple[i] = 0;
        }
        break;
    }
    out
}

impl GroundNet {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn sizes(&self) -> &DomainSizes {
        &self.sizes
    }

    pub fn layers(&self) -> &[(RelId, Vec<GroundAtom>)] {
        &self.layers
    }

    pub fn atom_count(&self) -> usize {
        self.layers.iter().map(|(_, l)| l.len()).sum()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &GroundAtom> {
        self.layers.iter().flat_map(|(_, l)| l.iter())
    }
}

/// Per-model evaluation tables computed once and shared by every world
/// evaluator of a sampling run: case probabilities in f64, argument
/// variables per relation, and stable storage for conditional-feature
/// conjunctions (so they hit the evaluator's address-keyed count cache).
#[derive(Debug, Clone)]
pub struct ModelTables {
    case_probs: Vec<Vec<f64>>,
    cond_conj: Vec<Vec<Option<Formula>>>,
    arg_vars: Vec<Vec<crate::logic::Var>>,
    // fast path for roots declared as a single always-true case
    root_const: Vec<Option<f64>>,
}

impl ModelTables {
    /// Constant probability of a root relation, when its node is a single
    /// always-true case (the common layout for root priors).
    pub fn root_const(&self, rel: RelId) -> Option<f64> {
        self.root_const[rel.0]
    }

    pub fn new(model: &Model) -> Self {
        let case_probs = model
            .nodes()
            .map(|(_, n)| match n {
                NodeSpec::Partition { cases } => {
                    cases.iter().map(|c| c.prob.to_f64().unwrap_or(f64::NAN)).collect()
                }
                NodeSpec::Functional { .. } => Vec::new(),
            })
            .collect();
        let cond_conj = model
            .nodes()
            .map(|(_, n)| match n {
                NodeSpec::Partition { .. } => Vec::new(),
                NodeSpec::Functional { features, .. } => features
                    .iter()
                    .map(|f| {
                        f.condition
                            .as_ref()
                            .map(|c| Formula::and(f.formula.clone(), c.clone()))
                    })
                    .collect(),
            })
            .collect();
        let arg_vars = model.nodes().map(|(rel, _)| model.arg_vars(rel)).collect();
        let root_const = model
            .nodes()
            .map(|(_, n)| match n {
                NodeSpec::Partition { cases } if cases.len() == 1
                    && matches!(cases[0].formula, Formula::Bool(true)) =>
                {
                    cases[0].prob.to_f64()
                }
                NodeSpec::Functional { features, family }
                    if features.is_empty() && family.kind == crate::model::FamilyKind::Constant =>
                {
                    Some(family.params[0])
                }
                _ => None,
            })
            .collect();
        ModelTables {
            case_probs,
            cond_conj,
            arg_vars,
            root_const,
        }
    }
}

/// Evaluation context for one world: wraps a CPL evaluator (with its
/// frequency memoization) plus the shared model tables.
pub struct WorldEval<'a> {
    model: &'a Model,
    eval: Evaluator<'a>,
    tables: std::borrow::Cow<'a, ModelTables>,
    binding: Binding,
}

impl<'a> WorldEval<'a> {
    pub fn new(model: &'a Model, world: &'a Structure) -> Self {
        WorldEval {
            model,
            eval: Evaluator::new(world),
            tables: std::borrow::Cow::Owned(ModelTables::new(model)),
            binding: Binding::new(),
        }
    }

    /// Reuse tables across many worlds of the same model.
    pub fn with_tables(model: &'a Model, tables: &'a ModelTables, world: &'a Structure) -> Self {
        WorldEval {
            model,
            eval: Evaluator::new(world),
            tables: std::borrow::Cow::Borrowed(tables),
            binding: Binding::new(),
        }
    }

    /// Conditional probability of `atom` being true given the world's
    /// interpretation of its parents.
    pub fn atom_prob(&mut self, atom: &GroundAtom) -> Result<f64, GroundError> {
        if let Some(p) = self.tables.root_const[atom.rel.0] {
            return Ok(p);
        }
        let mut binding = std::mem::take(&mut self.binding);
        binding.clear();
        for (v, &e) in self.tables.arg_vars[atom.rel.0].iter().zip(atom.args.iter()) {
            binding.push(v.clone(), e);
        }
        let result = self.atom_prob_inner(atom, &mut binding);
        self.binding = binding;
        result
    }

    fn atom_prob_inner(
        &mut self,
        atom: &GroundAtom,
        binding: &mut Binding,
    ) -> Result<f64, GroundError> {
        match self.model.node(atom.rel) {
            NodeSpec::Partition { cases } => {
                let mut chosen = None;
                let mut true_cases = 0usize;
                for (i, c) in cases.iter().enumerate() {
                    if self.eval.evaluate(binding, &c.formula)? {
                        true_cases += 1;
                        chosen = Some(i);
                    }
                }
                if true_cases != 1 {
                    return Err(GroundError::PartitionViolation {
                        atom: atom.display(self.model),
                        true_cases,
                    });
                }
                Ok(self.tables.case_probs[atom.rel.0][chosen.unwrap()])
            }
            NodeSpec::Functional { features, family } => {
                let mut inputs = Vec::with_capacity(features.len());
                for (i, f) in features.iter().enumerate() {
                    inputs.push(self.feature_frequency(binding, atom, f, i)?);
                }
                Ok(family.eval(&inputs)?)
            }
        }
    }

    fn feature_frequency(
        &mut self,
        binding: &mut Binding,
        atom: &GroundAtom,
        feature: &crate::model::Feature,
        index: usize,
    ) -> Result<f64, GroundError> {
        match &feature.condition {
            None => {
                if feature.binders.is_empty() {
                    return Ok(self.eval.evaluate(binding, &feature.formula)? as u64 as f64);
                }
                let count = self.eval.count_memo(binding, &feature.formula, &feature.binders)?;
                let total: u64 = feature
                    .binders
                    .iter()
                    .map(|v| self.eval.structure().sizes().size(v.sort) as u64)
                    .product();
                Ok(count as f64 / total as f64)
            }
            Some(cond) => {
                let den = self.eval.count_memo(binding, cond, &feature.binders)?;
                if den == 0 {
                    return Err(GroundError::EmptyFeatureCondition {
                        atom: atom.display(self.model),
                        feature: feature.name.clone(),
                    });
                }
                let conj = self.tables.cond_conj[atom.rel.0][index].as_ref().unwrap();
                let num = self.eval.count_memo(binding, conj, &feature.binders)?;
                Ok(num as f64 / den as f64)
            }
        }
    }
}

/// One-shot conditional probability of a ground atom given a (partial) world
/// interpreting all of its parents.
pub fn atom_prob(model: &Model, world: &Structure, atom: &GroundAtom) -> Result<f64, GroundError> {
    WorldEval::new(model, world).atom_prob(atom)
}

/// Log-probability of a total world under the grounded network: the sum in
/// layer order of `log p` / `log (1-p)` per atom. `-inf` is a legal result.
pub fn world_log_prob(model: &Model, world: &Structure) -> Result<f64, GroundError> {
    let net = ground(model, world.sizes())?;
    let tables = ModelTables::new(model);
    let mut ev = WorldEval::with_tables(model, &tables, world);
    let mut total = 0.0f64;
    for (rel, layer) in net.layers() {
        for atom in layer {
            let p = ev.atom_prob(atom)?;
            let present = world.holds(*rel, &atom.args);
            let term = if present { p.ln() } else { (1.0 - p).ln() };
            total += term;
            if total == f64::NEG_INFINITY {
                return Ok(total);
            }
        }
    }
    Ok(total)
}

/// Visit all `2^n` worlds of the grounded network along with their exact
/// probabilities (computed as products, not via logs). The visitor returns
/// `false` to stop early.
pub fn for_each_world(
    model: &Model,
    sizes: &DomainSizes,
    caps: &Caps,
    mut visit: impl FnMut(&Structure, f64) -> Result<bool, GroundError>,
) -> Result<(), GroundError> {
    let net = ground(model, sizes)?;
    let n = net.atom_count();
    if n > caps.max_world_atoms.min(62) {
        return Err(GroundError::CapExceeded {
            atoms: n,
            cap: caps.max_world_atoms.min(62),
        });
    }
    let atoms: Vec<&GroundAtom> = net.atoms().collect();
    let tables = ModelTables::new(model);
    for bits in 0u64..(1u64 << n) {
        let mut world = Structure::empty(model.signature().clone(), sizes.clone());
        for (i, atom) in atoms.iter().enumerate() {
            if (bits >> i) & 1 == 1 {
                world.insert_trusted(atom.rel, atom.args.clone());
            }
        }
        let mut ev = WorldEval::with_tables(model, &tables, &world);
        let mut prob = 1.0f64;
        for (rel, layer) in net.layers() {
            for atom in layer {
                let p = ev.atom_prob(atom)?;
                prob *= if world.holds(*rel, &atom.args) { p } else { 1.0 - p };
                if prob == 0.0 {
                    break;
                }
            }
        }
        if !visit(&world, prob)? {
            return Ok(());
        }
    }
    Ok(())
}

/// All worlds with their probabilities, materialized. Prefer
/// [`for_each_world`] for larger grounds.
pub fn enumerate_worlds(
    model: &Model,
    sizes: &DomainSizes,
    caps: &Caps,
) -> Result<Vec<(Structure, f64)>, GroundError> {
    let mut out = Vec::new();
    for_each_world(model, sizes, caps, |w, p| {
        out.push((w.clone(), p));
        Ok(true)
    })?;
    Ok(out)
}

/// Kahan–Babuska compensated accumulator, used wherever world or diagram
/// probabilities are summed against tight tolerances.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Evaluate a ground literal formula on a world.
pub fn holds_literal(world: &Structure, atom: &GroundAtom, positive: bool) -> bool {
    world.holds(atom.rel, &atom.args) == positive
}

/// Ground atom as a closed formula (constants only); used to parse/print
/// queries.
pub fn atom_to_formula(model: &Model, atom: &GroundAtom) -> Formula {
    let r = model.signature().relation(atom.rel);
    Formula::Atom {
        rel: atom.rel,
        args: atom
            .args
            .iter()
            .zip(r.arg_sorts.iter())
            .map(|(&v, &s)| Term::Const { value: v, sort: s })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Signature;
    use crate::model::PartitionCase;
    use num::BigRational;
    use std::collections::BTreeSet;
    use std::str::FromStr;

    fn rational(s: &str) -> BigRational {
        let f = f64::from_str(s).unwrap();
        BigRational::from_float(f).unwrap()
    }

    fn two_rel_model() -> Model {
        // Q root 0.3; R | Q(x1) -> 0.7 else 0.2 (quantifier-free chain)
        let sig = Signature::build(&["s"], &[("Q", &["s"]), ("R", &["s"])]).unwrap();
        let q = Formula::Atom {
            rel: RelId(0),
            args: vec![Term::Var(crate::logic::Var::new("x1", crate::logic::SortId(0)))],
        };
        let nodes = vec![
            NodeSpec::Partition {
                cases: vec![PartitionCase {
                    formula: Formula::Bool(true),
                    prob: rational("0.3"),
                }],
            },
            NodeSpec::Partition {
                cases: vec![
                    PartitionCase {
                        formula: q.clone(),
                        prob: rational("0.7"),
                    },
                    PartitionCase {
                        formula: Formula::not(q),
                        prob: rational("0.2"),
                    },
                ],
            },
        ];
        Model::new(sig, nodes, vec![BTreeSet::new(), BTreeSet::new()]).unwrap()
    }

    #[test]
    fn ground_atom_counts() {
        let model = two_rel_model();
        let sizes = DomainSizes::uniform(model.signature(), 3).unwrap();
        let net = ground(&model, &sizes).unwrap();
        assert_eq!(net.atom_count(), 6);
    }

    #[test]
    fn empty_domain_rejected() {
        let model = two_rel_model();
        assert!(DomainSizes::uniform(model.signature(), 0).is_err());
    }

    #[test]
    fn world_probabilities_sum_to_one() {
        let model = two_rel_model();
        let sizes = DomainSizes::uniform(model.signature(), 3).unwrap();
        let mut total = Kahan::default();
        for_each_world(&model, &sizes, &Caps::default(), |_, p| {
            total.add(p);
            Ok(true)
        })
        .unwrap();
        assert!((total.total() - 1.0).abs() < 1e-12, "sum = {}", total.total());
    }

    #[test]
    fn root_constant_prob() {
        let model = two_rel_model();
        let sizes = DomainSizes::uniform(model.signature(), 3).unwrap();
        let world = Structure::empty(model.signature().clone(), sizes);
        let p = atom_prob(&model, &world, &GroundAtom::new(RelId(0), vec![0])).unwrap();
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cap_exceeded() {
        let model = two_rel_model();
        let sizes = DomainSizes::uniform(model.signature(), 30).unwrap();
        let err = enumerate_worlds(&model, &sizes, &Caps::default()).unwrap_err();
        assert!(matches!(err, GroundError::CapExceeded { .. }));
    }

    #[test]
    fn zero_prob_world_is_neg_infinity() {
        // mu(Q) = 1 makes any world missing a Q atom impossible
        let sig = Signature::build(&["s"], &[("Q", &["s"])]).unwrap();
        let nodes = vec![NodeSpec::Partition {
            cases: vec![PartitionCase {
                formula: Formula::Bool(true),
                prob: BigRational::from_integer(1.into()),
            }],
        }];
        let model = Model::new(sig, nodes, vec![BTreeSet::new()]).unwrap();
        let sizes = DomainSizes::uniform(model.signature(), 2).unwrap();
        let world = Structure::empty(model.signature().clone(), sizes);
        assert_eq!(world_log_prob(&model, &world).unwrap(), f64::NEG_INFINITY);
    }
}
