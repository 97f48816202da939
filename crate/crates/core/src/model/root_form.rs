use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num::{BigRational, One, Zero};
use thiserror::Error;

use crate::logic::{substitute, Formula, RelId, Signature, Term, Var};

use super::{Model, ModelError, NodeSpec, PartitionCase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootFormError {
    #[error("root-form transformation requires a partition model; `{0}` is functional")]
    FunctionalNode(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("signature error: {0}")]
    Signature(String),
}

/// Rewrite a partition model so that every relation is either a root or a
/// deterministic (0/1) child of roots. Each case `(chi_i, mu_i)` of a
/// transformed node gets a fresh root relation of the same sorts carrying
/// `mu_i`; the node itself becomes true exactly when the case that selects
/// it has its coin set. Mentions of transformed relations in later nodes are
/// inlined with their deterministic definitions, so the output formulas only
/// mention roots. The induced distribution over the original signature is
/// unchanged.
pub fn to_root_form(model: &Model) -> Result<Model, RootFormError> {
    for (rel, node) in model.nodes() {
        if !node.is_partition() {
            return Err(RootFormError::FunctionalNode(
                model.signature().relation(rel).name.clone(),
            ));
        }
    }
    let old_sig = model.signature();

    // Nodes already in target form are kept as-is; everything else gets the
    // coin construction.
    let needs_transform = |rel: RelId| -> bool {
        if model.is_root(rel) {
            return false;
        }
        match model.node(rel) {
            NodeSpec::Partition { cases } => cases
                .iter()
                .any(|c| !(c.prob.is_zero() || c.prob.is_one())),
            NodeSpec::Functional { .. } => unreachable!(),
        }
    };

    // New signature: original relations in order, then coin relations in
    // (relation, case) order.
    let mut sig = Signature::new();
    for (_, s) in old_sig.sorts() {
        sig.add_sort(s).map_err(|e| RootFormError::Signature(e.to_string()))?;
    }
    for (_, r) in old_sig.relations() {
        sig.add_relation(&r.name, r.arg_sorts.clone())
            .map_err(|e| RootFormError::Signature(e.to_string()))?;
    }
    let mut coin_ids: BTreeMap<(RelId, usize), RelId> = BTreeMap::new();
    for (rel, r) in old_sig.relations() {
        if !needs_transform(rel) {
            continue;
        }
        if let NodeSpec::Partition { cases } = model.node(rel) {
            for i in 0..cases.len() {
                let coin = sig
                    .add_relation(&coin_name(&sig, &r.name, i), r.arg_sorts.clone())
                    .map_err(|e| RootFormError::Signature(e.to_string()))?;
                coin_ids.insert((rel, i), coin);
            }
        }
    }
    let sig = Arc::new(sig);

    // Deterministic definitions of processed non-root relations, used to
    // inline their mentions in later nodes. Keyed by the *old* relation id;
    // formulas are over the new signature with argument variables x1..xk.
    let mut definitions: BTreeMap<RelId, Formula> = BTreeMap::new();
    let mut nodes: Vec<Option<NodeSpec>> = vec![None; sig.relation_count()];

    for &rel in model.topological_order() {
        let cases = match model.node(rel) {
            NodeSpec::Partition { cases } => cases.clone(),
            NodeSpec::Functional { .. } => unreachable!(),
        };
        // Inline mentions of already-transformed relations (old and new ids
        // for original relations coincide by construction).
        let inlined: Vec<PartitionCase> = cases
            .iter()
            .map(|c| PartitionCase {
                formula: inline_definitions(&c.formula, &definitions, model),
                prob: c.prob.clone(),
            })
            .collect();
        if !needs_transform(rel) {
            if !model.is_root(rel) {
                // already deterministic over roots: its definition is the
                // disjunction of its probability-one cases
                let def = Formula::any(
                    inlined
                        .iter()
                        .filter(|c| c.prob.is_one())
                        .map(|c| c.formula.clone())
                        .collect(),
                );
                definitions.insert(rel, def);
            }
            nodes[rel.0] = Some(NodeSpec::Partition { cases: inlined });
            continue;
        }
        // coins become roots carrying the original case probabilities
        let mut picked = Vec::new();
        for (i, c) in inlined.iter().enumerate() {
            let coin = coin_ids[&(rel, i)];
            nodes[coin.0] = Some(NodeSpec::Partition {
                cases: vec![PartitionCase {
                    formula: Formula::Bool(true),
                    prob: c.prob.clone(),
                }],
            });
            let coin_atom = Formula::Atom {
                rel: coin,
                args: model.arg_vars(rel).into_iter().map(Term::Var).collect(),
            };
            picked.push(Formula::and(c.formula.clone(), coin_atom));
        }
        let def = Formula::any(picked);
        nodes[rel.0] = Some(NodeSpec::Partition {
            cases: vec![
                PartitionCase {
                    formula: def.clone(),
                    prob: BigRational::one(),
                },
                PartitionCase {
                    formula: Formula::not(def.clone()),
                    prob: BigRational::zero(),
                },
            ],
        });
        definitions.insert(rel, def);
    }

    let nodes: Vec<NodeSpec> = nodes.into_iter().map(|n| n.unwrap()).collect();
    let extra = vec![BTreeSet::new(); nodes.len()];
    Ok(Model::new(sig, nodes, extra)?)
}

fn coin_name(sig: &Signature, base: &str, case: usize) -> String {
    let mut name = format!("{}_p{}", base, case + 1);
    while sig.rel_id(&name).is_some() {
        name.push('_');
    }
    name
}

/// Replace atoms of defined relations with their definitions, substituting
/// the atom's argument terms for the definition's x1..xk.
fn inline_definitions(
    f: &Formula,
    definitions: &BTreeMap<RelId, Formula>,
    model: &Model,
) -> Formula {
    match f {
        Formula::Bool(b) => Formula::Bool(*b),
        Formula::Atom { rel, args } => {
            if let Some(def) = definitions.get(rel) {
                // simultaneous substitution via fresh temporaries so that
                // argument terms named like x1..xk are not re-substituted
                let xs = model.arg_vars(*rel);
                let temps: Vec<Var> = xs
                    .iter()
                    .enumerate()
                    .map(|(i, v)| Var::new(&format!("__tmp{}", i), v.sort))
                    .collect();
                let mut body = def.clone();
                for (v, tmp) in xs.iter().zip(&temps) {
                    body = substitute(&body, v, &Term::Var(tmp.clone()));
                }
                for (tmp, t) in temps.iter().zip(args) {
                    body = substitute(&body, tmp, t);
                }
                body
            } else {
                f.clone()
            }
        }
        Formula::Not(g) => Formula::not(inline_definitions(g, definitions, model)),
        Formula::And(a, b) => Formula::and(
            inline_definitions(a, definitions, model),
            inline_definitions(b, definitions, model),
        ),
        Formula::Or(a, b) => Formula::or(
            inline_definitions(a, definitions, model),
            inline_definitions(b, definitions, model),
        ),
        Formula::Implies(a, b) => Formula::implies(
            inline_definitions(a, definitions, model),
            inline_definitions(b, definitions, model),
        ),
        Formula::Forall(v, g) => Formula::forall(v.clone(), inline_definitions(g, definitions, model)),
        Formula::Exists(v, g) => Formula::exists(v.clone(), inline_definitions(g, definitions, model)),
        Formula::FreqCmp(c) => {
            let mut c2 = (**c).clone();
            c2.lhs_num = inline_definitions(&c.lhs_num, definitions, model);
            c2.lhs_den = inline_definitions(&c.lhs_den, definitions, model);
            c2.rhs_num = inline_definitions(&c.rhs_num, definitions, model);
            c2.rhs_den = inline_definitions(&c.rhs_den, definitions, model);
            Formula::FreqCmp(Box::new(c2))
        }
    }
}
