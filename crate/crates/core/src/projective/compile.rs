use std::collections::BTreeSet;

use num::{BigRational, Zero};

use crate::caps::Caps;
use crate::logic::{atoms_over, AtomicDiagram, Formula, RelId};
use crate::model::{Model, NodeSpec};
use crate::parse::print_formula;

use super::freq_limit::freq_limit;
use super::qe::{qe, simplify};
use super::qflbn::{arg_vars, prune_node, Prob, QfLbn, QfNode};
use super::CompileError;

/// Per-relation compilation byproducts kept for learning: the feature
/// frequency limits that fed the aggregation function, per diagram index.
#[derive(Debug, Clone, Default)]
pub struct CompiledAux {
    pub inputs: Vec<Vec<f64>>,
}

/// Replace atoms of relations that are almost surely constant with the
/// constant.
fn substitute_consts(f: &Formula, consts: &[Option<bool>]) -> Formula {
    match f {
        Formula::Bool(_) => f.clone(),
        Formula::Atom { rel, .. } => match consts[rel.0] {
            Some(b) => Formula::Bool(b),
            None => f.clone(),
        },
        Formula::Not(g) => Formula::not(substitute_consts(g, consts)),
        Formula::And(a, b) => {
            Formula::and(substitute_consts(a, consts), substitute_consts(b, consts))
        }
        Formula::Or(a, b) => {
            Formula::or(substitute_consts(a, consts), substitute_consts(b, consts))
        }
        Formula::Implies(a, b) => {
            Formula::implies(substitute_consts(a, consts), substitute_consts(b, consts))
        }
        Formula::Forall(v, g) => Formula::forall(v.clone(), substitute_consts(g, consts)),
        Formula::Exists(v, g) => Formula::exists(v.clone(), substitute_consts(g, consts)),
        Formula::FreqCmp(c) => {
            let mut c2 = (**c).clone();
            c2.lhs_num = substitute_consts(&c.lhs_num, consts);
            c2.lhs_den = substitute_consts(&c.lhs_den, consts);
            c2.rhs_num = substitute_consts(&c.rhs_num, consts);
            c2.rhs_den = substitute_consts(&c.rhs_den, consts);
            Formula::FreqCmp(Box::new(c2))
        }
    }
}

/// Mark a freshly compiled relation as almost surely true/false when its
/// probability is 1/0 on every positive-probability diagram.
fn const_mark<P: Prob>(
    net: &QfLbn<P>,
    rel: RelId,
    caps: &Caps,
) -> Result<Option<bool>, CompileError> {
    let node = net.node(rel)?;
    let sig = net.signature();
    let xvars = arg_vars(sig, rel);
    let mut all_one = true;
    let mut all_zero = true;
    if node.patterns.is_empty() {
        let q = &node.table[0];
        all_one = q.is_one();
        all_zero = q.is_zero();
    } else {
        for (j, q) in node.table.iter().enumerate() {
            let values: Vec<bool> = (0..node.patterns.len()).map(|b| (j >> b) & 1 == 1).collect();
            let d = AtomicDiagram::new(sig, node.deps.clone(), xvars.clone(), values)?;
            if !net.is_reachable(&d, caps)? {
                continue;
            }
            all_one &= q.is_one();
            all_zero &= q.is_zero();
        }
    }
    Ok(if all_one {
        Some(true)
    } else if all_zero {
        Some(false)
    } else {
        None
    })
}

/// Compile the asymptotic limit of a functional model into a
/// quantifier-free network. Relations are processed in topological order:
/// almost-surely-constant relations are inlined as constants, each feature
/// is quantifier-eliminated, and for every complete atomic diagram of the
/// (dependency-closed) relations occurring in the eliminated features the
/// feature limits are computed and pushed through the aggregation function.
pub fn compile_limit(model: &Model, caps: &Caps, force: bool) -> Result<QfLbn<f64>, CompileError> {
    Ok(compile_limit_full(model, caps, force, true)?.0)
}

/// As [`compile_limit`] but optionally skipping dependency pruning and
/// returning the per-diagram feature inputs (used by gradient-based
/// learning).
pub fn compile_limit_full(
    model: &Model,
    caps: &Caps,
    force: bool,
    prune: bool,
) -> Result<(QfLbn<f64>, Vec<CompiledAux>), CompileError> {
    let sig = model.signature();
    for (rel, node) in model.nodes() {
        match node {
            NodeSpec::Partition { .. } => {
                return Err(CompileError::ExpectedFunctional(sig.relation(rel).name.clone()))
            }
            NodeSpec::Functional { family, .. } => {
                if !family.interior_preserving() && !force {
                    return Err(CompileError::NonInteriorFamily {
                        relation: sig.relation(rel).name.clone(),
                    });
                }
            }
        }
    }
    let mut net: QfLbn<f64> = QfLbn::new(sig.clone());
    let mut consts: Vec<Option<bool>> = vec![None; sig.relation_count()];
    let mut aux: Vec<CompiledAux> = vec![CompiledAux::default(); sig.relation_count()];

    for &rel in model.topological_order() {
        let (features, family) = match model.node(rel) {
            NodeSpec::Functional { features, family } => (features, family),
            NodeSpec::Partition { .. } => unreachable!(),
        };
        let xvars = arg_vars(sig, rel);
        // eliminate quantifiers from each feature (and condition)
        let mut compiled_feats = Vec::with_capacity(features.len());
        for f in features {
            let formula = qe(&simplify(&substitute_consts(&f.formula, &consts)), &net, caps)?;
            let condition = match &f.condition {
                Some(c) => Some(qe(&simplify(&substitute_consts(c, &consts)), &net, caps)?),
                None => None,
            };
            compiled_feats.push((formula, condition, f.binders.clone()));
        }
        let mut rels: BTreeSet<RelId> = BTreeSet::new();
        for (f, c, _) in &compiled_feats {
            rels.extend(f.relations());
            if let Some(c) = c {
                rels.extend(c.relations());
            }
        }
        let deps = net.closure(&rels)?;
        let patterns = atoms_over(sig, &deps, &xvars);
        if patterns.len() > caps.max_diagram_atoms.min(62) {
            return Err(CompileError::Diagram(crate::logic::DiagramError::CapExceeded {
                atoms: patterns.len(),
                cap: caps.max_diagram_atoms.min(62),
            }));
        }
        let count = 1usize << patterns.len();
        let mut table = vec![0.0f64; count];
        let mut node_inputs = vec![Vec::new(); count];
        for j in 0..count {
            let values: Vec<bool> = (0..patterns.len()).map(|b| (j >> b) & 1 == 1).collect();
            let ctx = AtomicDiagram::new(sig, deps.clone(), xvars.clone(), values)?;
            if !patterns.is_empty() && !net.is_reachable(&ctx, caps)? {
                // dead diagram: give it a fixed value so recompilation is a
                // fixed point
                table[j] = 0.0;
                node_inputs[j] = vec![0.0; compiled_feats.len()];
                continue;
            }
            let mut inputs = Vec::with_capacity(compiled_feats.len());
            for (formula, condition, binders) in &compiled_feats {
                let p = match condition {
                    None => freq_limit(&net, formula, &ctx, binders, caps)?,
                    Some(cond) => {
                        let den = freq_limit(&net, cond, &ctx, binders, caps)?;
                        if den == 0.0 {
                            return Err(CompileError::ZeroDenominatorLimit(print_formula(
                                cond, sig,
                            )));
                        }
                        let conj = Formula::and(formula.clone(), cond.clone());
                        freq_limit(&net, &conj, &ctx, binders, caps)? / den
                    }
                };
                inputs.push(p);
            }
            table[j] = family
                .eval(&inputs)
                .map_err(|e| CompileError::Model(format!("{}: {}", sig.relation(rel).name, e)))?;
            node_inputs[j] = inputs;
        }
        let mut node = QfNode { deps, patterns, table };
        if prune {
            node = prune_node(node);
        }
        net.push_node(rel, node);
        aux[rel.0] = CompiledAux { inputs: node_inputs };
        consts[rel.0] = const_mark(&net, rel, caps)?;
    }
    Ok((net, aux))
}

/// Compile the asymptotic limit of a partition model whose frequency
/// comparisons are all threshold comparisons with computable, non-critical
/// limits. Comparisons are replaced by their asymptotic truth value per
/// context diagram (exact rational arithmetic; equality of the two sides is
/// reported as a critical error), the remaining first-order formulas are
/// quantifier-eliminated, and the unique true case's probability annotates
/// each diagram.
pub fn compile_threshold_limit(model: &Model, caps: &Caps) -> Result<QfLbn<f64>, CompileError> {
    let sig = model.signature();
    for (rel, node) in model.nodes() {
        if !node.is_partition() {
            return Err(CompileError::ExpectedPartition(sig.relation(rel).name.clone()));
        }
    }
    let mut net: QfLbn<BigRational> = QfLbn::new(sig.clone());
    let mut consts: Vec<Option<bool>> = vec![None; sig.relation_count()];

    for &rel in model.topological_order() {
        let cases = match model.node(rel) {
            NodeSpec::Partition { cases } => cases,
            NodeSpec::Functional { .. } => unreachable!(),
        };
        let xvars = arg_vars(sig, rel);
        let substituted: Vec<Formula> = cases
            .iter()
            .map(|c| simplify(&substitute_consts(&c.formula, &consts)))
            .collect();
        // syntactic relation set, including inside frequency terms
        let mut rels: BTreeSet<RelId> = BTreeSet::new();
        for f in &substituted {
            rels.extend(f.relations());
        }
        let deps = net.closure(&rels)?;
        let patterns = atoms_over(sig, &deps, &xvars);
        if patterns.len() > caps.max_diagram_atoms.min(62) {
            return Err(CompileError::Diagram(crate::logic::DiagramError::CapExceeded {
                atoms: patterns.len(),
                cap: caps.max_diagram_atoms.min(62),
            }));
        }
        let count = 1usize << patterns.len();
        let mut table = vec![BigRational::zero(); count];
        for j in 0..count {
            let values: Vec<bool> = (0..patterns.len()).map(|b| (j >> b) & 1 == 1).collect();
            let ctx = AtomicDiagram::new(sig, deps.clone(), xvars.clone(), values)?;
            if !patterns.is_empty() && !net.is_reachable(&ctx, caps)? {
                continue;
            }
            let mut chosen: Option<usize> = None;
            let mut true_cases = 0usize;
            for (i, f) in substituted.iter().enumerate() {
                let replaced = replace_freq_cmps(f, &net, &ctx, caps, sig)?;
                let eliminated = qe(&simplify(&replaced), &net, caps)?;
                let holds = match eliminated {
                    Formula::Bool(b) => b,
                    other => ctx.eval(&other)?,
                };
                if holds {
                    true_cases += 1;
                    chosen = Some(i);
                }
            }
            if true_cases != 1 {
                return Err(CompileError::PartitionViolationInLimit {
                    relation: sig.relation(rel).name.clone(),
                    true_cases,
                });
            }
            table[j] = cases[chosen.unwrap()].prob.clone();
        }
        let node = prune_node(QfNode { deps, patterns, table });
        net.push_node(rel, node);
        consts[rel.0] = const_mark(&net, rel, caps)?;
    }
    Ok(net.map_probs(|p| p.to_f64_lossy()))
}

/// Bottom-up replacement of frequency comparisons by their asymptotic truth
/// value under the context diagram. Equality of the asymptotic sides is a
/// critical error.
fn replace_freq_cmps(
    f: &Formula,
    net: &QfLbn<BigRational>,
    ctx: &AtomicDiagram,
    caps: &Caps,
    sig: &crate::logic::Signature,
) -> Result<Formula, CompileError> {
    match f {
        Formula::Bool(_) | Formula::Atom { .. } => Ok(f.clone()),
        Formula::Not(g) => Ok(Formula::not(replace_freq_cmps(g, net, ctx, caps, sig)?)),
        Formula::And(a, b) => Ok(Formula::and(
            replace_freq_cmps(a, net, ctx, caps, sig)?,
            replace_freq_cmps(b, net, ctx, caps, sig)?,
        )),
        Formula::Or(a, b) => Ok(Formula::or(
            replace_freq_cmps(a, net, ctx, caps, sig)?,
            replace_freq_cmps(b, net, ctx, caps, sig)?,
        )),
        Formula::Implies(a, b) => Ok(Formula::implies(
            replace_freq_cmps(a, net, ctx, caps, sig)?,
            replace_freq_cmps(b, net, ctx, caps, sig)?,
        )),
        Formula::Forall(v, g) => Ok(Formula::forall(
            v.clone(),
            replace_freq_cmps(g, net, ctx, caps, sig)?,
        )),
        Formula::Exists(v, g) => Ok(Formula::exists(
            v.clone(),
            replace_freq_cmps(g, net, ctx, caps, sig)?,
        )),
        Formula::FreqCmp(c) => {
            let display = print_formula(f, sig);
            let resolve = |g: &Formula| -> Result<Formula, CompileError> {
                let inner = replace_freq_cmps(g, net, ctx, caps, sig)?;
                qe(&simplify(&inner), net, caps)
            };
            let lhs_num = resolve(&c.lhs_num)?;
            let lhs_den = resolve(&c.lhs_den)?;
            let rhs_num = resolve(&c.rhs_num)?;
            let rhs_den = resolve(&c.rhs_den)?;
            let side = |num: &Formula, den: &Formula| -> Result<BigRational, CompileError> {
                let den_lim = freq_limit(net, den, ctx, &c.binders, caps)?;
                if den_lim.is_zero() {
                    return Err(CompileError::ZeroDenominatorLimit(print_formula(den, sig)));
                }
                let conj = simplify(&Formula::and(num.clone(), den.clone()));
                let num_lim = freq_limit(net, &conj, ctx, &c.binders, caps)?;
                Ok(num_lim / den_lim)
            };
            let lhs = side(&lhs_num, &lhs_den)?;
            let rhs = side(&rhs_num, &rhs_den)?;
            let (a, b) = if c.slack_on_left {
                (lhs + c.slack.clone(), rhs)
            } else {
                (lhs, rhs + c.slack.clone())
            };
            if a == b {
                return Err(CompileError::Critical {
                    comparison: display,
                    value: a.to_string(),
                });
            }
            Ok(Formula::Bool(a > b))
        }
    }
}
