use std::collections::BTreeSet;

use crate::caps::Caps;
use crate::logic::{
    enumerate_diagrams_of, extensions_of, free_variables, substitute, Formula, Term, Var,
};

use super::qflbn::{Prob, QfLbn};
use super::CompileError;

/// Boolean constant folding and double-negation removal; keeps eliminated
/// formulas readable and cheap to evaluate.
pub(crate) fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::Bool(_) | Formula::Atom { .. } => f.clone(),
        Formula::Not(g) => match simplify(g) {
            Formula::Bool(b) => Formula::Bool(!b),
            Formula::Not(inner) => *inner,
            g => Formula::not(g),
        },
        Formula::And(a, b) => match (simplify(a), simplify(b)) {
            (Formula::Bool(false), _) | (_, Formula::Bool(false)) => Formula::Bool(false),
            (Formula::Bool(true), g) | (g, Formula::Bool(true)) => g,
            (a, b) => Formula::and(a, b),
        },
        Formula::Or(a, b) => match (simplify(a), simplify(b)) {
            (Formula::Bool(true), _) | (_, Formula::Bool(true)) => Formula::Bool(true),
            (Formula::Bool(false), g) | (g, Formula::Bool(false)) => g,
            (a, b) => Formula::or(a, b),
        },
        Formula::Implies(a, b) => match (simplify(a), simplify(b)) {
            (Formula::Bool(false), _) => Formula::Bool(true),
            (Formula::Bool(true), g) => g,
            (_, Formula::Bool(true)) => Formula::Bool(true),
            (a, Formula::Bool(false)) => simplify(&Formula::not(a)),
            (a, b) => Formula::implies(a, b),
        },
        Formula::Forall(v, g) => match simplify(g) {
            Formula::Bool(b) => Formula::Bool(b),
            g => Formula::forall(v.clone(), g),
        },
        Formula::Exists(v, g) => match simplify(g) {
            Formula::Bool(b) => Formula::Bool(b),
            g => Formula::exists(v.clone(), g),
        },
        Formula::FreqCmp(_) => f.clone(),
    }
}

/// Eliminate quantifiers from a first-order formula over the network's
/// compiled relations. The result is quantifier-free and agrees with the
/// input almost everywhere under the network's asymptotic distribution: an
/// existential holds on exactly those diagrams of its free variables that
/// admit a positive-probability one-variable extension satisfying the body
/// (or a satisfying substitution instance, which covers relations that are
/// deterministic on some diagrams).
pub fn qe<P: Prob>(f: &Formula, net: &QfLbn<P>, caps: &Caps) -> Result<Formula, CompileError> {
    if !f.is_first_order() {
        return Err(CompileError::Unsupported(
            "quantifier elimination expects a first-order formula".into(),
        ));
    }
    if f.mentions_constants() {
        return Err(CompileError::Unsupported(
            "domain constants cannot appear in limit formulas".into(),
        ));
    }
    for rel in f.relations() {
        if !net.has_node(rel) {
            return Err(CompileError::UnknownRelation(rel.0));
        }
    }
    let out = qe_rec(f, net, caps)?;
    Ok(simplify(&out))
}

fn qe_rec<P: Prob>(f: &Formula, net: &QfLbn<P>, caps: &Caps) -> Result<Formula, CompileError> {
    match f {
        Formula::Bool(_) | Formula::Atom { .. } => Ok(f.clone()),
        Formula::Not(g) => Ok(Formula::not(qe_rec(g, net, caps)?)),
        Formula::And(a, b) => Ok(Formula::and(qe_rec(a, net, caps)?, qe_rec(b, net, caps)?)),
        Formula::Or(a, b) => Ok(Formula::or(qe_rec(a, net, caps)?, qe_rec(b, net, caps)?)),
        Formula::Implies(a, b) => Ok(Formula::implies(qe_rec(a, net, caps)?, qe_rec(b, net, caps)?)),
        Formula::Exists(v, body) => {
            let body = qe_rec(body, net, caps)?;
            eliminate_exists(v, &simplify(&body), net, caps)
        }
        Formula::Forall(v, body) => {
            let body = qe_rec(body, net, caps)?;
            let negated = simplify(&Formula::not(body));
            let ex = eliminate_exists(v, &negated, net, caps)?;
            Ok(simplify(&Formula::not(ex)))
        }
        Formula::FreqCmp(_) => Err(CompileError::Unsupported(
            "frequency comparison inside quantifier elimination".into(),
        )),
    }
}

fn eliminate_exists<P: Prob>(
    v: &Var,
    body: &Formula,
    net: &QfLbn<P>,
    caps: &Caps,
) -> Result<Formula, CompileError> {
    debug_assert!(body.is_quantifier_free());
    if let Formula::Bool(b) = body {
        return Ok(Formula::Bool(*b));
    }
    let free: Vec<Var> = free_variables(body).into_iter().filter(|w| w != v).collect();
    let rels: BTreeSet<_> = body.relations().into_iter().collect();
    let closed = net.closure(&rels)?;
    let sig = net.signature();

    if free.is_empty() {
        // sentence case: true iff some admissible one-variable diagram
        // satisfies the body
        for d in enumerate_diagrams_of(sig, &closed, std::slice::from_ref(v), caps)? {
            if d.eval(body)? && net.is_reachable(&d, caps)? {
                return Ok(Formula::Bool(true));
            }
        }
        return Ok(Formula::Bool(false));
    }

    // substitution instances y := z for same-sorted free variables; kept for
    // relations that are deterministic on some diagrams
    let instances: Vec<Formula> = free
        .iter()
        .filter(|z| z.sort == v.sort)
        .map(|z| simplify(&substitute(body, v, &Term::Var(z.clone()))))
        .collect();

    let mut holds = Vec::new();
    let mut reachable_total = 0usize;
    for d in enumerate_diagrams_of(sig, &closed, &free, caps)? {
        // zero-probability base diagrams are irrelevant almost everywhere
        if !net.is_reachable(&d, caps)? {
            continue;
        }
        reachable_total += 1;
        let mut ok = false;
        for inst in &instances {
            if d.eval(inst)? {
                ok = true;
                break;
            }
        }
        if !ok {
            for ext in extensions_of(sig, &d, std::slice::from_ref(v), &closed, caps)? {
                if ext.eval(body)? && net.is_reachable(&ext, caps)? {
                    ok = true;
                    break;
                }
            }
        }
        if ok {
            holds.push(d);
        }
    }
    if holds.len() == reachable_total {
        return Ok(Formula::Bool(true));
    }
    Ok(Formula::any(holds.iter().map(|d| d.to_formula()).collect()))
}
