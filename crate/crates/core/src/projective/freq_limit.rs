use std::collections::BTreeSet;

use crate::caps::Caps;
use crate::logic::{extensions_of, free_variables, AtomicDiagram, Formula, Var};

use super::qflbn::{Prob, QfLbn};
use super::CompileError;

/// Almost-sure limit of the relative frequency of a quantifier-free formula
/// over fresh, pairwise-distinct tuples for `binders`, conditioned on the
/// context diagram: the total conditional probability of the extension
/// diagrams satisfying the formula.
///
/// When the context does not pin every dependency relation, the missing
/// atoms are marginalized, which makes the result the conditional
/// expectation of the limit frequency given the context.
pub fn freq_limit<P: Prob>(
    net: &QfLbn<P>,
    chi: &Formula,
    context: &AtomicDiagram,
    binders: &[Var],
    caps: &Caps,
) -> Result<P, CompileError> {
    if !chi.is_quantifier_free() {
        return Err(CompileError::Unsupported(
            "frequency limits require a quantifier-free formula".into(),
        ));
    }
    if chi.mentions_constants() {
        return Err(CompileError::Unsupported(
            "domain constants cannot appear in limit formulas".into(),
        ));
    }
    for b in binders {
        if context.vars().contains(b) {
            return Err(CompileError::Unsupported(format!(
                "binder `{}` collides with a context variable",
                b.name
            )));
        }
    }
    let free = free_variables(chi);
    for v in &free {
        if !binders.contains(v) && context.var_index(v).is_none() {
            return Err(CompileError::Unsupported(format!(
                "free variable `{}` is neither a binder nor a context variable",
                v.name
            )));
        }
    }
    let mut rels: BTreeSet<_> = chi.relations().into_iter().collect();
    rels.extend(context.rels().iter().copied());
    let closed = net.closure(&rels)?;
    let sig = net.signature();

    // base completions of the context over the closed relation set
    let bases = extensions_of(sig, context, &[], &closed, caps)?;
    let mut den = P::zero();
    let mut num = P::zero();
    for base in &bases {
        let base_prob = net.closed_diagram_prob(base)?;
        if base_prob.is_zero() {
            continue;
        }
        den = den + base_prob;
        if binders.is_empty() {
            if base.eval(chi)? {
                num = num + net.closed_diagram_prob(base)?;
            }
            continue;
        }
        for ext in extensions_of(sig, base, binders, &closed, caps)? {
            if ext.eval(chi)? {
                let p = net.closed_diagram_prob(&ext)?;
                if !p.is_zero() {
                    num = num + p;
                }
            }
        }
    }
    if den.is_zero() {
        return Err(CompileError::ZeroProbabilityContext);
    }
    Ok(num / den)
}
