use std::collections::BTreeSet;

use num::{BigRational, One, Zero};

use crate::logic::{free_variables, Formula, Var};

use super::{FamilyKind, Model, NodeSpec};

/// A validation finding: the relation it concerns and a message. Validation
/// never fails hard; callers decide what to do with the diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub relation: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.relation {
            Some(r) => write!(f, "{}: {}", r, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn diag(rel: &str, msg: impl Into<String>) -> Diagnostic {
    Diagnostic {
        relation: Some(rel.to_string()),
        message: msg.into(),
    }
}

/// Structural checks: parent scoping, probability ranges, family parameter
/// bounds, feature variable scoping. Partition validity/disjointness is not
/// decided here; it is enforced per ground atom at grounding time.
pub fn validate(model: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let sig = model.signature();
    for (rel, node) in model.nodes() {
        let name = &sig.relation(rel).name;
        let arg_vars: BTreeSet<Var> = model.arg_vars(rel).into_iter().collect();
        let check_scope = |f: &Formula, allowed: &BTreeSet<Var>, out: &mut Vec<Diagnostic>| {
            for v in free_variables(f) {
                if !allowed.contains(&v) {
                    out.push(diag(name, format!("free variable `{}` is not an argument variable", v.name)));
                }
            }
        };
        // parent scoping: mentioned relations must be strictly earlier in
        // the DAG (Model::new already rejects cycles, so mentions == parents)
        for p in model.parents(rel) {
            if *p == rel {
                out.push(diag(name, "node mentions itself"));
            }
        }
        match node {
            NodeSpec::Partition { cases } => {
                if cases.is_empty() {
                    out.push(diag(name, "partition has no cases"));
                }
                for (i, c) in cases.iter().enumerate() {
                    if c.prob < BigRational::zero() || c.prob > BigRational::one() {
                        out.push(diag(name, format!("case {} probability outside [0,1]", i + 1)));
                    }
                    check_scope(&c.formula, &arg_vars, &mut out);
                }
            }
            NodeSpec::Functional { features, family } => {
                if features.len() != family.arity {
                    out.push(diag(
                        name,
                        format!(
                            "function arity {} does not match feature count {}",
                            family.arity,
                            features.len()
                        ),
                    ));
                }
                for e in family.check() {
                    out.push(diag(name, e.to_string()));
                }
                for f in features {
                    if !f.formula.is_first_order()
                        || f.condition.as_ref().is_some_and(|c| !c.is_first_order())
                    {
                        out.push(diag(
                            name,
                            format!("feature `{}` contains a frequency comparison; features must be first-order", f.name),
                        ));
                    }
                    let mut allowed = arg_vars.clone();
                    allowed.extend(f.binders.iter().cloned());
                    check_scope(&f.formula, &allowed, &mut out);
                    if let Some(c) = &f.condition {
                        check_scope(c, &allowed, &mut out);
                    }
                    let mut seen = BTreeSet::new();
                    for b in &f.binders {
                        if !seen.insert(b.clone()) {
                            out.push(diag(name, format!("duplicate binder `{}` in feature `{}`", b.name, f.name)));
                        }
                        if arg_vars.contains(b) {
                            out.push(diag(
                                name,
                                format!("binder `{}` in feature `{}` shadows an argument variable", b.name, f.name),
                            ));
                        }
                    }
                }
                if family.kind == FamilyKind::Table
                    && features.iter().any(|f| !f.binders.is_empty())
                {
                    out.push(diag(
                        name,
                        "table function requires degenerate features (empty frequency binders)",
                    ));
                }
            }
        }
    }
    // acyclicity is established by construction, but models assembled by
    // hand could have been bypassed; re-walk defensively
    let mut seen = BTreeSet::new();
    for r in model.topological_order() {
        for p in model.parents(*r) {
            if !seen.contains(p) {
                out.push(Diagnostic {
                    relation: Some(sig.relation(*r).name.clone()),
                    message: "topological order violates parent ordering".into(),
                });
            }
        }
        seen.insert(*r);
    }
    out
}
