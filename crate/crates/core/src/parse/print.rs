use num::{BigInt, BigRational, One, Signed, Zero};

use crate::logic::{Formula, Signature, Structure, Term};
use crate::model::{FamilyKind, FunctionFamily, Model, NodeSpec};

/// Exact textual form of a rational: a finite decimal when the denominator
/// is of the form 2^a 5^b, otherwise `num/den`. Parses back to the same
/// rational.
pub fn rational_to_text(r: &BigRational) -> String {
    let r = r.reduced();
    let num = r.numer().clone();
    let den = r.denom().clone();
    if den.is_one() {
        return num.to_string();
    }
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut d = den.clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", num, den);
    }
    let k = twos.max(fives);
    let scale = num::pow::pow(BigInt::from(10), k as usize) / den;
    let scaled = (num * scale).abs();
    let sign = if r.is_negative() { "-" } else { "" };
    let digits = scaled.to_string();
    let digits = if digits.len() <= k as usize {
        format!("{}{}", "0".repeat(k as usize + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int_part, frac_part) = digits.split_at(digits.len() - k as usize);
    format!("{}{}.{}", sign, int_part, frac_part)
}

fn f64_to_text(x: f64) -> String {
    format!("{:?}", x)
}

fn term_to_text(t: &Term) -> String {
    match t {
        Term::Var(v) => v.name.to_string(),
        Term::Const { value, .. } => value.to_string(),
    }
}

// precedence levels: 0 quantifier (lowest), 1 implies, 2 or, 3 and, 4 unary,
// 5 primary
fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Forall(..) | Formula::Exists(..) => 0,
        Formula::Implies(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        Formula::Not(..) => 4,
        Formula::Bool(_) | Formula::Atom { .. } | Formula::FreqCmp(_) => 5,
    }
}

fn fmt_formula(f: &Formula, sig: &Signature, min_prec: u8, out: &mut String) {
    let p = prec(f);
    let parens = p < min_prec;
    if parens {
        out.push('(');
    }
    match f {
        Formula::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Formula::Atom { rel, args } => {
            out.push_str(&sig.relation(*rel).name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&term_to_text(a));
            }
            out.push(')');
        }
        Formula::Not(g) => {
            out.push('~');
            fmt_formula(g, sig, 4, out);
        }
        Formula::And(a, b) => {
            fmt_formula(a, sig, 3, out);
            out.push_str(" & ");
            fmt_formula(b, sig, 4, out);
        }
        Formula::Or(a, b) => {
            fmt_formula(a, sig, 2, out);
            out.push_str(" | ");
            fmt_formula(b, sig, 3, out);
        }
        Formula::Implies(a, b) => {
            fmt_formula(a, sig, 2, out);
            out.push_str(" -> ");
            fmt_formula(b, sig, 1, out);
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            out.push_str(if matches!(f, Formula::Forall(..)) { "forall " } else { "exists " });
            out.push_str(&v.name);
            out.push(':');
            out.push_str(sig.sort_name(v.sort));
            out.push_str(". ");
            fmt_formula(g, sig, 0, out);
        }
        Formula::FreqCmp(c) => {
            if c.slack_on_left {
                out.push_str(&rational_to_text(&c.slack));
                if !is_false(&c.lhs_num) || !is_true(&c.lhs_den) {
                    out.push_str(" + ");
                    fmt_freq_term(&c.lhs_num, &c.lhs_den, &c.binders, sig, out);
                }
                out.push_str(" >= ");
                fmt_freq_term(&c.rhs_num, &c.rhs_den, &c.binders, sig, out);
            } else {
                fmt_freq_term(&c.lhs_num, &c.lhs_den, &c.binders, sig, out);
                out.push_str(" >= ");
                if is_false(&c.rhs_num) && is_true(&c.rhs_den) {
                    out.push_str(&rational_to_text(&c.slack));
                } else {
                    fmt_freq_term(&c.rhs_num, &c.rhs_den, &c.binders, sig, out);
                    if !c.slack.is_zero() {
                        out.push_str(" + ");
                        out.push_str(&rational_to_text(&c.slack));
                    }
                }
            }
        }
    }
    if parens {
        out.push(')');
    }
}

fn is_true(f: &Formula) -> bool {
    matches!(f, Formula::Bool(true))
}

fn is_false(f: &Formula) -> bool {
    matches!(f, Formula::Bool(false))
}

fn fmt_freq_term(
    num: &Formula,
    den: &Formula,
    binders: &[crate::logic::Var],
    sig: &Signature,
    out: &mut String,
) {
    out.push_str("freq(");
    // inside freq, a top-level `|` is the conditional separator: print the
    // body at or-excluding precedence
    fmt_formula(num, sig, 3, out);
    if !is_true(den) {
        out.push_str(" | ");
        fmt_formula(den, sig, 3, out);
    }
    out.push_str(" ; ");
    for (i, b) in binders.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&b.name);
        out.push(':');
        out.push_str(sig.sort_name(b.sort));
    }
    out.push(')');
}

/// Formula as concrete syntax; parses back to the same AST.
pub fn print_formula(f: &Formula, sig: &Signature) -> String {
    let mut out = String::new();
    fmt_formula(f, sig, 0, &mut out);
    out
}

fn fmt_family(fam: &FunctionFamily, out: &mut String) {
    match fam.kind {
        FamilyKind::Constant => {
            out.push_str("constant(");
            out.push_str(&f64_to_text(fam.params[0]));
            out.push(')');
        }
        FamilyKind::Linear | FamilyKind::Logistic | FamilyKind::Probit | FamilyKind::Cloglog => {
            out.push_str(match fam.kind {
                FamilyKind::Linear => "linear(",
                FamilyKind::Logistic => "logistic(",
                FamilyKind::Probit => "probit(",
                _ => "cloglog(",
            });
            for w in &fam.params[..fam.arity] {
                out.push_str(&f64_to_text(*w));
                out.push_str(", ");
            }
            out.push_str("c=");
            out.push_str(&f64_to_text(fam.params[fam.arity]));
            out.push(')');
        }
        FamilyKind::Bump => {
            out.push_str(&format!(
                "bump(alpha={}, beta={}, p={})",
                f64_to_text(fam.params[0]),
                f64_to_text(fam.params[1]),
                f64_to_text(fam.params[2])
            ));
        }
        FamilyKind::Table => {
            out.push_str("table(");
            for (i, v) in fam.params.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let bits: String = (0..fam.arity).map(|b| if (i >> b) & 1 == 1 { '1' } else { '0' }).collect();
                out.push_str(&bits);
                out.push_str(" => ");
                out.push_str(&f64_to_text(*v));
            }
            out.push(')');
        }
    }
}

/// Model as concrete `.cplm` syntax; parses back to an equal model.
pub fn print_model(model: &Model) -> String {
    let sig = model.signature();
    let mut out = String::new();
    out.push_str(&sig.to_string());
    for (rel, r) in sig.relations() {
        out.push('\n');
        out.push_str(&format!("node {} {{\n", r.name));
        let parents = model.parents(rel);
        if !parents.is_empty() {
            let names: Vec<&str> = parents.iter().map(|p| sig.relation(*p).name.as_str()).collect();
            out.push_str(&format!("  parents: {};\n", names.join(", ")));
        }
        match model.node(rel) {
            NodeSpec::Partition { cases } => {
                for c in cases {
                    out.push_str(&format!(
                        "  case {} => {};\n",
                        print_formula(&c.formula, sig),
                        rational_to_text(&c.prob)
                    ));
                }
            }
            NodeSpec::Functional { features, family } => {
                for f in features {
                    out.push_str(&format!("  feature {} = freq(", f.name));
                    let mut body = String::new();
                    fmt_formula(&f.formula, sig, 3, &mut body);
                    out.push_str(&body);
                    if let Some(c) = &f.condition {
                        let mut cond = String::new();
                        fmt_formula(c, sig, 3, &mut cond);
                        out.push_str(" | ");
                        out.push_str(&cond);
                    }
                    out.push_str(" ; ");
                    for (i, b) in f.binders.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        out.push_str(&b.name);
                        out.push(':');
                        out.push_str(sig.sort_name(b.sort));
                    }
                    out.push_str(");\n");
                }
                out.push_str("  function: ");
                fmt_family(family, &mut out);
                out.push_str(";\n");
            }
        }
        out.push_str("}\n");
    }
    out
}

/// Structure as concrete `.cpls` syntax: domain lines in sort order, facts
/// sorted by relation and tuple. Round-trips exactly.
pub fn print_structure(structure: &Structure) -> String {
    let sig = structure.signature();
    let mut out = String::new();
    for (sid, name) in sig.sorts() {
        out.push_str(&format!("domain {} = {};\n", name, structure.sizes().size(sid)));
    }
    for (rel, r) in sig.relations() {
        let mut tuples: Vec<&Vec<u32>> = structure.tuples(rel).iter().collect();
        tuples.sort();
        for t in tuples {
            let args: Vec<String> = t.iter().map(|e| e.to_string()).collect();
            out.push_str(&format!("fact {}({});\n", r.name, args.join(", ")));
        }
    }
    out
}
