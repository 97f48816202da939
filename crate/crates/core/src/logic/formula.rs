use std::collections::BTreeSet;
use std::sync::Arc;

use num::BigRational;

use super::signature::{RelId, SortId};

/// A sorted variable. Equality is by name and sort; the name is shared so
/// that cloning in evaluation hot paths stays cheap.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: Arc<str>,
    pub sort: SortId,
}

impl Var {
    pub fn new(name: &str, sort: SortId) -> Self {
        Var {
            name: Arc::from(name),
            sort,
        }
    }
}

/// An argument term: a variable or a domain-element constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Const { value: u32, sort: SortId },
}

impl Term {
    pub fn sort(&self) -> SortId {
        match self {
            Term::Var(v) => v.sort,
            Term::Const { sort, .. } => *sort,
        }
    }
}

/// A comparison of conditional relative frequencies over a tuple of bound
/// variables. `slack_on_left = true` reads `r + ‖lhs_num|lhs_den‖ >=
/// ‖rhs_num|rhs_den‖`, otherwise `‖lhs_num|lhs_den‖ >= ‖rhs_num|rhs_den‖ + r`.
/// The binders are shared by all four formulas and must be pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqCmp {
    pub slack_on_left: bool,
    pub slack: BigRational,
    pub lhs_num: Formula,
    pub lhs_den: Formula,
    pub rhs_num: Formula,
    pub rhs_den: Formula,
    pub binders: Vec<Var>,
}

/// Formula AST: first-order connectives and quantifiers plus frequency
/// comparisons. Atoms are sort-checked at construction/parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Bool(bool),
    Atom { rel: RelId, args: Vec<Term> },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Var, Box<Formula>),
    Exists(Var, Box<Formula>),
    FreqCmp(Box<FreqCmp>),
}

impl Formula {
    pub fn atom(rel: RelId, args: Vec<Term>) -> Formula {
        Formula::Atom { rel, args }
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(v: Var, body: Formula) -> Formula {
        Formula::Forall(v, Box::new(body))
    }

    pub fn exists(v: Var, body: Formula) -> Formula {
        Formula::Exists(v, Box::new(body))
    }

    /// Disjunction of a list; empty list is `false`.
    pub fn any(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::Bool(false),
            1 => fs.pop().unwrap(),
            _ => {
                let mut it = fs.into_iter();
                let first = it.next().unwrap();
                it.fold(first, Formula::or)
            }
        }
    }

    /// Conjunction of a list; empty list is `true`.
    pub fn all(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::Bool(true),
            1 => fs.pop().unwrap(),
            _ => {
                let mut it = fs.into_iter();
                let first = it.next().unwrap();
                it.fold(first, Formula::and)
            }
        }
    }

    /// True if the formula contains no quantifier and no frequency
    /// comparison.
    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Bool(_) | Formula::Atom { .. } => true,
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Formula::Forall(..) | Formula::Exists(..) | Formula::FreqCmp(_) => false,
        }
    }

    /// True if the formula contains no frequency comparison (plain
    /// first-order logic).
    pub fn is_first_order(&self) -> bool {
        match self {
            Formula::Bool(_) | Formula::Atom { .. } => true,
            Formula::Not(f) => f.is_first_order(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.is_first_order() && b.is_first_order()
            }
            Formula::Forall(_, f) | Formula::Exists(_, f) => f.is_first_order(),
            Formula::FreqCmp(_) => false,
        }
    }

    /// True if any argument term anywhere in the formula is a constant.
    pub fn mentions_constants(&self) -> bool {
        match self {
            Formula::Bool(_) => false,
            Formula::Atom { args, .. } => args.iter().any(|t| matches!(t, Term::Const { .. })),
            Formula::Not(f) => f.mentions_constants(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.mentions_constants() || b.mentions_constants()
            }
            Formula::Forall(_, f) | Formula::Exists(_, f) => f.mentions_constants(),
            Formula::FreqCmp(c) => {
                c.lhs_num.mentions_constants()
                    || c.lhs_den.mentions_constants()
                    || c.rhs_num.mentions_constants()
                    || c.rhs_den.mentions_constants()
            }
        }
    }

    /// Relation symbols occurring anywhere in the formula, ascending.
    pub fn relations(&self) -> BTreeSet<RelId> {
        let mut out = BTreeSet::new();
        self.collect_relations(&mut out);
        out
    }

    fn collect_relations(&self, out: &mut BTreeSet<RelId>) {
        match self {
            Formula::Bool(_) => {}
            Formula::Atom { rel, .. } => {
                out.insert(*rel);
            }
            Formula::Not(f) => f.collect_relations(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_relations(out);
                b.collect_relations(out);
            }
            Formula::Forall(_, f) | Formula::Exists(_, f) => f.collect_relations(out),
            Formula::FreqCmp(c) => {
                c.lhs_num.collect_relations(out);
                c.lhs_den.collect_relations(out);
                c.rhs_num.collect_relations(out);
                c.rhs_den.collect_relations(out);
            }
        }
    }
}

/// Free variables of a formula. Both quantifiers and frequency binders bind.
pub fn free_variables(f: &Formula) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    let mut bound = Vec::new();
    collect_free(f, &mut bound, &mut out);
    out
}

fn collect_free(f: &Formula, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
    match f {
        Formula::Bool(_) => {}
        Formula::Atom { args, .. } => {
            for t in args {
                if let Term::Var(v) = t {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            }
        }
        Formula::Not(g) => collect_free(g, bound, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Formula::Forall(v, g) | Formula::Exists(v, g) => {
            bound.push(v.clone());
            collect_free(g, bound, out);
            bound.pop();
        }
        Formula::FreqCmp(c) => {
            let n = c.binders.len();
            bound.extend(c.binders.iter().cloned());
            collect_free(&c.lhs_num, bound, out);
            collect_free(&c.lhs_den, bound, out);
            collect_free(&c.rhs_num, bound, out);
            collect_free(&c.rhs_den, bound, out);
            bound.truncate(bound.len() - n);
        }
    }
}

fn term_mentions(t: &Term, v: &Var) -> bool {
    matches!(t, Term::Var(w) if w == v)
}

/// Capture-avoiding substitution of `term` for free occurrences of `var`.
/// Binders that would capture a variable of `term` are renamed.
pub fn substitute(f: &Formula, var: &Var, term: &Term) -> Formula {
    match f {
        Formula::Bool(b) => Formula::Bool(*b),
        Formula::Atom { rel, args } => Formula::Atom {
            rel: *rel,
            args: args
                .iter()
                .map(|t| if term_mentions(t, var) { term.clone() } else { t.clone() })
                .collect(),
        },
        Formula::Not(g) => Formula::not(substitute(g, var, term)),
        Formula::And(a, b) => Formula::and(substitute(a, var, term), substitute(b, var, term)),
        Formula::Or(a, b) => Formula::or(substitute(a, var, term), substitute(b, var, term)),
        Formula::Implies(a, b) => {
            Formula::implies(substitute(a, var, term), substitute(b, var, term))
        }
        Formula::Forall(v, g) => {
            let (v2, g2) = subst_under_binder(v, g, var, term);
            Formula::forall(v2, g2)
        }
        Formula::Exists(v, g) => {
            let (v2, g2) = subst_under_binder(v, g, var, term);
            Formula::exists(v2, g2)
        }
        Formula::FreqCmp(c) => {
            if c.binders.contains(var) {
                // var is shadowed inside the comparison
                return Formula::FreqCmp(c.clone());
            }
            let clash = match term {
                Term::Var(w) => c.binders.contains(w),
                Term::Const { .. } => false,
            };
            let mut c2 = (**c).clone();
            if clash {
                // rename every clashing binder to something fresh
                let taken: BTreeSet<Var> = formula_vars(f);
                for i in 0..c2.binders.len() {
                    let b = c2.binders[i].clone();
                    if term_mentions(term, &b) {
                        let fresh = fresh_var(&b, &taken);
                        let fresh_term = Term::Var(fresh.clone());
                        c2.lhs_num = substitute(&c2.lhs_num, &b, &fresh_term);
                        c2.lhs_den = substitute(&c2.lhs_den, &b, &fresh_term);
                        c2.rhs_num = substitute(&c2.rhs_num, &b, &fresh_term);
                        c2.rhs_den = substitute(&c2.rhs_den, &b, &fresh_term);
                        c2.binders[i] = fresh;
                    }
                }
            }
            c2.lhs_num = substitute(&c2.lhs_num, var, term);
            c2.lhs_den = substitute(&c2.lhs_den, var, term);
            c2.rhs_num = substitute(&c2.rhs_num, var, term);
            c2.rhs_den = substitute(&c2.rhs_den, var, term);
            Formula::FreqCmp(Box::new(c2))
        }
    }
}

fn subst_under_binder(v: &Var, body: &Formula, var: &Var, term: &Term) -> (Var, Formula) {
    if v == var {
        return (v.clone(), (*body).clone());
    }
    if term_mentions(term, v) {
        let taken = formula_vars(body);
        let fresh = fresh_var(v, &taken);
        let renamed = substitute(body, v, &Term::Var(fresh.clone()));
        (fresh, substitute(&renamed, var, term))
    } else {
        (v.clone(), substitute(body, var, term))
    }
}

/// All variables (free or bound) occurring in the formula.
fn formula_vars(f: &Formula) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    fn walk(f: &Formula, out: &mut BTreeSet<Var>) {
        match f {
            Formula::Bool(_) => {}
            Formula::Atom { args, .. } => {
                for t in args {
                    if let Term::Var(v) = t {
                        out.insert(v.clone());
                    }
                }
            }
            Formula::Not(g) => walk(g, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Forall(v, g) | Formula::Exists(v, g) => {
                out.insert(v.clone());
                walk(g, out);
            }
            Formula::FreqCmp(c) => {
                out.extend(c.binders.iter().cloned());
                walk(&c.lhs_num, out);
                walk(&c.lhs_den, out);
                walk(&c.rhs_num, out);
                walk(&c.rhs_den, out);
            }
        }
    }
    walk(f, &mut out);
    out
}

fn fresh_var(base: &Var, taken: &BTreeSet<Var>) -> Var {
    let mut i = 0usize;
    loop {
        let candidate = Var {
            name: Arc::from(format!("{}_{}", base.name, i).as_str()),
            sort: base.sort,
        };
        if !taken.contains(&candidate) {
            return candidate;
        }
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::Zero;

    fn v(name: &str) -> Var {
        Var::new(name, SortId(0))
    }

    fn atom1(rel: usize, name: &str) -> Formula {
        Formula::atom(RelId(rel), vec![Term::Var(v(name))])
    }

    #[test]
    fn frequency_binders_bind() {
        // ‖Q(y)‖_y >= 0.5 has no free variables
        let cmp = Formula::FreqCmp(Box::new(FreqCmp {
            slack_on_left: false,
            slack: BigRational::zero(),
            lhs_num: atom1(0, "y"),
            lhs_den: Formula::Bool(true),
            rhs_num: Formula::Bool(false),
            rhs_den: Formula::Bool(true),
            binders: vec![v("y")],
        }));
        assert!(free_variables(&cmp).is_empty());
    }

    #[test]
    fn exists_leaves_outer_free() {
        let f = Formula::exists(
            v("y"),
            Formula::atom(RelId(1), vec![Term::Var(v("x")), Term::Var(v("y"))]),
        );
        let fv = free_variables(&f);
        assert_eq!(fv.len(), 1);
        assert!(fv.contains(&v("x")));
    }

    #[test]
    fn substitute_constant() {
        let f = atom1(0, "x");
        let g = substitute(&f, &v("x"), &Term::Const { value: 3, sort: SortId(0) });
        assert_eq!(
            g,
            Formula::atom(RelId(0), vec![Term::Const { value: 3, sort: SortId(0) }])
        );
    }

    #[test]
    fn substitute_avoids_capture() {
        // (exists y. E(x, y))[x := y]  must rename the binder
        let f = Formula::exists(
            v("y"),
            Formula::atom(RelId(1), vec![Term::Var(v("x")), Term::Var(v("y"))]),
        );
        let g = substitute(&f, &v("x"), &Term::Var(v("y")));
        match &g {
            Formula::Exists(b, body) => {
                assert_ne!(b, &v("y"));
                match body.as_ref() {
                    Formula::Atom { args, .. } => {
                        assert_eq!(args[0], Term::Var(v("y")));
                        assert_eq!(args[1], Term::Var(b.clone()));
                    }
                    _ => panic!("expected atom"),
                }
            }
            _ => panic!("expected exists"),
        }
    }

    #[test]
    fn shadowed_substitution_is_identity() {
        let f = Formula::exists(v("x"), atom1(0, "x"));
        let g = substitute(&f, &v("x"), &Term::Const { value: 1, sort: SortId(0) });
        assert_eq!(f, g);
    }
}
