//! Counting-semantics oracles: spec'd values computed by hand or by an
//! independent evaluator, plus structural properties of the counting
//! operators.

use std::sync::Arc;

use num::{BigRational, FromPrimitive, Zero};
use proptest::prelude::*;

use freqnet_core::logic::{
    count, evaluate, frequency, Binding, DomainSizes, Formula, FreqCmp, RelId, Signature, SortId,
    Structure, Term, Var,
};

fn sig_q() -> Arc<Signature> {
    Signature::build(&["d"], &[("Q", &["d"])]).unwrap()
}

fn sig_qp() -> Arc<Signature> {
    Signature::build(&["d"], &[("Q", &["d"]), ("P", &["d"])]).unwrap()
}

fn v(name: &str) -> Var {
    Var::new(name, SortId(0))
}

fn atom(rel: usize, var: &str) -> Formula {
    Formula::atom(RelId(rel), vec![Term::Var(v(var))])
}

fn structure(sig: &Arc<Signature>, size: usize, facts: &[(usize, &[u32])]) -> Structure {
    let sizes = DomainSizes::uniform(sig, size).unwrap();
    let mut s = Structure::empty(sig.clone(), sizes);
    for (rel, tuples) in facts {
        for &t in *tuples {
            s.insert(RelId(*rel), vec![t]).unwrap();
        }
    }
    s
}

fn freq_ge(phi: Formula, psi: Formula, binders: Vec<Var>, r: f64) -> Formula {
    Formula::FreqCmp(Box::new(FreqCmp {
        slack_on_left: false,
        slack: BigRational::from_f64(r).unwrap(),
        lhs_num: phi,
        lhs_den: psi,
        rhs_num: Formula::Bool(false),
        rhs_den: Formula::Bool(true),
        binders,
    }))
}

#[test]
fn unconditional_threshold_holds() {
    // D = {0..4}, Q = {0,1}: ||Q(y)||_y = 0.4 >= 0.01
    let sig = sig_q();
    let s = structure(&sig, 5, &[(0, &[0, 1])]);
    let f = freq_ge(atom(0, "y"), Formula::Bool(true), vec![v("y")], 0.01);
    assert!(evaluate(&s, &Binding::new(), &f).unwrap());
}

#[test]
fn empty_condition_makes_comparison_false() {
    // psi never satisfied: ||phi | psi|| >= 0 is false, not an error
    let sig = sig_qp();
    let s = structure(&sig, 5, &[(0, &[0, 1])]);
    let f = freq_ge(atom(0, "y"), atom(1, "y"), vec![v("y")], 0.0);
    assert!(!evaluate(&s, &Binding::new(), &f).unwrap());
}

#[test]
fn contradiction_never_holds() {
    let sig = sig_q();
    for size in 1..6 {
        let s = structure(&sig, size, &[(0, &[0])]);
        let f = Formula::exists(v("y"), Formula::and(atom(0, "y"), Formula::not(atom(0, "y"))));
        assert!(!evaluate(&s, &Binding::new(), &f).unwrap());
    }
}

#[test]
fn count_examples() {
    let sig = sig_q();
    let s = structure(&sig, 5, &[(0, &[0, 1])]);
    assert_eq!(count(&s, &Binding::new(), &atom(0, "y"), &[v("y")]).unwrap(), 2);
    assert_eq!(
        count(&s, &Binding::new(), &Formula::Bool(true), &[v("y1"), v("y2")]).unwrap(),
        25
    );
}

#[test]
fn count_two_sorts_product() {
    let sig = Signature::build(&["a", "b"], &[("R", &["a", "b"])]).unwrap();
    let sizes = DomainSizes::new(&sig, &[3, 4]).unwrap();
    let s = Structure::empty(sig.clone(), sizes);
    let binders = vec![Var::new("x", SortId(0)), Var::new("y", SortId(1))];
    assert_eq!(count(&s, &Binding::new(), &Formula::Bool(true), &binders).unwrap(), 12);
}

#[test]
fn frequency_examples() {
    // Q = {0,1}, P = {0,2}, D = {0..4}: freq(Q | P) = 1/2
    let sig = sig_qp();
    let sizes = DomainSizes::uniform(&sig, 5).unwrap();
    let mut s = Structure::empty(sig.clone(), sizes);
    for e in [0u32, 1] {
        s.insert(RelId(0), vec![e]).unwrap();
    }
    for e in [0u32, 2] {
        s.insert(RelId(1), vec![e]).unwrap();
    }
    let half = frequency(&s, &Binding::new(), &atom(0, "x"), &atom(1, "x"), &[v("x")])
        .unwrap()
        .unwrap();
    assert_eq!(half, BigRational::new(1.into(), 2.into()));

    let none = frequency(&s, &Binding::new(), &atom(0, "x"), &Formula::Bool(false), &[v("x")])
        .unwrap();
    assert!(none.is_none());

    let one = frequency(&s, &Binding::new(), &atom(0, "x"), &atom(0, "x"), &[v("x")])
        .unwrap()
        .unwrap();
    assert_eq!(one, BigRational::from_integer(1.into()));
}

#[test]
fn unbound_variable_is_an_error() {
    let sig = sig_q();
    let s = structure(&sig, 3, &[]);
    assert!(evaluate(&s, &Binding::new(), &atom(0, "x")).is_err());
}

// ---------------------------------------------------------------------------
// property tests
// ---------------------------------------------------------------------------

/// Independent truth-table oracle for quantifier-free, frequency-free
/// formulas: ground the formula under the binding and fold truth values.
fn oracle_eval(s: &Structure, binding: &[(Var, u32)], f: &Formula) -> bool {
    match f {
        Formula::Bool(b) => *b,
        Formula::Atom { rel, args } => {
            let tuple: Vec<u32> = args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => binding.iter().rev().find(|(w, _)| w == v).unwrap().1,
                    Term::Const { value, .. } => *value,
                })
                .collect();
            s.holds(*rel, &tuple)
        }
        Formula::Not(g) => !oracle_eval(s, binding, g),
        Formula::And(a, b) => oracle_eval(s, binding, a) && oracle_eval(s, binding, b),
        Formula::Or(a, b) => oracle_eval(s, binding, a) || oracle_eval(s, binding, b),
        Formula::Implies(a, b) => !oracle_eval(s, binding, a) || oracle_eval(s, binding, b),
        _ => unreachable!("oracle only handles quantifier-free formulas"),
    }
}

fn arb_qf_formula(depth: u32) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::Bool(true)),
        Just(Formula::Bool(false)),
        (0usize..2, prop_oneof![Just("x"), Just("y")]).prop_map(|(r, name)| atom(r, name)),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
        ]
    })
}

proptest! {
    #[test]
    fn qf_eval_matches_truth_table_oracle(
        f in arb_qf_formula(3),
        q_facts in proptest::collection::btree_set(0u32..4, 0..4),
        p_facts in proptest::collection::btree_set(0u32..4, 0..4),
        x in 0u32..4,
        y in 0u32..4,
    ) {
        let sig = sig_qp();
        let sizes = DomainSizes::uniform(&sig, 4).unwrap();
        let mut s = Structure::empty(sig.clone(), sizes);
        for e in q_facts { s.insert(RelId(0), vec![e]).unwrap(); }
        for e in p_facts { s.insert(RelId(1), vec![e]).unwrap(); }
        let binding = [(v("x"), x), (v("y"), y)];
        let got = evaluate(&s, &Binding::of(&binding), &f).unwrap();
        let want = oracle_eval(&s, &binding, &f);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn count_complement_sums_to_product(
        f in arb_qf_formula(3),
        q_facts in proptest::collection::btree_set(0u32..4, 0..4),
        p_facts in proptest::collection::btree_set(0u32..4, 0..4),
    ) {
        let sig = sig_qp();
        let sizes = DomainSizes::uniform(&sig, 4).unwrap();
        let mut s = Structure::empty(sig.clone(), sizes);
        for e in q_facts { s.insert(RelId(0), vec![e]).unwrap(); }
        for e in p_facts { s.insert(RelId(1), vec![e]).unwrap(); }
        let binders = [v("x"), v("y")];
        let a = count(&s, &Binding::new(), &f, &binders).unwrap();
        let b = count(&s, &Binding::new(), &Formula::not(f), &binders).unwrap();
        prop_assert_eq!(a + b, 16);
    }

    #[test]
    fn frequency_is_isomorphism_invariant(
        q_facts in proptest::collection::btree_set(0u32..5, 0..5),
        p_facts in proptest::collection::btree_set(0u32..5, 0..5),
        perm_seed in 0u64..1000,
    ) {
        let sig = sig_qp();
        let sizes = DomainSizes::uniform(&sig, 5).unwrap();
        let mut s = Structure::empty(sig.clone(), sizes);
        for e in q_facts { s.insert(RelId(0), vec![e]).unwrap(); }
        for e in p_facts { s.insert(RelId(1), vec![e]).unwrap(); }
        // a deterministic permutation of 0..5 from the seed
        let mut perm: Vec<u32> = (0..5).collect();
        let mut state = perm_seed;
        for i in (1..5usize).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            perm.swap(i, j);
        }
        let permuted = s.permuted(&[perm]);
        let f = atom(0, "x");
        let g = atom(1, "x");
        let a = frequency(&s, &Binding::new(), &f, &g, &[v("x")]).unwrap();
        let b = frequency(&permuted, &Binding::new(), &f, &g, &[v("x")]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zero_denominator_comparison_never_errors(
        q_facts in proptest::collection::btree_set(0u32..4, 0..4),
        r in 0.0f64..1.0,
    ) {
        let sig = sig_qp();
        let sizes = DomainSizes::uniform(&sig, 4).unwrap();
        let mut s = Structure::empty(sig.clone(), sizes);
        for e in q_facts { s.insert(RelId(0), vec![e]).unwrap(); }
        // P empty: conditioning on P(y) can never hold
        let f = freq_ge(atom(0, "y"), atom(1, "y"), vec![v("y")], r);
        prop_assert!(!evaluate(&s, &Binding::new(), &f).unwrap());
    }
}

#[test]
fn free_variables_of_comparison_are_empty() {
    let f = freq_ge(atom(0, "y"), Formula::Bool(true), vec![v("y")], 0.5);
    assert!(freqnet_core::logic::free_variables(&f).is_empty());
    assert!(BigRational::zero() >= BigRational::zero());
}
