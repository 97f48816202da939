//! Aggregation-family invariants (range, gradients vs central differences,
//! interior preservation by grid search) and the root-form transformation
//! checked against exact enumeration.

use freqnet_core::caps::Caps;
use freqnet_core::ground::{for_each_world, world_log_prob, Kahan};
use freqnet_core::logic::{DomainSizes, Structure};
use freqnet_core::model::{to_root_form, validate, FunctionFamily, Model};
use freqnet_core::parse::parse_model;

use std::collections::HashMap;

fn lcg(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*state >> 11) as f64) / ((1u64 << 53) as f64)
}

fn sample_families(state: &mut u64) -> Vec<FunctionFamily> {
    let mut out = Vec::new();
    out.push(FunctionFamily::constant(lcg(state)));
    for arity in 1..=3usize {
        let w: Vec<f64> = (0..arity).map(|_| lcg(state) * 4.0 - 2.0).collect();
        let c = lcg(state) * 4.0 - 2.0;
        out.push(FunctionFamily::logistic(&w, c));
        out.push(FunctionFamily::probit(&w, c));
        out.push(FunctionFamily::cloglog(&w, c));
    }
    // a linear family within the box bounds: c in [0,1], weights scaled so
    // the image stays in [0,1]
    let c = 0.2 + 0.6 * lcg(state);
    let w: Vec<f64> = (0..2).map(|_| (lcg(state) - 0.5) * 2.0 * c.min(1.0 - c)).collect();
    out.push(FunctionFamily::linear(&w, c));
    out.push(FunctionFamily::bump(
        0.05 + 0.9 * lcg(state),
        lcg(state) * 5.0,
        lcg(state),
    ));
    out
}

#[test]
fn outputs_stay_in_unit_interval_on_a_grid() {
    let mut state = 7u64;
    for _ in 0..10 {
        for fam in sample_families(&mut state) {
            assert!(fam.check().is_empty(), "family {:?} failed checks", fam);
            let grid = 7usize;
            let mut idx = vec![0usize; fam.arity];
            loop {
                let inputs: Vec<f64> = idx.iter().map(|&i| i as f64 / (grid - 1) as f64).collect();
                let v = fam.eval(&inputs).unwrap();
                assert!((0.0..=1.0).contains(&v), "{:?} at {:?} -> {}", fam, inputs, v);
                let mut done = true;
                for d in (0..idx.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < grid {
                        done = false;
                        break;
                    }
                    idx[d] = 0;
                }
                if done || fam.arity == 0 {
                    break;
                }
            }
        }
    }
}

#[test]
fn interior_preserving_families_avoid_the_boundary_inside() {
    let mut state = 99u64;
    for _ in 0..10 {
        for fam in sample_families(&mut state) {
            if !fam.interior_preserving() || fam.arity == 0 {
                continue;
            }
            let grid = 9usize;
            let mut idx = vec![0usize; fam.arity];
            loop {
                let inputs: Vec<f64> =
                    idx.iter().map(|&i| (i + 1) as f64 / (grid + 1) as f64).collect();
                // strictly interior inputs must not map to 0 or 1
                let v = fam.eval(&inputs).unwrap();
                assert!(
                    v > 0.0 && v < 1.0,
                    "interior-preserving {:?} hit {} at {:?}",
                    fam,
                    v,
                    inputs
                );
                let mut done = true;
                for d in (0..idx.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < grid {
                        done = false;
                        break;
                    }
                    idx[d] = 0;
                }
                if done {
                    break;
                }
            }
        }
    }
}

/// Central-difference oracle for family gradients (acceptance tolerance
/// 1e-4 relative).
#[test]
fn analytic_gradients_match_central_differences() {
    let mut state = 42u64;
    let mut points = 0usize;
    let mut worst = 0.0f64;
    while points < 100 {
        for fam in sample_families(&mut state) {
            if !fam.is_differentiable() {
                continue;
            }
            let inputs: Vec<f64> = (0..fam.arity).map(|_| 0.05 + 0.9 * lcg(&mut state)).collect();
            let grad = fam.grad(&inputs).unwrap();
            for k in 0..fam.params.len() {
                let h = 1e-6 * fam.params[k].abs().max(1.0);
                let mut lo = fam.clone();
                let mut hi = fam.clone();
                lo.params[k] -= h;
                hi.params[k] += h;
                // nudged parameters may leave the valid box for bounded
                // families; skip those coordinates
                if !lo.check().is_empty() || !hi.check().is_empty() {
                    continue;
                }
                let fd = (hi.eval(&inputs).unwrap() - lo.eval(&inputs).unwrap()) / (2.0 * h);
                let denom = grad[k].abs().max(fd.abs()).max(1e-6);
                let rel = (grad[k] - fd).abs() / denom;
                worst = worst.max(rel);
                assert!(
                    rel <= 1e-4,
                    "{:?} param {}: analytic {} vs fd {} (rel {})",
                    fam,
                    k,
                    grad[k],
                    fd,
                    rel
                );
            }
            points += 1;
        }
    }
    assert!(worst <= 1e-4, "worst relative error {}", worst);
}

// ---------------------------------------------------------------------------
// root form
// ---------------------------------------------------------------------------

/// Exact joint over the original signature, as a map from sorted fact lists
/// to probability.
fn joint_over(
    model: &Model,
    sizes: &DomainSizes,
    original_rels: usize,
) -> HashMap<String, f64> {
    let mut out: HashMap<String, f64> = HashMap::new();
    for_each_world(model, sizes, &Caps::default(), |world, p| {
        let mut key_parts = Vec::new();
        for rel in model.signature().rel_ids().take(original_rels) {
            let mut tuples: Vec<&Vec<u32>> = world.tuples(rel).iter().collect();
            tuples.sort();
            key_parts.push(format!("{}:{:?}", rel.0, tuples));
        }
        *out.entry(key_parts.join(";")).or_insert(0.0) += p;
        Ok(true)
    })
    .unwrap();
    out
}

fn assert_same_marginals(original: &Model, transformed: &Model, size: usize) {
    let sizes_a = DomainSizes::uniform(original.signature(), size).unwrap();
    let sizes_b = DomainSizes::uniform(transformed.signature(), size).unwrap();
    let n = original.signature().relation_count();
    let a = joint_over(original, &sizes_a, n);
    let b = joint_over(transformed, &sizes_b, n);
    for (k, pa) in &a {
        let pb = b.get(k).copied().unwrap_or(0.0);
        assert!(
            (pa - pb).abs() < 1e-12,
            "world {} has probability {} vs {}",
            k,
            pa,
            pb
        );
    }
}

#[test]
fn root_form_of_threshold_model_adds_unary_coins() {
    let text = r#"
sort d;
relation Q(d);
relation R(d);
node Q { case true => 0.3; }
node R {
  parents: Q;
  case freq(Q(y) ; y) >= 0.2 => 0.7;
  case ~(freq(Q(y) ; y) >= 0.2) => 0.2;
}
"#;
    let model = parse_model(text).unwrap();
    let rf = to_root_form(&model).unwrap();
    let sig = rf.signature();
    assert_eq!(sig.relation_count(), 4);
    let p1 = sig.rel_id("R_p1").expect("coin for case 1");
    let p2 = sig.rel_id("R_p2").expect("coin for case 2");
    assert_eq!(sig.relation(p1).arity(), 1);
    assert_eq!(sig.relation(p2).arity(), 1);
    assert!(rf.is_root(p1) && rf.is_root(p2));
    assert!(validate(&rf).is_empty(), "{:?}", validate(&rf));
    // every node is a root or a deterministic child of roots
    for (rel, node) in rf.nodes() {
        if rf.is_root(rel) {
            continue;
        }
        for p in rf.parents(rel) {
            assert!(rf.is_root(*p), "parent of {:?} is not a root", rel);
        }
        match node {
            freqnet_core::model::NodeSpec::Partition { cases } => {
                for c in cases {
                    let f = c.prob.to_string();
                    assert!(f == "0" || f == "1", "non-deterministic probability {}", f);
                }
            }
            _ => panic!("functional node in root form"),
        }
    }
    assert_same_marginals(&model, &rf, 2);
}

#[test]
fn root_form_preserves_chain_joint_exactly() {
    let text = r#"
sort d;
relation Q(d);
relation R(d);
node Q { case true => 0.3; }
node R { parents: Q; case Q(x1) => 0.7; case ~Q(x1) => 0.2; }
"#;
    let model = parse_model(text).unwrap();
    let rf = to_root_form(&model).unwrap();
    assert_same_marginals(&model, &rf, 2);
}

#[test]
fn single_root_is_unchanged() {
    let model = parse_model("sort d; relation Q(d); node Q { case true => 0.3; }").unwrap();
    let rf = to_root_form(&model).unwrap();
    assert_eq!(rf.signature().relation_count(), 1);
    assert_eq!(rf.node(freqnet_core::logic::RelId(0)), model.node(freqnet_core::logic::RelId(0)));
}

#[test]
fn functional_input_is_rejected() {
    let model = parse_model(
        "sort d; relation Q(d); node Q { function: constant(0.3); }",
    )
    .unwrap();
    assert!(to_root_form(&model).is_err());
}

#[test]
fn validation_flags_structural_problems() {
    // linear family out of range
    let text = r#"
sort d;
relation Q(d);
relation R(d);
node Q { function: constant(0.3); }
node R { parents: Q; feature f = freq(Q(y) ; y); function: linear(2.0, c=0.0); }
"#;
    let model = parse_model(text).unwrap();
    let diags = validate(&model);
    assert!(!diags.is_empty());
    assert!(
        diags.iter().any(|d| d.message.contains("outside [0,1]")),
        "{:?}",
        diags
    );
    // the worked threshold example passes cleanly
    let good = parse_model(
        r#"sort d; relation Q(d); relation R(d);
node Q { case true => 0.3; }
node R { parents: Q; case freq(Q(y) ; y) >= 0.2 => 0.7; case ~(freq(Q(y) ; y) >= 0.2) => 0.2; }"#,
    )
    .unwrap();
    assert!(validate(&good).is_empty());
}

#[test]
fn world_log_prob_matches_after_root_form_on_sampled_worlds() {
    // spot check: a specific world's marginal probability is preserved
    let text = r#"
sort d;
relation Q(d);
relation R(d);
node Q { case true => 0.3; }
node R { parents: Q; case Q(x1) => 0.7; case ~Q(x1) => 0.2; }
"#;
    let model = parse_model(text).unwrap();
    let sizes = DomainSizes::uniform(model.signature(), 2).unwrap();
    let mut world = Structure::empty(model.signature().clone(), sizes);
    world.insert(freqnet_core::logic::RelId(0), vec![0]).unwrap();
    world.insert(freqnet_core::logic::RelId(1), vec![0]).unwrap();
    let direct = world_log_prob(&model, &world).unwrap().exp();
    // marginalize the root-form model over the coins
    let rf = to_root_form(&model).unwrap();
    let rf_sizes = DomainSizes::uniform(rf.signature(), 2).unwrap();
    let mut total = Kahan::default();
    for_each_world(&rf, &rf_sizes, &Caps::default(), |w, p| {
        let same = model
            .signature()
            .rel_ids()
            .all(|rel| w.tuples(rel) == world.tuples(rel));
        if same {
            total.add(p);
        }
        Ok(true)
    })
    .unwrap();
    assert!((total.total() - direct).abs() < 1e-12);
}
