//! Learning oracles: closed-form frequency fitting, subdomain sampling,
//! the Bernoulli maximum-likelihood closed form, gradient checks against
//! finite differences, and projective-consistency of subsampled fits.

use num::{BigRational, ToPrimitive};

use freqnet_core::caps::Caps;
use freqnet_core::inference::forward_sample;
use freqnet_core::learn::{
    fit_params, fit_partition_frequencies, projective_log_likelihood, sample_substructure,
    FitConfig, GradientMode, LearnError, ParametricModel,
};
use freqnet_core::logic::{DomainSizes, RelId, Structure};
use freqnet_core::model::NodeSpec;
use freqnet_core::parse::parse_model;

fn caps() -> Caps {
    Caps::default()
}

const CHAIN: &str = r#"
sort d;
relation Q(d);
relation R(d);
node Q { case true => 0.3; }
node R { parents: Q; case Q(x1) => 0.7; case ~Q(x1) => 0.2; }
"#;

const LOGISTIC: &str = r#"
sort d;
relation Q(d);
relation R(d);
node Q { function: constant(0.3); }
node R {
  parents: Q;
  feature mean_q = freq(Q(y) ; y);
  function: logistic(2.0, c=-1.0);
}
"#;

fn prob_of(model: &freqnet_core::model::Model, rel: usize, case: usize) -> BigRational {
    match model.node(RelId(rel)) {
        NodeSpec::Partition { cases } => cases[case].prob.clone(),
        _ => panic!("expected partition"),
    }
}

#[test]
fn frequency_fit_reads_off_conditional_frequencies() {
    let skeleton = parse_model(CHAIN).unwrap();
    let sizes = DomainSizes::uniform(skeleton.signature(), 10).unwrap();
    let mut data = Structure::empty(skeleton.signature().clone(), sizes);
    // Q on 0..4; R on 0..2 (within Q) and on 7 (outside Q)
    for e in 0..4u32 {
        data.insert(RelId(0), vec![e]).unwrap();
    }
    for e in 0..2u32 {
        data.insert(RelId(1), vec![e]).unwrap();
    }
    data.insert(RelId(1), vec![7]).unwrap();
    let (fitted, diags) = fit_partition_frequencies(&skeleton, &data).unwrap();
    assert!(diags.is_empty());
    assert_eq!(prob_of(&fitted, 0, 0), BigRational::new(4.into(), 10.into()));
    assert_eq!(prob_of(&fitted, 1, 0), BigRational::new(2.into(), 4.into()));
    assert_eq!(prob_of(&fitted, 1, 1), BigRational::new(1.into(), 6.into()));
}

#[test]
fn empty_cell_defaults_to_half_with_diagnostic() {
    let skeleton = parse_model(CHAIN).unwrap();
    let sizes = DomainSizes::uniform(skeleton.signature(), 4).unwrap();
    let data = Structure::empty(skeleton.signature().clone(), sizes);
    // Q empty: the Q(x1) case of R is never instantiated
    let (fitted, diags) = fit_partition_frequencies(&skeleton, &data).unwrap();
    assert_eq!(prob_of(&fitted, 1, 0), BigRational::new(1.into(), 2.into()));
    assert!(diags.iter().any(|d| d.message.contains("defaulted")));
}

#[test]
fn refitting_recovers_generating_parameters() {
    let model = parse_model(CHAIN).unwrap();
    let sizes = DomainSizes::uniform(model.signature(), 400).unwrap();
    let data = forward_sample(&model, &sizes, 2024).unwrap();
    let (fitted, _) = fit_partition_frequencies(&model, &data).unwrap();
    // binomial 3-sigma at n = 400
    let mu = prob_of(&fitted, 0, 0).to_f64().unwrap();
    assert!((mu - 0.3f64).abs() <= 3.0 * (0.3f64 * 0.7 / 400.0).sqrt());
    let a = prob_of(&fitted, 1, 0).to_f64().unwrap();
    assert!((a - 0.7f64).abs() <= 3.0 * (0.7f64 * 0.3 / (400.0 * 0.2)).sqrt());
}

// ---------------------------------------------------------------------------
// substructure sampling
// ---------------------------------------------------------------------------

#[test]
fn full_size_subsample_is_identity() {
    let model = parse_model(CHAIN).unwrap();
    let sizes = DomainSizes::uniform(model.signature(), 8).unwrap();
    let data = forward_sample(&model, &sizes, 5).unwrap();
    let sub = sample_substructure(&data, &sizes, 17).unwrap();
    for rel in model.signature().rel_ids() {
        assert_eq!(data.tuples(rel), sub.tuples(rel));
    }
}

#[test]
fn induced_facts_are_exactly_the_kept_ones() {
    let sig = freqnet_core::logic::Signature::build(&["d"], &[("E", &["d", "d"])]).unwrap();
    let sizes = DomainSizes::uniform(&sig, 6).unwrap();
    let mut data = Structure::empty(sig.clone(), sizes);
    for (a, b) in [(0u32, 1u32), (1, 2), (2, 3), (4, 5), (5, 0)] {
        data.insert(RelId(0), vec![a, b]).unwrap();
    }
    let m = DomainSizes::uniform(&sig, 4).unwrap();
    let sub = sample_substructure(&data, &m, 7).unwrap();
    // every induced fact maps back to an original fact over kept elements
    assert!(sub.tuples(RelId(0)).len() <= 5);
    for t in sub.tuples(RelId(0)) {
        assert!(t.iter().all(|&e| e < 4));
    }
    // determinism
    let sub2 = sample_substructure(&data, &m, 7).unwrap();
    assert_eq!(sub.tuples(RelId(0)), sub2.tuples(RelId(0)));
}

#[test]
fn subsample_size_bounds_are_enforced() {
    let sig = freqnet_core::logic::Signature::build(&["d"], &[("E", &["d", "d"])]).unwrap();
    let sizes = DomainSizes::uniform(&sig, 6).unwrap();
    let data = Structure::empty(sig.clone(), sizes);
    // must exceed the max arity (2)
    let too_small = DomainSizes::uniform(&sig, 2).unwrap();
    assert!(matches!(
        sample_substructure(&data, &too_small, 1),
        Err(LearnError::SubsampleSize { .. })
    ));
    let too_big = DomainSizes::uniform(&sig, 7).unwrap();
    assert!(matches!(
        sample_substructure(&data, &too_big, 1),
        Err(LearnError::SubsampleSize { .. })
    ));
}

// ---------------------------------------------------------------------------
// likelihood and fitting
// ---------------------------------------------------------------------------

#[test]
fn bernoulli_maximizer_is_the_sample_frequency() {
    // single root: fit mu to data with k of n atoms true; MLE = k/n
    let text = "sort d; relation Q(d); node Q { function: constant(0.5); }";
    let model = parse_model(text).unwrap();
    let sizes = DomainSizes::uniform(model.signature(), 10).unwrap();
    let mut data = Structure::empty(model.signature().clone(), sizes);
    for e in 0..3u32 {
        data.insert(RelId(0), vec![e]).unwrap();
    }
    let pm = ParametricModel::all_free(&model).unwrap();
    let result = fit_params(&pm, &[data], &FitConfig::default(), &caps()).unwrap();
    assert!((result.params[0] - 0.3).abs() < 1e-4, "{:?}", result.params);
    assert!(result.converged);
}

#[test]
fn likelihood_gradient_matches_finite_differences() {
    let model = parse_model(LOGISTIC).unwrap();
    let sizes = DomainSizes::uniform(model.signature(), 30).unwrap();
    let data: Vec<Structure> = (0..3)
        .map(|k| forward_sample(&model, &sizes, 100 + k).unwrap())
        .collect();
    let pm = ParametricModel::all_free(&model).unwrap();
    let params = pm.initial_params();
    let (_, grad, _) = projective_log_likelihood(&pm, &params, &data, &caps()).unwrap();
    for k in 0..params.len() {
        let h = 1e-5;
        let mut lo = params.clone();
        let mut hi = params.clone();
        lo[k] -= h;
        hi[k] += h;
        let (vlo, _, _) = projective_log_likelihood(&pm, &lo, &data, &caps()).unwrap();
        let (vhi, _, _) = projective_log_likelihood(&pm, &hi, &data, &caps()).unwrap();
        let fd = (vhi - vlo) / (2.0 * h);
        let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
        assert!(rel <= 1e-4, "param {}: {} vs {} (rel {})", k, grad[k], fd, rel);
    }
}

#[test]
fn empty_structure_list_gives_zero() {
    let model = parse_model(LOGISTIC).unwrap();
    let pm = ParametricModel::all_free(&model).unwrap();
    let (v, g, _) = projective_log_likelihood(&pm, &pm.initial_params(), &[], &caps()).unwrap();
    assert_eq!(v, 0.0);
    assert!(g.iter().all(|&x| x == 0.0));
}

#[test]
fn zero_iterations_returns_initial_params() {
    let model = parse_model(LOGISTIC).unwrap();
    let pm = ParametricModel::all_free(&model).unwrap();
    let sizes = DomainSizes::uniform(model.signature(), 20).unwrap();
    let data = forward_sample(&model, &sizes, 9).unwrap();
    let config = FitConfig {
        max_iterations: 0,
        ..FitConfig::default()
    };
    let result = fit_params(&pm, &[data], &config, &caps()).unwrap();
    assert_eq!(result.params, pm.initial_params());
    assert!(!result.converged);
    assert_eq!(result.iterations, 0);
}

#[test]
fn one_parameter_logistic_recovers_generator_weight() {
    // c fixed at -1, only w free: identifiable 1-D problem
    let generator = parse_model(LOGISTIC).unwrap();
    let sizes = DomainSizes::uniform(generator.signature(), 60).unwrap();
    let data: Vec<Structure> = (0..40)
        .map(|k| forward_sample(&generator, &sizes, 7000 + k).unwrap())
        .collect();
    let skeleton = parse_model(
        r#"
sort d;
relation Q(d);
relation R(d);
node Q { function: constant(0.3); }
node R {
  parents: Q;
  feature mean_q = freq(Q(y) ; y);
  function: logistic(0.0, c=-1.0);
}
"#,
    )
    .unwrap();
    let pm = ParametricModel::with_free(&skeleton, &[("R", "w1")]).unwrap();
    let config = FitConfig {
        max_iterations: 400,
        ..FitConfig::default()
    };
    let result = fit_params(&pm, &data, &config, &caps()).unwrap();
    assert!(
        (result.params[0] - 2.0).abs() < 0.2,
        "fitted w = {}",
        result.params[0]
    );
}

#[test]
fn accepted_steps_never_decrease_log_likelihood() {
    let generator = parse_model(LOGISTIC).unwrap();
    let sizes = DomainSizes::uniform(generator.signature(), 40).unwrap();
    let data: Vec<Structure> = (0..5)
        .map(|k| forward_sample(&generator, &sizes, 31 + k).unwrap())
        .collect();
    let pm = ParametricModel::all_free(&generator).unwrap();
    // walk the fit manually: evaluate the likelihood at each iterate count
    let mut last = f64::NEG_INFINITY;
    for iters in [1usize, 2, 4, 8, 16] {
        let config = FitConfig {
            max_iterations: iters,
            ..FitConfig::default()
        };
        let r = fit_params(&pm, &data, &config, &caps()).unwrap();
        assert!(
            r.log_likelihood >= last - 1e-12,
            "likelihood decreased: {} after {} iters (was {})",
            r.log_likelihood,
            iters,
            last
        );
        last = r.log_likelihood;
    }
}

#[test]
fn finite_difference_mode_agrees_with_analytic() {
    let model = parse_model(LOGISTIC).unwrap();
    let sizes = DomainSizes::uniform(model.signature(), 25).unwrap();
    let data = vec![forward_sample(&model, &sizes, 77).unwrap()];
    let pm = ParametricModel::with_free(&model, &[("R", "w1"), ("R", "c")]).unwrap();
    let analytic = fit_params(&pm, &data, &FitConfig::default(), &caps()).unwrap();
    let fd = fit_params(
        &pm,
        &data,
        &FitConfig {
            gradient_mode: GradientMode::FiniteDifference,
            ..FitConfig::default()
        },
        &caps(),
    )
    .unwrap();
    assert!((analytic.log_likelihood - fd.log_likelihood).abs() < 1e-6);
}

/// Projectivity makes subsampled fitting statistically consistent: the mean
/// fitted root frequency over many seeds agrees between full-size and
/// subsampled data.
#[test]
fn subsampled_fits_agree_in_expectation() {
    let model = parse_model(CHAIN).unwrap();
    let n = 60usize;
    let m = 20usize;
    let seeds = 100u64;
    let sizes = DomainSizes::uniform(model.signature(), n).unwrap();
    let sub_sizes = DomainSizes::uniform(model.signature(), m).unwrap();
    let mut full_mean = 0.0;
    let mut sub_mean = 0.0;
    let mut sub_sq = 0.0;
    for seed in 0..seeds {
        let data = forward_sample(&model, &sizes, 500 + seed).unwrap();
        let (fit_full, _) = fit_partition_frequencies(&model, &data).unwrap();
        full_mean += prob_of(&fit_full, 0, 0).to_f64().unwrap();
        let sub = sample_substructure(&data, &sub_sizes, 900 + seed).unwrap();
        let (fit_sub, _) = fit_partition_frequencies(&model, &sub).unwrap();
        let v = prob_of(&fit_sub, 0, 0).to_f64().unwrap();
        sub_mean += v;
        sub_sq += v * v;
    }
    full_mean /= seeds as f64;
    sub_mean /= seeds as f64;
    let sub_var = sub_sq / seeds as f64 - sub_mean * sub_mean;
    let se = (sub_var / seeds as f64).sqrt();
    assert!(
        (full_mean - sub_mean).abs() <= 3.0 * se + 1e-9,
        "full {} vs subsampled {} (se {})",
        full_mean,
        sub_mean,
        se
    );
}
