//! Parameter estimation: closed-form frequency fitting for partition
//! models, subdomain sampling, and gradient-based maximum likelihood for
//! functional models against their compiled projective limit.

use num::{BigRational, FromPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::caps::Caps;
use crate::ground::GroundError;
use crate::logic::{Binding, DomainSizes, EvalError, Evaluator, RelId, Structure};
use crate::model::{Diagnostic, FunctionFamily, Model, NodeSpec, ParamBounds, PartitionCase};
use crate::projective::{compile_limit_full, CompileError, QfLbn};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("partition violation in data at {atom}: {true_cases} cases true")]
    PartitionViolation { atom: String, true_cases: usize },
    #[error("substructure size for sort `{sort}` must be in {min}..={max}, got {got}")]
    SubsampleSize { sort: String, min: usize, max: usize, got: usize },
    #[error("learning configuration: {0}")]
    BadConfig(String),
    #[error("divergence (non-finite log-likelihood) at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("relation `{0}` has no free parameters to fit")]
    NothingToFit(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("model error: {0}")]
    Model(String),
}

/// Gradient computation mode for maximum-likelihood fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Analytic through final-layer families; central finite differences
    /// for parameters whose relation has descendants (their feature inputs
    /// depend on the parameter through recompilation).
    Analytic,
    /// Central finite differences for every coordinate.
    FiniteDifference,
}

/// Settings for projected gradient ascent with backtracking line search.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub gradient_mode: GradientMode,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 1.0,
            max_iterations: 200,
            tolerance: 1e-9,
            gradient_mode: GradientMode::Analytic,
            seed: 0,
        }
    }
}

impl FitConfig {
    fn check(&self) -> Result<(), LearnError> {
        if self.learning_rate <= 0.0 {
            return Err(LearnError::BadConfig("learning rate must be positive".into()));
        }
        if self.tolerance <= 0.0 {
            return Err(LearnError::BadConfig("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a fit: parameters within bounds, the final log-likelihood, and
/// whether the tolerance was reached.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub param_names: Vec<String>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

// ---------------------------------------------------------------------------
// closed-form frequency fitting for partition models
// ---------------------------------------------------------------------------

/// Set every case probability to the conditional relative frequency of the
/// node's relation among the tuples selecting that case in the data. Cells
/// with no selecting tuple fall back to 1/2 with a diagnostic.
pub fn fit_partition_frequencies(
    skeleton: &Model,
    data: &Structure,
) -> Result<(Model, Vec<Diagnostic>), LearnError> {
    let sig = skeleton.signature();
    let mut diagnostics = Vec::new();
    let mut nodes = Vec::with_capacity(sig.relation_count());
    for rel in sig.rel_ids() {
        let cases = match skeleton.node(rel) {
            NodeSpec::Partition { cases } => cases,
            NodeSpec::Functional { .. } => {
                return Err(LearnError::Model(format!(
                    "frequency fitting requires a partition model; `{}` is functional",
                    sig.relation(rel).name
                )))
            }
        };
        let mut totals = vec![0u64; cases.len()];
        let mut hits = vec![0u64; cases.len()];
        let mut eval = Evaluator::new(data);
        let xvars = skeleton.arg_vars(rel);
        let dims: Vec<usize> = sig
            .relation(rel)
            .arg_sorts
            .iter()
            .map(|s| data.sizes().size(*s))
            .collect();
        let mut tuple = vec![0u32; dims.len()];
        loop {
            let mut binding = Binding::new();
            for (v, &e) in xvars.iter().zip(tuple.iter()) {
                binding.push(v.clone(), e);
            }
            let mut chosen = None;
            let mut true_cases = 0;
            for (i, c) in cases.iter().enumerate() {
                if eval.evaluate(&mut binding, &c.formula)? {
                    true_cases += 1;
                    chosen = Some(i);
                }
            }
            if true_cases != 1 {
                let args: Vec<String> = tuple.iter().map(|e| e.to_string()).collect();
                return Err(LearnError::PartitionViolation {
                    atom: format!("{}({})", sig.relation(rel).name, args.join(", ")),
                    true_cases,
                });
            }
            let i = chosen.unwrap();
            totals[i] += 1;
            if data.holds(rel, &tuple) {
                hits[i] += 1;
            }
            // odometer (empty-arity relations evaluate once)
            if dims.is_empty() {
                break;
            }
            let mut done = true;
            for d in (0..tuple.len()).rev() {
                tuple[d] += 1;
                if (tuple[d] as usize) < dims[d] {
                    done = false;
                    break;
                }
                tuple[d] = 0;
            }
            if done {
                break;
            }
        }
        let fitted: Vec<PartitionCase> = cases
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let prob = if totals[i] == 0 {
                    diagnostics.push(Diagnostic {
                        relation: Some(sig.relation(rel).name.clone()),
                        message: format!(
                            "case {} never instantiated in the data; probability defaulted to 1/2",
                            i + 1
                        ),
                    });
                    BigRational::new(1.into(), 2.into())
                } else {
                    BigRational::new(
                        num::BigInt::from_u64(hits[i]).unwrap(),
                        num::BigInt::from_u64(totals[i]).unwrap(),
                    )
                };
                PartitionCase {
                    formula: c.formula.clone(),
                    prob,
                }
            })
            .collect();
        nodes.push(NodeSpec::Partition { cases: fitted });
    }
    let extra = vec![std::collections::BTreeSet::new(); nodes.len()];
    let model = Model::new(sig.clone(), nodes, extra).map_err(|e| LearnError::Model(e.to_string()))?;
    Ok((model, diagnostics))
}

// ---------------------------------------------------------------------------
// subdomain sampling
// ---------------------------------------------------------------------------

/// Uniformly sample an induced substructure with the requested per-sort
/// sizes. Each target size must exceed the highest relation arity (so that
/// substructures can instantiate every atom) and not exceed the data's
/// size. Kept elements are renumbered in ascending order; deterministic per
/// seed.
pub fn sample_substructure(
    data: &Structure,
    m: &DomainSizes,
    seed: u64,
) -> Result<Structure, LearnError> {
    let sig = data.signature();
    let max_arity = sig.max_arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<Vec<u32>> = Vec::with_capacity(sig.sort_count());
    for (sid, name) in sig.sorts() {
        let n = data.sizes().size(sid);
        let want = m.size(sid);
        if want <= max_arity || want > n {
            return Err(LearnError::SubsampleSize {
                sort: name.to_string(),
                min: max_arity + 1,
                max: n,
                got: want,
            });
        }
        let mut chosen = rand::seq::index::sample(&mut rng, n, want).into_vec();
        chosen.sort_unstable();
        keep.push(chosen.into_iter().map(|e| e as u32).collect());
    }
    let mut out = Structure::empty(sig.clone(), m.clone());
    for (rel, r) in sig.relations() {
        'tuples: for tuple in data.tuples(rel) {
            let mut mapped = Vec::with_capacity(tuple.len());
            for (i, &e) in tuple.iter().enumerate() {
                let sort = r.arg_sorts[i];
                match keep[sort.0].binary_search(&e) {
                    Ok(new) => mapped.push(new as u32),
                    Err(_) => continue 'tuples,
                }
            }
            out.insert(rel, mapped).map_err(|e| LearnError::Model(e.to_string()))?;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// likelihood against the projective limit
// ---------------------------------------------------------------------------

/// A functional model together with the designation of which family
/// parameters are free for fitting.
#[derive(Debug, Clone)]
pub struct ParametricModel {
    base: Model,
    free: Vec<(RelId, usize)>,
    gradient_forced_fd: bool,
}

impl ParametricModel {
    /// All parameters of all differentiable families are free.
    pub fn all_free(model: &Model) -> Result<Self, LearnError> {
        let mut free = Vec::new();
        for (rel, node) in model.nodes() {
            if let NodeSpec::Functional { family, .. } = node {
                if family.is_differentiable() {
                    for i in 0..family.params.len() {
                        free.push((rel, i));
                    }
                }
            }
        }
        Ok(ParametricModel {
            base: model.clone(),
            free,
            gradient_forced_fd: false,
        })
    }

    /// Free exactly the named `(relation, parameter)` pairs, e.g. `("R",
    /// "w1")`.
    pub fn with_free(model: &Model, free: &[(&str, &str)]) -> Result<Self, LearnError> {
        let sig = model.signature();
        let mut out = Vec::new();
        for (rel_name, param_name) in free {
            let rel = sig
                .rel_id(rel_name)
                .ok_or_else(|| LearnError::Model(format!("unknown relation `{}`", rel_name)))?;
            let family = match model.node(rel) {
                NodeSpec::Functional { family, .. } => family,
                NodeSpec::Partition { .. } => {
                    return Err(LearnError::Model(format!(
                        "`{}` is a partition node; gradient fitting needs functional nodes",
                        rel_name
                    )))
                }
            };
            let idx = family
                .param_names()
                .iter()
                .position(|n| n == param_name)
                .ok_or_else(|| {
                    LearnError::Model(format!("`{}` has no parameter `{}`", rel_name, param_name))
                })?;
            out.push((rel, idx));
        }
        Ok(ParametricModel {
            base: model.clone(),
            free: out,
            gradient_forced_fd: false,
        })
    }

    pub fn base(&self) -> &Model {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn param_names(&self) -> Vec<String> {
        let sig = self.base.signature();
        self.free
            .iter()
            .map(|(rel, i)| {
                let family = self.family(*rel);
                format!("{}.{}", sig.relation(*rel).name, family.param_names()[*i])
            })
            .collect()
    }

    fn family(&self, rel: RelId) -> &FunctionFamily {
        match self.base.node(rel) {
            NodeSpec::Functional { family, .. } => family,
            NodeSpec::Partition { .. } => unreachable!(),
        }
    }

    pub fn initial_params(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|(rel, i)| self.family(*rel).params[*i])
            .collect()
    }

    pub fn bounds(&self) -> Vec<ParamBounds> {
        self.free
            .iter()
            .map(|(rel, i)| self.family(*rel).param_bounds()[*i])
            .collect()
    }

    /// Instantiate the model at the given free-parameter values.
    pub fn with_params(&self, params: &[f64]) -> Result<Model, LearnError> {
        assert_eq!(params.len(), self.free.len());
        let mut model = self.base.clone();
        for (k, (rel, i)) in self.free.iter().enumerate() {
            let node = match model.node(*rel) {
                NodeSpec::Functional { features, family } => {
                    let mut family = family.clone();
                    family.params[*i] = params[k];
                    NodeSpec::Functional {
                        features: features.clone(),
                        family,
                    }
                }
                NodeSpec::Partition { .. } => unreachable!(),
            };
            model = model.with_node(*rel, node).map_err(|e| LearnError::Model(e.to_string()))?;
        }
        Ok(model)
    }

    /// Relations whose compiled probabilities depend on the parameter
    /// through lower layers (any strict descendant exists).
    fn needs_finite_difference(&self, rel: RelId) -> bool {
        !self.base.descendants(rel).is_empty()
    }
}

/// Log-likelihood (and its value only) of structures under the compiled
/// limit of the instantiated model.
fn limit_log_likelihood(
    net: &QfLbn<f64>,
    structures: &[Structure],
) -> Result<(f64, Vec<Diagnostic>), LearnError> {
    let mut total = 0.0f64;
    let mut diagnostics = Vec::new();
    for s in structures {
        for rel in net.signature().rel_ids() {
            let node = net.node(rel)?;
            for_each_tuple(s, net.signature().relation(rel).arg_sorts.as_slice(), |tuple| {
                let idx = table_index(net, node, s, tuple);
                let q = node.table[idx];
                let present = s.holds(rel, tuple);
                let p = if present { q } else { 1.0 - q };
                if p <= 0.0 {
                    diagnostics.push(Diagnostic {
                        relation: Some(net.signature().relation(rel).name.clone()),
                        message: format!("observed atom has limit probability 0 at {:?}", tuple),
                    });
                    total = f64::NEG_INFINITY;
                } else {
                    total += p.ln();
                }
            });
        }
    }
    Ok((total, diagnostics))
}

fn for_each_tuple(s: &Structure, sorts: &[crate::logic::SortId], mut f: impl FnMut(&[u32])) {
    let dims: Vec<usize> = sorts.iter().map(|x| s.sizes().size(*x)).collect();
    if dims.is_empty() {
        f(&[]);
        return;
    }
    let mut tuple = vec![0u32; dims.len()];
    'outer: loop {
        f(&tuple);
        for i in (0..tuple.len()).rev() {
            tuple[i] += 1;
            if (tuple[i] as usize) < dims[i] {
                continue 'outer;
            }
            tuple[i] = 0;
        }
        break;
    }
}

/// Table index for an atom given the observed structure (dependency atoms
/// are read off the data).
fn table_index(net: &QfLbn<f64>, node: &crate::projective::QfNode<f64>, s: &Structure, tuple: &[u32]) -> usize {
    let _ = net;
    let mut idx = 0usize;
    for (b, pat) in node.patterns.iter().enumerate() {
        let concrete: Vec<u32> = pat.args.iter().map(|&i| tuple[i]).collect();
        if s.holds(pat.rel, &concrete) {
            idx |= 1 << b;
        }
    }
    idx
}

/// Sum over structures and ground atoms of the log probability of the
/// observed truth value under the compiled limit, with the gradient with
/// respect to the free parameters. Final-layer parameters get analytic
/// chain-rule gradients; parameters with downstream dependents are
/// differentiated by central finite differences on the whole objective.
pub fn projective_log_likelihood(
    pm: &ParametricModel,
    params: &[f64],
    structures: &[Structure],
    caps: &Caps,
) -> Result<(f64, Vec<f64>, Vec<Diagnostic>), LearnError> {
    let model = pm.with_params(params)?;
    let (net, aux) = compile_limit_full(&model, caps, false, false)?;
    let (value, diagnostics) = limit_log_likelihood(&net, structures)?;
    if structures.is_empty() {
        return Ok((0.0, vec![0.0; params.len()], diagnostics));
    }
    let mut grad = vec![0.0f64; params.len()];
    for (k, (rel, pi)) in pm.free.iter().enumerate() {
        if pm.needs_finite_difference(*rel) || pm.gradient_forced_fd {
            grad[k] = central_difference(pm, params, structures, caps, k)?;
            continue;
        }
        // analytic: d/dtheta log q = family.grad at the diagram's feature
        // inputs, divided by q (or -(1-q))
        let node = net.node(*rel)?;
        let family = match model.node(*rel) {
            NodeSpec::Functional { family, .. } => family.clone(),
            NodeSpec::Partition { .. } => unreachable!(),
        };
        let inputs = &aux[rel.0].inputs;
        let mut g = 0.0f64;
        let arg_sorts = net.signature().relation(*rel).arg_sorts.clone();
        let mut failed = None;
        for s in structures {
            for_each_tuple(s, &arg_sorts, |tuple| {
                if failed.is_some() {
                    return;
                }
                let idx = table_index(&net, node, s, tuple);
                let q = node.table[idx];
                let dq = match family.grad(&inputs[idx]) {
                    Ok(gr) => gr[*pi],
                    Err(e) => {
                        failed = Some(LearnError::Model(e.to_string()));
                        return;
                    }
                };
                let present = s.holds(*rel, tuple);
                if present {
                    if q > 0.0 {
                        g += dq / q;
                    }
                } else if q < 1.0 {
                    g -= dq / (1.0 - q);
                }
            });
        }
        if let Some(e) = failed {
            return Err(e);
        }
        grad[k] = g;
    }
    Ok((value, grad, diagnostics))
}

fn central_difference(
    pm: &ParametricModel,
    params: &[f64],
    structures: &[Structure],
    caps: &Caps,
    k: usize,
) -> Result<f64, LearnError> {
    let h = 1e-5 * params[k].abs().max(1.0);
    let mut lo = params.to_vec();
    let mut hi = params.to_vec();
    lo[k] -= h;
    hi[k] += h;
    let bounds = pm.bounds();
    lo[k] = bounds[k].clamp(lo[k]);
    hi[k] = bounds[k].clamp(hi[k]);
    let span = hi[k] - lo[k];
    if span == 0.0 {
        return Ok(0.0);
    }
    let eval_at = |p: &[f64]| -> Result<f64, LearnError> {
        let model = pm.with_params(p)?;
        let (net, _) = compile_limit_full(&model, caps, false, false)?;
        Ok(limit_log_likelihood(&net, structures)?.0)
    };
    Ok((eval_at(&hi)? - eval_at(&lo)?) / span)
}

/// Projected gradient ascent with backtracking line search: accepted steps
/// never decrease the log-likelihood.
pub fn fit_params(
    pm: &ParametricModel,
    structures: &[Structure],
    config: &FitConfig,
    caps: &Caps,
) -> Result<FitResult, LearnError> {
    config.check()?;
    let mut pm = pm.clone();
    pm.gradient_forced_fd = config.gradient_mode == GradientMode::FiniteDifference;
    let bounds = pm.bounds();
    let mut params = pm.initial_params();
    let (mut value, mut grad, _) = projective_log_likelihood(&pm, &params, structures, caps)?;
    if !value.is_finite() && value != f64::NEG_INFINITY {
        return Err(LearnError::Diverged { iteration: 0 });
    }
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut step = config.learning_rate;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = params
                .iter()
                .zip(grad.iter())
                .zip(bounds.iter())
                .map(|((p, g), b)| b.clamp(p + step * g))
                .collect();
            if candidate == params {
                break;
            }
            let (v2, g2, _) = projective_log_likelihood(&pm, &candidate, structures, caps)?;
            if v2.is_nan() {
                return Err(LearnError::Diverged { iteration: iterations });
            }
            if v2 >= value {
                let improvement = v2 - value;
                params = candidate;
                value = v2;
                grad = g2;
                accepted = true;
                if improvement < config.tolerance {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(FitResult {
        params,
        param_names: pm.param_names(),
        log_likelihood: value,
        iterations,
        converged,
    })
}
