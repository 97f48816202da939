use std::fmt::Write as _;

use thiserror::Error;

use freqnet_core::caps::Caps;
use freqnet_core::inference::{estimate_query, InferError, Query};
use freqnet_core::learn::{
    fit_params, sample_substructure, FitConfig, FitResult, LearnError, ParametricModel,
};
use freqnet_core::logic::DomainSizes;
use freqnet_core::model::{Model, NodeSpec};
use freqnet_core::projective::{
    compile_limit, compile_limit_full, compile_threshold_limit, limit_query, CompileError, QfLbn,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("experiment setup: {0}")]
    Setup(String),
}

/// A declarative experiment: size schedule, per-size sample counts, an
/// optional parameter grid, and the master seed.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub sizes: Vec<usize>,
    pub samples: Vec<usize>,
    pub grid: Vec<f64>,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.sizes.is_empty() {
            return Err(ExperimentError::Setup("size schedule is empty".into()));
        }
        if !self.sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(ExperimentError::Setup(
                "size schedule must be strictly increasing".into(),
            ));
        }
        if self.samples.is_empty() {
            return Err(ExperimentError::Setup("sample counts are empty".into()));
        }
        if self.samples.len() != 1 && self.samples.len() != self.sizes.len() {
            return Err(ExperimentError::Setup(
                "give one sample count or one per size".into(),
            ));
        }
        Ok(())
    }

    pub fn samples_for(&self, size_index: usize) -> usize {
        if self.samples.len() == 1 {
            self.samples[0]
        } else {
            self.samples[size_index]
        }
    }
}

/// Compile a model's asymptotic limit, dispatching on the node kinds.
pub fn compile_any(model: &Model, caps: &Caps, force: bool) -> Result<QfLbn<f64>, CompileError> {
    if model.all_partition() {
        compile_threshold_limit(model, caps)
    } else if model.all_functional() {
        compile_limit(model, caps, force)
    } else {
        Err(CompileError::Model(
            "mixed partition/functional models cannot be compiled".into(),
        ))
    }
}

// ---------------------------------------------------------------------------
// count-based regression mismatch (closed form)
// ---------------------------------------------------------------------------

/// The closed-form mismatch of count-based logistic regression across
/// domain sizes: weights fitted so that sigmoid(w * k) matches a 10%
/// frequency at k = 10 (from a 100-element subsample) and k = 100 (the full
/// 1000-element set), and the prediction when the subsample weight is
/// transferred to the full set.
#[derive(Debug, Clone)]
pub struct RlrMismatchReport {
    pub w_small: f64,
    pub w_large: f64,
    pub transfer_prediction: f64,
}

pub fn run_rlr_mismatch() -> RlrMismatchReport {
    // sigmoid(w * k) = p  =>  w = logit(p) / k with p = 0.1
    let logit = (0.1f64 / 0.9).ln();
    let w_small = logit / 10.0;
    let w_large = logit / 100.0;
    let transfer_prediction = sigmoid(w_small * 100.0);
    RlrMismatchReport {
        w_small,
        w_large,
        transfer_prediction,
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// convergence to the limit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub limit: f64,
    pub gap: f64,
}

/// Estimate the query at every size of the schedule and compare with the
/// compiled limit.
pub fn run_convergence(
    model: &Model,
    query: &Query,
    spec: &ExperimentSpec,
    caps: &Caps,
    force: bool,
) -> Result<Vec<ConvergenceRow>, ExperimentError> {
    spec.validate()?;
    let net = compile_any(model, caps, force)?;
    let limit = limit_query(&net, query, caps)?;
    let mut rows = Vec::with_capacity(spec.sizes.len());
    for (i, &n) in spec.sizes.iter().enumerate() {
        let sizes = DomainSizes::uniform(model.signature(), n)
            .map_err(|e| ExperimentError::Setup(e.to_string()))?;
        let est = estimate_query(model, &sizes, query, spec.samples_for(i), spec.seed)?;
        rows.push(ConvergenceRow {
            n,
            estimate: est.value,
            std_error: est.std_error,
            limit,
            gap: (est.value - limit).abs(),
        });
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("n,estimate,stderr,limit,abs_gap\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n, r.estimate, r.std_error, r.limit, r.gap
        );
    }
    out
}

// ---------------------------------------------------------------------------
// uniform-convergence sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub n: usize,
    pub w: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub limit: f64,
    pub gap: f64,
    /// Count-based contrast: |sigmoid(w * n * mu) - limit(w)|, defined when
    /// the swept node is a single-feature logistic.
    pub ref_gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Per size: (n, max gap over grid, max point std error, max ref gap).
    pub max_rows: Vec<(usize, f64, f64, Option<f64>)>,
    /// The compiled limit per grid value, for continuity checks.
    pub limits: Vec<(f64, f64)>,
}

/// Sweep one parameter of one relation over a grid, estimating the query at
/// each size and comparing against the per-parameter compiled limit.
#[allow(clippy::too_many_arguments)]
pub fn run_uniform_sweep(
    model: &Model,
    relation: &str,
    param: &str,
    query: &Query,
    spec: &ExperimentSpec,
    caps: &Caps,
    force: bool,
) -> Result<SweepReport, ExperimentError> {
    spec.validate()?;
    if spec.grid.is_empty() {
        return Err(ExperimentError::Setup("parameter grid is empty".into()));
    }
    let pm = ParametricModel::with_free(model, &[(relation, param)])?;
    let bounds = pm.bounds();
    for &w in &spec.grid {
        if !bounds[0].contains(w) {
            return Err(ExperimentError::Setup(format!(
                "grid point {} outside the parameter bounds",
                w
            )));
        }
    }
    let rel = model
        .signature()
        .rel_id(relation)
        .ok_or_else(|| ExperimentError::Setup(format!("unknown relation `{}`", relation)))?;
    let mut points = Vec::new();
    let mut limits = Vec::new();
    for (gi, &w) in spec.grid.iter().enumerate() {
        let instance = pm.with_params(&[w])?;
        let (net, aux) = compile_limit_full(&instance, caps, force, true)?;
        let limit = limit_query(&net, query, caps)?;
        limits.push((w, limit));
        // reference: frequency input of the swept relation in the limit
        let ref_mu = single_logistic_feature_mu(&instance, rel, &aux[rel.0]);
        for (i, &n) in spec.sizes.iter().enumerate() {
            let sizes = DomainSizes::uniform(instance.signature(), n)
                .map_err(|e| ExperimentError::Setup(e.to_string()))?;
            let est = estimate_query(
                &instance,
                &sizes,
                query,
                spec.samples_for(i),
                spec.seed.wrapping_add(gi as u64),
            )?;
            let ref_gap = ref_mu.map(|mu| (sigmoid(w * n as f64 * mu) - limit).abs());
            points.push(SweepPoint {
                n,
                w,
                estimate: est.value,
                std_error: est.std_error,
                limit,
                gap: (est.value - limit).abs(),
                ref_gap,
            });
        }
    }
    let mut max_rows = Vec::new();
    for &n in &spec.sizes {
        let of_n: Vec<&SweepPoint> = points.iter().filter(|p| p.n == n).collect();
        let max_gap = of_n.iter().map(|p| p.gap).fold(0.0, f64::max);
        let max_se = of_n.iter().map(|p| p.std_error).fold(0.0, f64::max);
        let max_ref = of_n
            .iter()
            .filter_map(|p| p.ref_gap)
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
        max_rows.push((n, max_gap, max_se, max_ref));
    }
    Ok(SweepReport {
        points,
        max_rows,
        limits,
    })
}

/// If the relation is a single-feature logistic node, the feature's
/// asymptotic frequency (the input the limit pushes through the sigmoid).
fn single_logistic_feature_mu(
    model: &Model,
    rel: freqnet_core::logic::RelId,
    aux: &freqnet_core::projective::CompiledAux,
) -> Option<f64> {
    match model.node(rel) {
        NodeSpec::Functional { features, family } => {
            if features.len() == 1
                && family.kind == freqnet_core::model::FamilyKind::Logistic
                && !aux.inputs.is_empty()
            {
                Some(aux.inputs[0][0])
            } else {
                None
            }
        }
        NodeSpec::Partition { .. } => None,
    }
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("n,w,gap,ref_gap\n");
    for p in &report.points {
        let rg = p.ref_gap.map(|g| g.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", p.n, p.w, p.gap, rg);
    }
    for (n, max_gap, _, max_ref) in &report.max_rows {
        let rg = max_ref.map(|g| g.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},max,{},{}", n, max_gap, rg);
    }
    out
}

// ---------------------------------------------------------------------------
// transfer learning across domain sizes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TransferReport {
    pub generator_limit: f64,
    pub fitted_limit: f64,
    pub gap: f64,
    pub fit: FitResult,
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

/// Generate one world of size `n` from the generator, sample `k` induced
/// substructures of size `m`, fit the skeleton's free parameters by maximum
/// likelihood under its compiled limit, and compare the fitted limit query
/// against the generator's.
#[allow(clippy::too_many_arguments)]
pub fn run_transfer(
    generator: &Model,
    skeleton: &Model,
    query: &Query,
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
    config: &FitConfig,
    caps: &Caps,
) -> Result<TransferReport, ExperimentError> {
    if m >= n {
        return Err(ExperimentError::Setup("subdomain size m must be below n".into()));
    }
    let gen_net = compile_any(generator, caps, false)?;
    let generator_limit = limit_query(&gen_net, query, caps)?;
    let sizes = DomainSizes::uniform(generator.signature(), n)
        .map_err(|e| ExperimentError::Setup(e.to_string()))?;
    let world = freqnet_core::inference::forward_sample(generator, &sizes, seed)
        .map_err(CompileError::from)?;
    let sub_sizes = DomainSizes::uniform(generator.signature(), m)
        .map_err(|e| ExperimentError::Setup(e.to_string()))?;
    let subs: Result<Vec<_>, LearnError> = (0..k)
        .map(|i| sample_substructure(&world, &sub_sizes, seed.wrapping_add(1 + i as u64)))
        .collect();
    let subs = subs?;
    let pm = ParametricModel::all_free(skeleton)?;
    if pm.dim() == 0 {
        return Err(ExperimentError::Setup(
            "the fit skeleton has no free differentiable parameters".into(),
        ));
    }
    let fit = fit_params(&pm, &subs, config, caps)?;
    let fitted_model = pm.with_params(&fit.params)?;
    let fitted_net = compile_limit(&fitted_model, caps, true)?;
    let fitted_limit = limit_query(&fitted_net, query, caps)?;
    Ok(TransferReport {
        generator_limit,
        fitted_limit,
        gap: (fitted_limit - generator_limit).abs(),
        fit,
        n,
        m,
        k,
    })
}
