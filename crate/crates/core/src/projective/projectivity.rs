use crate::caps::Caps;
use crate::inference::{exact_query, Query};
use crate::logic::DomainSizes;
use crate::model::Model;
use crate::parse::print_formula;

use super::CompileError;

/// One query's exact probabilities across the size schedule.
#[derive(Debug, Clone)]
pub struct ProjectivityRow {
    pub query: String,
    pub values: Vec<(usize, f64)>,
    pub max_deviation: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct ProjectivityReport {
    pub rows: Vec<ProjectivityRow>,
    pub tolerance: f64,
}

impl ProjectivityReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }
}

/// Verify that a quantifier-free model's exact query probabilities do not
/// depend on the domain size (tolerance 1e-12). Non-quantifier-free models
/// are rejected.
pub fn check_projectivity(
    model: &Model,
    sizes: &[usize],
    queries: &[Query],
    caps: &Caps,
) -> Result<ProjectivityReport, CompileError> {
    if !model.is_quantifier_free() {
        return Err(CompileError::Unsupported(
            "projectivity check requires a quantifier-free model".into(),
        ));
    }
    let tolerance = 1e-12;
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        let mut values = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let domain = DomainSizes::uniform(model.signature(), n)
                .map_err(|e| CompileError::Model(e.to_string()))?;
            values.push((n, exact_query(model, &domain, q, caps)?));
        }
        let lo = values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        let hi = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let max_deviation = hi - lo;
        rows.push(ProjectivityRow {
            query: describe_query(model, q),
            values,
            max_deviation,
            ok: max_deviation <= tolerance,
        });
    }
    Ok(ProjectivityReport { rows, tolerance })
}

fn describe_query(model: &Model, q: &Query) -> String {
    let sig = model.signature();
    let lit = |l: &crate::inference::Literal| {
        let f = crate::ground::atom_to_formula(model, &l.atom);
        let body = print_formula(&f, sig);
        if l.positive {
            body
        } else {
            format!("~{}", body)
        }
    };
    let mut s = lit(&q.target);
    if !q.evidence.is_empty() {
        s.push_str(" | ");
        let parts: Vec<String> = q.evidence.iter().map(lit).collect();
        s.push_str(&parts.join(", "));
    }
    s
}
