use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

/// The aggregation-function families. Every family maps `[0,1]^arity` into
/// `[0,1]` for all parameters within bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// No inputs; a single probability parameter.
    Constant,
    /// `(w·x)/n + c`, coefficients box-bounded so the image stays in [0,1].
    Linear,
    /// `sigmoid(w·x + c)`.
    Logistic,
    /// Standard normal CDF of `w·x + c`.
    Probit,
    /// `1 - exp(-exp(w·x + c))`, the complementary log-log link.
    Cloglog,
    /// `alpha * exp(-beta (x - p)^2)`, peaked at an optimum input `p`.
    Bump,
    /// Explicit lookup on {0,1}-valued inputs (the degenerate case).
    Table,
}

/// A parametric aggregation function: kind, parameter vector and input arity.
///
/// Parameter layout: `Constant` -> [p]; affine kinds -> [w1..wn, c];
/// `Bump` -> [alpha, beta, p] (arity 1); `Table` -> 2^arity probabilities,
/// entry `i` belonging to the input pattern whose bit `b` (least significant
/// = input 0) is `(i >> b) & 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily {
    pub kind: FamilyKind,
    pub params: Vec<f64>,
    pub arity: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("parameter vector has wrong length for {kind:?}: expected {expected}, got {got}")]
    ParamCount { kind: FamilyKind, expected: usize, got: usize },
    #[error("parameter {index} = {value} outside bounds [{lo}, {hi}]")]
    ParamOutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("linear coefficients map outside [0,1]: c={c}, max={max}, min={min}")]
    LinearRange { c: f64, max: f64, min: f64 },
    #[error("input {index} = {value} outside [0,1]")]
    InputOutOfBounds { index: usize, value: f64 },
    #[error("input count mismatch: expected {expected}, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("table family requires {{0,1}}-valued inputs, got {0}")]
    NonBooleanTableInput(f64),
    #[error("gradient unsupported for the table family")]
    GradientUnsupported,
}

/// Per-parameter bounds: a compact interval or all of the reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamBounds {
    Interval(f64, f64),
    Reals,
}

impl ParamBounds {
    pub fn clamp(&self, x: f64) -> f64 {
        match self {
            ParamBounds::Interval(lo, hi) => x.clamp(*lo, *hi),
            ParamBounds::Reals => x,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            ParamBounds::Interval(lo, hi) => *lo <= x && x <= *hi,
            ParamBounds::Reals => x.is_finite(),
        }
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

impl FunctionFamily {
    pub fn constant(p: f64) -> Self {
        FunctionFamily {
            kind: FamilyKind::Constant,
            params: vec![p],
            arity: 0,
        }
    }

    pub fn linear(weights: &[f64], c: f64) -> Self {
        let mut params = weights.to_vec();
        params.push(c);
        FunctionFamily {
            kind: FamilyKind::Linear,
            arity: weights.len(),
            params,
        }
    }

    pub fn logistic(weights: &[f64], c: f64) -> Self {
        let mut params = weights.to_vec();
        params.push(c);
        FunctionFamily {
            kind: FamilyKind::Logistic,
            arity: weights.len(),
            params,
        }
    }

    pub fn probit(weights: &[f64], c: f64) -> Self {
        let mut params = weights.to_vec();
        params.push(c);
        FunctionFamily {
            kind: FamilyKind::Probit,
            arity: weights.len(),
            params,
        }
    }

    pub fn cloglog(weights: &[f64], c: f64) -> Self {
        let mut params = weights.to_vec();
        params.push(c);
        FunctionFamily {
            kind: FamilyKind::Cloglog,
            arity: weights.len(),
            params,
        }
    }

    pub fn bump(alpha: f64, beta: f64, p: f64) -> Self {
        FunctionFamily {
            kind: FamilyKind::Bump,
            params: vec![alpha, beta, p],
            arity: 1,
        }
    }

    pub fn table(arity: usize, values: Vec<f64>) -> Self {
        FunctionFamily {
            kind: FamilyKind::Table,
            params: values,
            arity,
        }
    }

    pub fn expected_param_count(&self) -> usize {
        match self.kind {
            FamilyKind::Constant => 1,
            FamilyKind::Linear | FamilyKind::Logistic | FamilyKind::Probit | FamilyKind::Cloglog => {
                self.arity + 1
            }
            FamilyKind::Bump => 3,
            FamilyKind::Table => 1usize << self.arity,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self.kind {
            FamilyKind::Constant => vec!["p".to_string()],
            FamilyKind::Linear | FamilyKind::Logistic | FamilyKind::Probit | FamilyKind::Cloglog => {
                let mut names: Vec<String> = (1..=self.arity).map(|i| format!("w{}", i)).collect();
                names.push("c".to_string());
                names
            }
            FamilyKind::Bump => vec!["alpha".into(), "beta".into(), "p".into()],
            FamilyKind::Table => (0..self.params.len()).map(|i| format!("t{}", i)).collect(),
        }
    }

    pub fn param_bounds(&self) -> Vec<ParamBounds> {
        match self.kind {
            FamilyKind::Constant => vec![ParamBounds::Interval(0.0, 1.0)],
            FamilyKind::Logistic | FamilyKind::Probit | FamilyKind::Cloglog => {
                vec![ParamBounds::Reals; self.arity + 1]
            }
            // the joint box condition is checked separately; per-parameter
            // bounds keep each coordinate in a necessary range
            FamilyKind::Linear => {
                let n = self.arity.max(1) as f64;
                let mut b = vec![ParamBounds::Interval(-n, n); self.arity];
                b.push(ParamBounds::Interval(0.0, 1.0));
                b
            }
            FamilyKind::Bump => vec![
                ParamBounds::Interval(0.0, 1.0),
                ParamBounds::Interval(0.0, f64::MAX),
                ParamBounds::Interval(0.0, 1.0),
            ],
            FamilyKind::Table => vec![ParamBounds::Interval(0.0, 1.0); self.params.len()],
        }
    }

    pub fn is_differentiable(&self) -> bool {
        self.kind != FamilyKind::Table
    }

    /// Structural parameter validation; returns human-readable diagnostics.
    pub fn check(&self) -> Vec<FamilyError> {
        let mut out = Vec::new();
        if self.params.len() != self.expected_param_count() {
            out.push(FamilyError::ParamCount {
                kind: self.kind,
                expected: self.expected_param_count(),
                got: self.params.len(),
            });
            return out;
        }
        for (i, (p, b)) in self.params.iter().zip(self.param_bounds()).enumerate() {
            if !b.contains(*p) {
                let (lo, hi) = match b {
                    ParamBounds::Interval(lo, hi) => (lo, hi),
                    ParamBounds::Reals => (f64::NEG_INFINITY, f64::INFINITY),
                };
                out.push(FamilyError::ParamOutOfBounds { index: i, value: *p, lo, hi });
            }
        }
        if self.kind == FamilyKind::Linear {
            let (w, c) = self.affine_parts();
            let n = self.arity.max(1) as f64;
            let hi = c + w.iter().map(|x| x.max(0.0)).sum::<f64>() / n;
            let lo = c + w.iter().map(|x| x.min(0.0)).sum::<f64>() / n;
            if !(0.0..=1.0).contains(&c) || hi > 1.0 + 1e-12 || lo < -1e-12 {
                out.push(FamilyError::LinearRange { c, max: hi, min: lo });
            }
        }
        out
    }

    fn affine_parts(&self) -> (&[f64], f64) {
        let n = self.arity;
        (&self.params[..n], self.params[n])
    }

    fn affine(&self, inputs: &[f64]) -> f64 {
        let (w, c) = self.affine_parts();
        w.iter().zip(inputs).map(|(a, b)| a * b).sum::<f64>() + c
    }

    fn check_inputs(&self, inputs: &[f64]) -> Result<(), FamilyError> {
        if inputs.len() != self.arity {
            return Err(FamilyError::InputCount {
                expected: self.arity,
                got: inputs.len(),
            });
        }
        for (i, &x) in inputs.iter().enumerate() {
            if !(-1e-9..=1.0 + 1e-9).contains(&x) {
                return Err(FamilyError::InputOutOfBounds { index: i, value: x });
            }
        }
        Ok(())
    }

    fn table_index(&self, inputs: &[f64]) -> Result<usize, FamilyError> {
        let mut idx = 0usize;
        for (b, &x) in inputs.iter().enumerate() {
            if (x - 1.0).abs() < 1e-9 {
                idx |= 1 << b;
            } else if x.abs() >= 1e-9 {
                return Err(FamilyError::NonBooleanTableInput(x));
            }
        }
        Ok(idx)
    }

    /// Evaluate the family at inputs in `[0,1]^arity`.
    pub fn eval(&self, inputs: &[f64]) -> Result<f64, FamilyError> {
        self.check_inputs(inputs)?;
        let v = match self.kind {
            FamilyKind::Constant => self.params[0],
            FamilyKind::Linear => {
                let (w, c) = self.affine_parts();
                let n = self.arity.max(1) as f64;
                w.iter().zip(inputs).map(|(a, b)| a * b).sum::<f64>() / n + c
            }
            FamilyKind::Logistic => sigmoid(self.affine(inputs)),
            FamilyKind::Probit => std_normal().cdf(self.affine(inputs)),
            FamilyKind::Cloglog => 1.0 - (-self.affine(inputs).exp()).exp(),
            FamilyKind::Bump => {
                let (a, b, p) = (self.params[0], self.params[1], self.params[2]);
                let d = inputs[0] - p;
                a * (-b * d * d).exp()
            }
            FamilyKind::Table => self.params[self.table_index(inputs)?],
        };
        Ok(v.clamp(0.0, 1.0))
    }

    /// Analytic gradient with respect to the parameters, at fixed inputs.
    pub fn grad(&self, inputs: &[f64]) -> Result<Vec<f64>, FamilyError> {
        self.check_inputs(inputs)?;
        match self.kind {
            FamilyKind::Constant => Ok(vec![1.0]),
            FamilyKind::Linear => {
                let n = self.arity.max(1) as f64;
                let mut g: Vec<f64> = inputs.iter().map(|x| x / n).collect();
                g.push(1.0);
                Ok(g)
            }
            FamilyKind::Logistic => {
                let s = sigmoid(self.affine(inputs));
                let d = s * (1.0 - s);
                let mut g: Vec<f64> = inputs.iter().map(|x| d * x).collect();
                g.push(d);
                Ok(g)
            }
            FamilyKind::Probit => {
                let d = std_normal().pdf(self.affine(inputs));
                let mut g: Vec<f64> = inputs.iter().map(|x| d * x).collect();
                g.push(d);
                Ok(g)
            }
            FamilyKind::Cloglog => {
                let a = self.affine(inputs);
                let d = a.exp() * (-a.exp()).exp();
                let mut g: Vec<f64> = inputs.iter().map(|x| d * x).collect();
                g.push(d);
                Ok(g)
            }
            FamilyKind::Bump => {
                let (a, b, p) = (self.params[0], self.params[1], self.params[2]);
                let d = inputs[0] - p;
                let e = (-b * d * d).exp();
                Ok(vec![e, -a * d * d * e, 2.0 * a * b * d * e])
            }
            FamilyKind::Table => Err(FamilyError::GradientUnsupported),
        }
    }

    /// Whether `f^{-1}{0,1}` is contained in the corners `{0,1}^arity`, the
    /// precondition for compiling an asymptotic limit.
    pub fn interior_preserving(&self) -> bool {
        match self.kind {
            // arity 0: the whole domain is the empty tuple, which is a corner
            FamilyKind::Constant => true,
            FamilyKind::Logistic | FamilyKind::Probit | FamilyKind::Cloglog => {
                self.params.iter().all(|p| p.is_finite())
            }
            FamilyKind::Linear => {
                let (w, c) = self.affine_parts();
                let n = self.arity.max(1) as f64;
                let hi = c + w.iter().map(|x| x.max(0.0)).sum::<f64>() / n;
                let lo = c + w.iter().map(|x| x.min(0.0)).sum::<f64>() / n;
                let hits_one = (hi - 1.0).abs() < 1e-15;
                let hits_zero = lo.abs() < 1e-15;
                let no_zero_weight = w.iter().all(|&x| x != 0.0);
                (!hits_one || no_zero_weight) && (!hits_zero || no_zero_weight)
            }
            FamilyKind::Bump => {
                let (a, b, p) = (self.params[0], self.params[1], self.params[2]);
                if a <= 0.0 {
                    return false; // constant zero on the whole interval
                }
                if a < 1.0 {
                    return true; // range is (0, a], never touches 0 or 1
                }
                b > 0.0 && (p == 0.0 || p == 1.0)
            }
            // only ever evaluated on corner inputs
            FamilyKind::Table => true,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logistic_at_zero_is_half() {
        let f = FunctionFamily::logistic(&[0.0], 0.0);
        assert_relative_eq!(f.eval(&[0.7]).unwrap(), 0.5);
    }

    #[test]
    fn logistic_closed_form() {
        // sigmoid(2*0.3 - 1) = sigmoid(-0.4)
        let f = FunctionFamily::logistic(&[2.0], -1.0);
        assert_relative_eq!(f.eval(&[0.3]).unwrap(), 0.40131233988754794, epsilon = 1e-12);
    }

    #[test]
    fn bump_peak() {
        let f = FunctionFamily::bump(0.8, 1.0, 0.3);
        assert_relative_eq!(f.eval(&[0.3]).unwrap(), 0.8);
    }

    #[test]
    fn logistic_gradient_closed_form() {
        let f = FunctionFamily::logistic(&[0.0], 0.0);
        let g = f.grad(&[0.3]).unwrap();
        assert_relative_eq!(g[1], 0.25); // d/dc = sigmoid'(0)
        assert_relative_eq!(g[0], 0.075); // d/dw = 0.25 * 0.3
    }

    #[test]
    fn constant_gradient() {
        let f = FunctionFamily::constant(0.4);
        assert_eq!(f.grad(&[]).unwrap(), vec![1.0]);
    }

    #[test]
    fn table_gradient_unsupported() {
        let f = FunctionFamily::table(1, vec![0.0, 1.0]);
        assert!(matches!(f.grad(&[1.0]), Err(FamilyError::GradientUnsupported)));
    }

    #[test]
    fn linear_out_of_range_rejected() {
        let f = FunctionFamily::linear(&[2.0], 0.0);
        assert!(!f.check().is_empty());
    }

    #[test]
    fn probit_matches_erf_midpoint() {
        let f = FunctionFamily::probit(&[1.0], 0.0);
        assert_relative_eq!(f.eval(&[0.0]).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn interior_preservation_flags() {
        assert!(FunctionFamily::logistic(&[3.0], -1.0).interior_preserving());
        assert!(FunctionFamily::bump(0.8, 1.0, 0.3).interior_preserving());
        assert!(!FunctionFamily::bump(1.0, 1.0, 0.3).interior_preserving());
        assert!(!FunctionFamily::bump(0.0, 1.0, 0.3).interior_preserving());
        // f(x) = x hits 0/1 only at the corners
        assert!(FunctionFamily::linear(&[1.0], 0.0).interior_preserving());
        // f == 1 everywhere is not interior preserving
        assert!(!FunctionFamily::linear(&[0.0], 1.0).interior_preserving());
    }
}
