use std::collections::HashMap;

use num::{BigInt, BigRational, FromPrimitive};
use thiserror::Error;

use super::formula::{Formula, FreqCmp, Term, Var};
use super::structure::{Binding, Structure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("sort mismatch for variable `{0}`")]
    SortMismatch(String),
    #[error("constant {value} out of range for sort of size {size}")]
    ConstantOutOfRange { value: u32, size: usize },
    #[error("arity mismatch in atom of relation #{0}")]
    ArityMismatch(usize),
}

/// Evaluator for one fixed structure. Frequency counts inside comparisons
/// are memoized per (sub-formula, restriction of the binding to its free
/// variables); the cache is semantically transparent because the structure
/// is immutable for the evaluator's lifetime.
pub struct Evaluator<'a> {
    structure: &'a Structure,
    // key: (addresses of the counted formula pair, values of outer free vars)
    counts: HashMap<(usize, usize, Vec<u32>), u64>,
    free_vars: HashMap<(usize, usize), Vec<Var>>,
    tuple_scratch: Vec<u32>,
}

impl<'a> Evaluator<'a> {
    pub fn new(structure: &'a Structure) -> Self {
        Evaluator {
            structure,
            counts: HashMap::new(),
            free_vars: HashMap::new(),
            tuple_scratch: Vec::new(),
        }
    }

    pub fn structure(&self) -> &'a Structure {
        self.structure
    }

    fn term_value(&self, t: &Term, binding: &Binding) -> Result<u32, EvalError> {
        match t {
            Term::Var(v) => binding
                .get(v)
                .ok_or_else(|| EvalError::UnboundVariable(v.name.to_string())),
            Term::Const { value, sort } => {
                let size = self.structure.sizes().size(*sort);
                if (*value as usize) < size {
                    Ok(*value)
                } else {
                    Err(EvalError::ConstantOutOfRange { value: *value, size })
                }
            }
        }
    }

    /// Truth of `f` under `binding`, per the counting semantics: frequency
    /// comparisons hold only if both conditioning counts are positive and
    /// the stated inequality holds exactly.
    pub fn evaluate(&mut self, binding: &mut Binding, f: &Formula) -> Result<bool, EvalError> {
        match f {
            Formula::Bool(b) => Ok(*b),
            Formula::Atom { rel, args } => {
                let r = self.structure.signature().relation(*rel);
                if args.len() != r.arity() {
                    return Err(EvalError::ArityMismatch(rel.0));
                }
                let mut tuple = std::mem::take(&mut self.tuple_scratch);
                tuple.clear();
                for t in args {
                    match self.term_value(t, binding) {
                        Ok(v) => tuple.push(v),
                        Err(e) => {
                            self.tuple_scratch = tuple;
                            return Err(e);
                        }
                    }
                }
                let holds = self.structure.holds(*rel, &tuple);
                self.tuple_scratch = tuple;
                Ok(holds)
            }
            Formula::Not(g) => Ok(!self.evaluate(binding, g)?),
            Formula::And(a, b) => Ok(self.evaluate(binding, a)? && self.evaluate(binding, b)?),
            Formula::Or(a, b) => Ok(self.evaluate(binding, a)? || self.evaluate(binding, b)?),
            Formula::Implies(a, b) => Ok(!self.evaluate(binding, a)? || self.evaluate(binding, b)?),
            Formula::Forall(v, g) => {
                let n = self.structure.sizes().size(v.sort);
                for e in 0..n as u32 {
                    binding.push(v.clone(), e);
                    let ok = self.evaluate(binding, g);
                    binding.pop();
                    if !ok? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Exists(v, g) => {
                let n = self.structure.sizes().size(v.sort);
                for e in 0..n as u32 {
                    binding.push(v.clone(), e);
                    let ok = self.evaluate(binding, g);
                    binding.pop();
                    if ok? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::FreqCmp(c) => self.eval_freq_cmp(binding, c),
        }
    }

    fn eval_freq_cmp(&mut self, binding: &mut Binding, c: &FreqCmp) -> Result<bool, EvalError> {
        let lhs_den = self.count_memo(binding, &c.lhs_den, &c.binders)?;
        let rhs_den = self.count_memo(binding, &c.rhs_den, &c.binders)?;
        // both conditions must be instantiated, else the comparison is false
        if lhs_den == 0 || rhs_den == 0 {
            return Ok(false);
        }
        let lhs_num = self.count_pair_memo(binding, &c.lhs_num, &c.lhs_den, &c.binders)?;
        let rhs_num = self.count_pair_memo(binding, &c.rhs_num, &c.rhs_den, &c.binders)?;
        let lhs = ratio(lhs_num, lhs_den);
        let rhs = ratio(rhs_num, rhs_den);
        if c.slack_on_left {
            Ok(c.slack.clone() + lhs >= rhs)
        } else {
            Ok(lhs >= rhs + c.slack.clone())
        }
    }

    /// Like [`Evaluator::count`], memoized on the formula's node address and
    /// the values of its outer free variables. Sound as long as `f` outlives
    /// the evaluator, which holds for formulas stored in a model.
    pub fn count_memo(
        &mut self,
        binding: &mut Binding,
        f: &Formula,
        binders: &[Var],
    ) -> Result<u64, EvalError> {
        self.count_keyed(binding, f, None, binders)
    }

    /// Memoized count of tuples satisfying `f && g` (the conjunction is
    /// never materialized).
    fn count_pair_memo(
        &mut self,
        binding: &mut Binding,
        f: &Formula,
        g: &Formula,
        binders: &[Var],
    ) -> Result<u64, EvalError> {
        self.count_keyed(binding, f, Some(g), binders)
    }

    fn count_keyed(
        &mut self,
        binding: &mut Binding,
        f: &Formula,
        g: Option<&Formula>,
        binders: &[Var],
    ) -> Result<u64, EvalError> {
        let key = (
            f as *const Formula as usize,
            g.map_or(0, |g| g as *const Formula as usize),
        );
        if !self.free_vars.contains_key(&key) {
            let mut fv = super::formula::free_variables(f);
            if let Some(g) = g {
                fv.extend(super::formula::free_variables(g));
            }
            let fv: Vec<Var> = fv.into_iter().filter(|v| !binders.contains(v)).collect();
            self.free_vars.insert(key, fv);
        }
        let mut key_vals = Vec::new();
        for v in &self.free_vars[&key] {
            match binding.get(v) {
                Some(e) => key_vals.push(e),
                None => return Err(EvalError::UnboundVariable(v.name.to_string())),
            }
        }
        if let Some(&n) = self.counts.get(&(key.0, key.1, key_vals.clone())) {
            return Ok(n);
        }
        let n = self.count_raw(binding, f, g, binders)?;
        self.counts.insert((key.0, key.1, key_vals), n);
        Ok(n)
    }

    /// Number of sort-appropriate tuples for `binders` (repeats and overlaps
    /// with outer bindings included) satisfying `f`.
    pub fn count(
        &mut self,
        binding: &mut Binding,
        f: &Formula,
        binders: &[Var],
    ) -> Result<u64, EvalError> {
        self.count_raw(binding, f, None, binders)
    }

    fn count_raw(
        &mut self,
        binding: &mut Binding,
        f: &Formula,
        g: Option<&Formula>,
        binders: &[Var],
    ) -> Result<u64, EvalError> {
        if binders.is_empty() {
            let mut ok = self.evaluate(binding, f)?;
            if let Some(g) = g {
                ok = ok && self.evaluate(binding, g)?;
            }
            return Ok(ok as u64);
        }
        let sizes: Vec<usize> = binders
            .iter()
            .map(|v| self.structure.sizes().size(v.sort))
            .collect();
        let mut tuple = vec![0u32; binders.len()];
        let mut total = 0u64;
        'outer: loop {
            for (v, &e) in binders.iter().zip(tuple.iter()) {
                binding.push(v.clone(), e);
            }
            let mut sat = self.evaluate(binding, f);
            if let (Ok(true), Some(g)) = (&sat, g) {
                sat = self.evaluate(binding, g);
            }
            for _ in binders {
                binding.pop();
            }
            if sat? {
                total += 1;
            }
            // odometer increment
            for i in (0..tuple.len()).rev() {
                tuple[i] += 1;
                if (tuple[i] as usize) < sizes[i] {
                    continue 'outer;
                }
                tuple[i] = 0;
            }
            break;
        }
        Ok(total)
    }

    /// Conditional relative frequency of `phi` given `psi` over `binders`;
    /// `None` when the condition is never satisfied.
    pub fn frequency(
        &mut self,
        binding: &mut Binding,
        phi: &Formula,
        psi: &Formula,
        binders: &[Var],
    ) -> Result<Option<BigRational>, EvalError> {
        let den = self.count(binding, psi, binders)?;
        if den == 0 {
            return Ok(None);
        }
        let both = Formula::and(phi.clone(), psi.clone());
        let num = self.count(binding, &both, binders)?;
        Ok(Some(ratio(num, den)))
    }
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(
        BigInt::from_u64(num).unwrap(),
        BigInt::from_u64(den).unwrap(),
    )
}

/// One-shot truth evaluation; see [`Evaluator::evaluate`].
pub fn evaluate(structure: &Structure, binding: &Binding, f: &Formula) -> Result<bool, EvalError> {
    let mut b = binding.clone();
    Evaluator::new(structure).evaluate(&mut b, f)
}

/// One-shot satisfying-tuple count; see [`Evaluator::count`].
pub fn count(
    structure: &Structure,
    binding: &Binding,
    f: &Formula,
    binders: &[Var],
) -> Result<u64, EvalError> {
    let mut b = binding.clone();
    Evaluator::new(structure).count(&mut b, f, binders)
}

/// One-shot conditional frequency; see [`Evaluator::frequency`].
pub fn frequency(
    structure: &Structure,
    binding: &Binding,
    phi: &Formula,
    psi: &Formula,
    binders: &[Var],
) -> Result<Option<BigRational>, EvalError> {
    let mut b = binding.clone();
    Evaluator::new(structure).frequency(&mut b, phi, psi, binders)
}
