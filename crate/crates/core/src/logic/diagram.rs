use thiserror::Error;

use crate::caps::Caps;

use super::formula::{Formula, Term, Var};
use super::signature::{RelId, Signature};

/// One atom slot of a diagram: a relation applied to indices into the
/// diagram's variable list (repeats allowed).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiagramAtom {
    pub rel: RelId,
    pub args: Vec<usize>,
}

/// A complete atomic diagram: a truth value for every sort-appropriate atom
/// of the chosen relations over an ordered variable list. The atom order is
/// canonical (relations ascending, argument tuples lexicographic), so two
/// diagrams over the same relations and variables are comparable slot by
/// slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicDiagram {
    vars: Vec<Var>,
    rels: Vec<RelId>,
    atoms: Vec<DiagramAtom>,
    values: Vec<bool>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiagramError {
    #[error("diagram enumeration over {atoms} atoms exceeds cap {cap}")]
    CapExceeded { atoms: usize, cap: usize },
    #[error("no variables given")]
    NoVariables,
    #[error("variable `{0}` not part of the diagram")]
    UnknownVariable(String),
    #[error("constants cannot appear in diagram formulas")]
    ConstantTerm,
    #[error("formula is not quantifier-free")]
    NotQuantifierFree,
    #[error("value count {got} does not match atom count {expected}")]
    ValueCountMismatch { got: usize, expected: usize },
}

/// All sort-appropriate atoms of `rels` over `vars`, in canonical order.
pub fn atoms_over(signature: &Signature, rels: &[RelId], vars: &[Var]) -> Vec<DiagramAtom> {
    let mut out = Vec::new();
    for &rel in rels {
        let r = signature.relation(rel);
        let candidates: Vec<Vec<usize>> = r
            .arg_sorts
            .iter()
            .map(|s| {
                vars.iter()
                    .enumerate()
                    .filter(|(_, v)| v.sort == *s)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        if r.arity() == 0 {
            out.push(DiagramAtom { rel, args: Vec::new() });
            continue;
        }
        if candidates.iter().any(|c| c.is_empty()) {
            continue;
        }
        // lexicographic product over argument positions
        let mut idx = vec![0usize; r.arity()];
        'outer: loop {
            out.push(DiagramAtom {
                rel,
                args: idx
                    .iter()
                    .enumerate()
                    .map(|(pos, &i)| candidates[pos][i])
                    .collect(),
            });
            for pos in (0..idx.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < candidates[pos].len() {
                    continue 'outer;
                }
                idx[pos] = 0;
            }
            break;
        }
    }
    out
}

impl AtomicDiagram {
    /// Diagram over the given relations and variables with explicit values
    /// (one per canonical atom).
    pub fn new(
        signature: &Signature,
        rels: Vec<RelId>,
        vars: Vec<Var>,
        values: Vec<bool>,
    ) -> Result<Self, DiagramError> {
        let atoms = atoms_over(signature, &rels, &vars);
        if values.len() != atoms.len() {
            return Err(DiagramError::ValueCountMismatch {
                got: values.len(),
                expected: atoms.len(),
            });
        }
        Ok(AtomicDiagram {
            vars,
            rels,
            atoms,
            values,
        })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn rels(&self) -> &[RelId] {
        &self.rels
    }

    pub fn atoms(&self) -> &[DiagramAtom] {
        &self.atoms
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn var_index(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    /// Truth value of `rel(args)` where args index into `vars`; `None` when
    /// the atom is not part of this diagram.
    pub fn lookup(&self, rel: RelId, args: &[usize]) -> Option<bool> {
        self.atoms
            .iter()
            .position(|a| a.rel == rel && a.args == args)
            .map(|i| self.values[i])
    }

    /// Evaluate a quantifier-free, constant-free formula whose free
    /// variables all belong to this diagram.
    pub fn eval(&self, f: &Formula) -> Result<bool, DiagramError> {
        match f {
            Formula::Bool(b) => Ok(*b),
            Formula::Atom { rel, args } => {
                let mut idx = Vec::with_capacity(args.len());
                for t in args {
                    match t {
                        Term::Var(v) => idx.push(
                            self.var_index(v)
                                .ok_or_else(|| DiagramError::UnknownVariable(v.name.to_string()))?,
                        ),
                        Term::Const { .. } => return Err(DiagramError::ConstantTerm),
                    }
                }
                self.lookup(*rel, &idx).ok_or_else(|| {
                    DiagramError::UnknownVariable(format!("atom of relation #{}", rel.0))
                })
            }
            Formula::Not(g) => Ok(!self.eval(g)?),
            Formula::And(a, b) => Ok(self.eval(a)? && self.eval(b)?),
            Formula::Or(a, b) => Ok(self.eval(a)? || self.eval(b)?),
            Formula::Implies(a, b) => Ok(!self.eval(a)? || self.eval(b)?),
            _ => Err(DiagramError::NotQuantifierFree),
        }
    }

    /// The diagram as a conjunction of literals, in canonical atom order.
    pub fn to_formula(&self) -> Formula {
        let lits: Vec<Formula> = self
            .atoms
            .iter()
            .zip(self.values.iter())
            .map(|(a, &v)| {
                let atom = Formula::Atom {
                    rel: a.rel,
                    args: a.args.iter().map(|&i| Term::Var(self.vars[i].clone())).collect(),
                };
                if v {
                    atom
                } else {
                    Formula::not(atom)
                }
            })
            .collect();
        Formula::all(lits)
    }

    /// Restriction to the atoms whose arguments all lie in `keep_vars` and
    /// whose relation is in `keep_rels`.
    pub fn restrict(&self, keep_rels: &[RelId], keep_vars: &[Var]) -> AtomicDiagram {
        let var_map: Vec<Option<usize>> = self
            .vars
            .iter()
            .map(|v| keep_vars.iter().position(|w| w == v))
            .collect();
        let mut atoms = Vec::new();
        let mut values = Vec::new();
        for (a, &val) in self.atoms.iter().zip(self.values.iter()) {
            if !keep_rels.contains(&a.rel) {
                continue;
            }
            let mapped: Option<Vec<usize>> = a.args.iter().map(|&i| var_map[i]).collect();
            if let Some(args) = mapped {
                atoms.push(DiagramAtom { rel: a.rel, args });
                values.push(val);
            }
        }
        AtomicDiagram {
            vars: keep_vars.to_vec(),
            rels: keep_rels.to_vec(),
            atoms,
            values,
        }
    }
}

/// All `2^A` complete atomic diagrams of `rels` over `vars`, in a
/// deterministic order (value vectors count up binary, atom 0 is the least
/// significant bit).
pub fn enumerate_diagrams_of(
    signature: &Signature,
    rels: &[RelId],
    vars: &[Var],
    caps: &Caps,
) -> Result<Vec<AtomicDiagram>, DiagramError> {
    if vars.is_empty() {
        return Err(DiagramError::NoVariables);
    }
    let atoms = atoms_over(signature, rels, vars);
    if atoms.len() > caps.max_diagram_atoms.min(62) {
        return Err(DiagramError::CapExceeded {
            atoms: atoms.len(),
            cap: caps.max_diagram_atoms.min(62),
        });
    }
    let mut out = Vec::with_capacity(1usize << atoms.len());
    for bits in 0u64..(1u64 << atoms.len()) {
        let values: Vec<bool> = (0..atoms.len()).map(|i| (bits >> i) & 1 == 1).collect();
        out.push(AtomicDiagram {
            vars: vars.to_vec(),
            rels: rels.to_vec(),
            atoms: atoms.clone(),
            values,
        });
    }
    Ok(out)
}

/// All complete atomic diagrams of the full signature over `vars`.
pub fn enumerate_diagrams(
    signature: &Signature,
    vars: &[Var],
    caps: &Caps,
) -> Result<Vec<AtomicDiagram>, DiagramError> {
    let rels: Vec<RelId> = signature.rel_ids().collect();
    enumerate_diagrams_of(signature, &rels, vars, caps)
}

/// Extensions of `base` (over `base.vars()`) to full diagrams over
/// `base.vars() ++ new_vars` and the relation set `rels` (a superset of the
/// base's relations). Atoms already fixed by `base` keep their values; all
/// other atoms range over both truth values.
pub fn extensions_of(
    signature: &Signature,
    base: &AtomicDiagram,
    new_vars: &[Var],
    rels: &[RelId],
    caps: &Caps,
) -> Result<Vec<AtomicDiagram>, DiagramError> {
    let mut vars = base.vars().to_vec();
    vars.extend(new_vars.iter().cloned());
    let atoms = atoms_over(signature, rels, &vars);
    if atoms.len() > caps.max_diagram_atoms.min(62) {
        return Err(DiagramError::CapExceeded {
            atoms: atoms.len(),
            cap: caps.max_diagram_atoms.min(62),
        });
    }
    let nbase = base.vars().len();
    let mut fixed: Vec<Option<bool>> = Vec::with_capacity(atoms.len());
    let mut free_idx = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        let within_base = a.args.iter().all(|&v| v < nbase);
        let val = if within_base { base.lookup(a.rel, &a.args) } else { None };
        if val.is_none() {
            free_idx.push(i);
        }
        fixed.push(val);
    }
    if free_idx.len() > caps.max_diagram_atoms {
        return Err(DiagramError::CapExceeded {
            atoms: free_idx.len(),
            cap: caps.max_diagram_atoms,
        });
    }
    let mut out = Vec::with_capacity(1usize << free_idx.len());
    for bits in 0u64..(1u64 << free_idx.len()) {
        let mut values: Vec<bool> = fixed.iter().map(|v| v.unwrap_or(false)).collect();
        for (k, &i) in free_idx.iter().enumerate() {
            values[i] = (bits >> k) & 1 == 1;
        }
        out.push(AtomicDiagram {
            vars: vars.clone(),
            rels: rels.to_vec(),
            atoms: atoms.clone(),
            values,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::signature::Signature;
    use crate::logic::SortId;

    fn sig_qe() -> std::sync::Arc<Signature> {
        Signature::build(&["s"], &[("Q", &["s"]), ("E", &["s", "s"])]).unwrap()
    }

    #[test]
    fn unary_one_var_has_two_diagrams() {
        let sig = Signature::build(&["s"], &[("Q", &["s"])]).unwrap();
        let vars = vec![Var::new("x", SortId(0))];
        let ds = enumerate_diagrams(&sig, &vars, &Caps::default()).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn two_vars_unary_binary_has_64_diagrams() {
        let sig = sig_qe();
        let vars = vec![Var::new("x1", SortId(0)), Var::new("x2", SortId(0))];
        // 2 Q-atoms + 4 E-atoms = 6 atoms
        let ds = enumerate_diagrams(&sig, &vars, &Caps::default()).unwrap();
        assert_eq!(ds.len(), 64);
    }

    #[test]
    fn three_vars_unary_has_eight_diagrams() {
        let sig = Signature::build(&["s"], &[("Q", &["s"])]).unwrap();
        let vars = vec![
            Var::new("x1", SortId(0)),
            Var::new("x2", SortId(0)),
            Var::new("x3", SortId(0)),
        ];
        let ds = enumerate_diagrams(&sig, &vars, &Caps::default()).unwrap();
        assert_eq!(ds.len(), 8);
    }

    #[test]
    fn cap_exceeded_reported() {
        let sig = sig_qe();
        let vars: Vec<Var> = (0..6).map(|i| Var::new(&format!("x{}", i), SortId(0))).collect();
        // 6 unary + 36 binary atoms > 20
        let err = enumerate_diagrams(&sig, &vars, &Caps::default()).unwrap_err();
        assert!(matches!(err, DiagramError::CapExceeded { .. }));
    }

    #[test]
    fn extensions_fix_base_atoms() {
        let sig = sig_qe();
        let x = Var::new("x", SortId(0));
        let y = Var::new("y", SortId(0));
        let rels: Vec<RelId> = sig.rel_ids().collect();
        let base = AtomicDiagram::new(&sig, rels.clone(), vec![x.clone()], vec![true, false])
            .unwrap();
        let exts = extensions_of(&sig, &base, &[y], &rels, &Caps::default()).unwrap();
        // new atoms: Q(y), E(x,y), E(y,x), E(y,y) -> 16 extensions
        assert_eq!(exts.len(), 16);
        for e in &exts {
            assert_eq!(e.lookup(RelId(0), &[0]), Some(true));
            assert_eq!(e.lookup(RelId(1), &[0, 0]), Some(false));
        }
    }
}
