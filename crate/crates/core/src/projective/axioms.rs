use rayon::prelude::*;

use crate::inference::forward_sample;
use crate::logic::{atoms_over, DiagramAtom, DomainSizes, RelId, Signature, Structure, Var};
use crate::model::Model;

use super::CompileError;

/// An extension axiom: for all pairwise-distinct `x1..xr`, some further
/// element `x_{r+1}` realizes exactly the atoms of `phi` among all atoms
/// over the variable tuple that mention `x_{r+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionAxiom {
    vars: Vec<Var>,
    delta: Vec<DiagramAtom>,
    included: Vec<bool>,
}

impl ExtensionAxiom {
    /// `vars` lists `x1..x_{r+1}` (at least one variable; the last one is
    /// the witness); `phi` selects the atoms of the witness's full atom set
    /// that must hold.
    pub fn new(
        signature: &Signature,
        vars: Vec<Var>,
        phi: &[DiagramAtom],
    ) -> Result<Self, CompileError> {
        if vars.is_empty() {
            return Err(CompileError::Unsupported("extension axiom needs variables".into()));
        }
        let witness = vars.len() - 1;
        let rels: Vec<RelId> = signature.rel_ids().collect();
        let delta: Vec<DiagramAtom> = atoms_over(signature, &rels, &vars)
            .into_iter()
            .filter(|a| a.args.contains(&witness))
            .collect();
        for p in phi {
            if !delta.contains(p) {
                return Err(CompileError::Unsupported(format!(
                    "atom of relation #{} does not mention the witness variable",
                    p.rel.0
                )));
            }
        }
        let included = delta.iter().map(|a| phi.contains(a)).collect();
        Ok(ExtensionAxiom { vars, delta, included })
    }

    pub fn r(&self) -> usize {
        self.vars.len() - 1
    }

    /// Does the structure satisfy the axiom? Quantifies over ordered tuples
    /// of pairwise-distinct elements (distinctness applies within a sort;
    /// elements of different sorts are distinct by construction).
    pub fn holds_in(&self, structure: &Structure) -> bool {
        let r = self.r();
        let mut assignment = vec![0u32; r];
        self.check_rec(structure, &mut assignment, 0)
    }

    fn check_rec(&self, structure: &Structure, assignment: &mut Vec<u32>, depth: usize) -> bool {
        let r = self.r();
        if depth == r {
            return self.has_witness(structure, assignment);
        }
        let sort = self.vars[depth].sort;
        let n = structure.sizes().size(sort) as u32;
        for e in 0..n {
            if (0..depth).any(|i| self.vars[i].sort == sort && assignment[i] == e) {
                continue;
            }
            assignment[depth] = e;
            if !self.check_rec(structure, assignment, depth + 1) {
                return false;
            }
        }
        true
    }

    fn has_witness(&self, structure: &Structure, assignment: &[u32]) -> bool {
        let r = self.r();
        let wsort = self.vars[r].sort;
        let n = structure.sizes().size(wsort) as u32;
        'witness: for b in 0..n {
            if (0..r).any(|i| self.vars[i].sort == wsort && assignment[i] == b) {
                continue;
            }
            for (atom, &want) in self.delta.iter().zip(self.included.iter()) {
                let concrete: Vec<u32> = atom
                    .args
                    .iter()
                    .map(|&i| if i == r { b } else { assignment[i] })
                    .collect();
                if structure.holds(atom.rel, &concrete) != want {
                    continue 'witness;
                }
            }
            return true;
        }
        false
    }
}

/// Monte Carlo estimate of the probability that a forward-sampled structure
/// violates the axiom, at each domain size. Deterministic per seed.
pub fn extension_axiom_rate(
    model: &Model,
    axiom: &ExtensionAxiom,
    sizes: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>, CompileError> {
    let mut out = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let domain = DomainSizes::uniform(model.signature(), n)
            .map_err(|e| CompileError::Model(e.to_string()))?;
        let violations: Result<usize, CompileError> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let s = forward_sample(model, &domain, mix(seed, (k * n_samples + i) as u64))?;
                Ok(usize::from(!axiom.holds_in(&s)))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b));
        out.push((n, violations? as f64 / n_samples as f64));
    }
    Ok(out)
}

fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
