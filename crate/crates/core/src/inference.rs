//! Query answering on finite domains: exact by world enumeration,
//! approximate by seeded forward sampling and likelihood weighting.
//!
//! Sampling is deterministic: each replica draws from a ChaCha stream seeded
//! by a stable mix of the master seed and the replica index, and reductions
//! combine fixed-size chunks in index order, so results are bit-identical
//! regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::caps::Caps;
use crate::ground::{
    for_each_world, ground, GroundAtom, GroundError, Kahan, ModelTables, WorldEval,
};
use crate::logic::{DomainSizes, Structure};
use crate::model::Model;

/// A ground literal: an atom or its negation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: GroundAtom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: GroundAtom) -> Self {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: GroundAtom) -> Self {
        Literal { atom, positive: false }
    }

    pub fn holds_in(&self, world: &Structure) -> bool {
        world.holds(self.atom.rel, &self.atom.args) == self.positive
    }
}

/// A query: a target literal plus ground-literal evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub target: Literal,
    pub evidence: Vec<Literal>,
}

impl Query {
    pub fn new(target: Literal, evidence: Vec<Literal>) -> Result<Self, InferError> {
        for (i, a) in evidence.iter().enumerate() {
            for b in evidence.iter().skip(i + 1) {
                if a.atom == b.atom && a.positive != b.positive {
                    return Err(InferError::InconsistentEvidence {
                        atom: format!("{:?}", a.atom),
                    });
                }
            }
        }
        Ok(Query { target, evidence })
    }
}

/// A Monte Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub effective_samples: f64,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferError {
    #[error("evidence has probability zero")]
    ZeroEvidence,
    #[error("all {samples} likelihood weights are zero; evidence may be impossible")]
    AllWeightsZero { samples: usize },
    #[error("inconsistent evidence on atom {atom}")]
    InconsistentEvidence { atom: String },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Ground(#[from] GroundError),
}

/// Exact conditional probability of the query under the induced
/// distribution, by enumeration over all worlds.
pub fn exact_query(
    model: &Model,
    sizes: &DomainSizes,
    query: &Query,
    caps: &Caps,
) -> Result<f64, InferError> {
    let mut num = Kahan::default();
    let mut den = Kahan::default();
    for_each_world(model, sizes, caps, |world, p| {
        if query.evidence.iter().all(|l| l.holds_in(world)) {
            den.add(p);
            if query.target.holds_in(world) {
                num.add(p);
            }
        }
        Ok(true)
    })?;
    if den.total() <= 0.0 {
        return Err(InferError::ZeroEvidence);
    }
    Ok(num.total() / den.total())
}

/// Stable per-replica seed derivation (splitmix64 over master and index).
fn replica_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ancestral sampling of a full world, layer by layer in topological order.
/// Deterministic for a fixed seed.
pub fn forward_sample(
    model: &Model,
    sizes: &DomainSizes,
    seed: u64,
) -> Result<Structure, GroundError> {
    let net = ground(model, sizes)?;
    let tables = ModelTables::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = Structure::empty(model.signature().clone(), sizes.clone());
    for (rel, layer) in net.layers() {
        // constant roots skip the evaluator entirely
        if let Some(p) = tables.root_const(*rel) {
            for atom in layer {
                if rng.gen::<f64>() < p {
                    world.insert_trusted(*rel, atom.args.clone());
                }
            }
            continue;
        }
        // the evaluator caches frequency counts against the world built so
        // far; per-layer scoping keeps those counts consistent with "all
        // parent layers complete"
        let mut draws = Vec::with_capacity(layer.len());
        {
            let mut ev = WorldEval::with_tables(model, &tables, &world);
            for atom in layer {
                let p = ev.atom_prob(atom)?;
                draws.push(rng.gen::<f64>() < p);
            }
        }
        for (atom, present) in layer.iter().zip(draws) {
            if present {
                world.insert_trusted(*rel, atom.args.clone());
            }
        }
    }
    Ok(world)
}

struct ChunkStats {
    w_sum: f64,
    wx_sum: f64,
    w2_sum: f64,
    w2x_sum: f64,
}

/// Likelihood-weighted estimate of the query probability: evidence atoms are
/// clamped, each sample is weighted by the product of the clamped atoms'
/// conditional probabilities, and the estimate is the weighted mean of the
/// target indicator.
pub fn estimate_query(
    model: &Model,
    sizes: &DomainSizes,
    query: &Query,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate, InferError> {
    if n_samples == 0 {
        return Err(InferError::NoSamples);
    }
    let net = ground(model, sizes)?;
    let tables = ModelTables::new(model);
    // fixed-size chunks keep the reduction order independent of parallelism
    const CHUNK: usize = 512;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunks: Result<Vec<ChunkStats>, InferError> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(n_samples);
            let mut stats = ChunkStats {
                w_sum: 0.0,
                wx_sum: 0.0,
                w2_sum: 0.0,
                w2x_sum: 0.0,
            };
            for s in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(seed, s as u64));
                let (weight, hit) = weighted_sample(model, &net, &tables, sizes, query, &mut rng)?;
                stats.w_sum += weight;
                stats.w2_sum += weight * weight;
                if hit {
                    stats.wx_sum += weight;
                    stats.w2x_sum += weight * weight;
                }
            }
            Ok(stats)
        })
        .collect();
    let chunks = chunks?;
    let mut w = Kahan::default();
    let mut wx = Kahan::default();
    let mut w2 = Kahan::default();
    let mut w2x = Kahan::default();
    for s in &chunks {
        w.add(s.w_sum);
        wx.add(s.wx_sum);
        w2.add(s.w2_sum);
        w2x.add(s.w2x_sum);
    }
    let w_total = w.total();
    if w_total <= 0.0 {
        return Err(InferError::AllWeightsZero { samples: n_samples });
    }
    let mean = wx.total() / w_total;
    // weighted variance of the mean: sum w_i^2 (x_i - mean)^2 / (sum w)^2
    let var_num = (1.0 - mean) * (1.0 - mean) * w2x.total()
        + mean * mean * (w2.total() - w2x.total());
    let std_error = var_num.max(0.0).sqrt() / w_total;
    let effective = w_total * w_total / w2.total();
    Ok(Estimate {
        value: mean,
        std_error,
        effective_samples: effective,
        seed,
    })
}

fn weighted_sample(
    model: &Model,
    net: &crate::ground::GroundNet,
    tables: &ModelTables,
    sizes: &DomainSizes,
    query: &Query,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, bool), InferError> {
    let mut world = Structure::empty(model.signature().clone(), sizes.clone());
    let mut weight = 1.0f64;
    for (rel, layer) in net.layers() {
        let evidence_free = !query.evidence.iter().any(|l| l.atom.rel == *rel);
        // constant roots without evidence skip the evaluator entirely
        if evidence_free {
            if let Some(p) = tables.root_const(*rel) {
                for atom in layer {
                    if rng.gen::<f64>() < p {
                        world
                            .insert(*rel, atom.args.clone())
                            .map_err(|e| GroundError::Sizes(e.to_string()))?;
                    }
                }
                continue;
            }
        }
        let mut draws = Vec::with_capacity(layer.len());
        {
            let mut ev = WorldEval::with_tables(model, tables, &world);
            for atom in layer {
                let clamped = if evidence_free {
                    None
                } else {
                    query
                        .evidence
                        .iter()
                        .find(|l| l.atom.rel == *rel && l.atom.args == atom.args)
                };
                match clamped {
                    Some(lit) => {
                        let p = ev.atom_prob(atom)?;
                        weight *= if lit.positive { p } else { 1.0 - p };
                        draws.push(lit.positive);
                    }
                    None => {
                        let p = ev.atom_prob(atom)?;
                        draws.push(rng.gen::<f64>() < p);
                    }
                }
            }
        }
        for (atom, present) in layer.iter().zip(draws) {
            if present {
                world.insert_trusted(*rel, atom.args.clone());
            }
        }
    }
    Ok((weight, query.target.holds_in(&world)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{Formula, RelId, Signature, SortId, Term, Var};
    use crate::model::{NodeSpec, PartitionCase};
    use num::BigRational;
    use std::collections::BTreeSet;

    fn rational(x: f64) -> BigRational {
        BigRational::from_float(x).unwrap()
    }

    fn chain_model() -> Model {
        let sig = Signature::build(&["s"], &[("Q", &["s"]), ("R", &["s"])]).unwrap();
        let q = Formula::Atom {
            rel: RelId(0),
            args: vec![Term::Var(Var::new("x1", SortId(0)))],
        };
        let nodes = vec![
            NodeSpec::Partition {
                cases: vec![PartitionCase {
                    formula: Formula::Bool(true),
                    prob: rational(0.3),
                }],
            },
            NodeSpec::Partition {
                cases: vec![
                    PartitionCase { formula: q.clone(), prob: rational(0.7) },
                    PartitionCase { formula: Formula::not(q), prob: rational(0.2) },
                ],
            },
        ];
        Model::new(sig, nodes, vec![BTreeSet::new(), BTreeSet::new()]).unwrap()
    }

    #[test]
    fn exact_root_marginal() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 3).unwrap();
        let q = Query::new(Literal::pos(GroundAtom::new(RelId(0), vec![0])), vec![]).unwrap();
        let p = exact_query(&model, &sizes, &q, &Caps::default()).unwrap();
        assert!((p - 0.3).abs() < 1e-12);
    }

    #[test]
    fn exact_total_probability() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 3).unwrap();
        let q = Query::new(Literal::pos(GroundAtom::new(RelId(1), vec![0])), vec![]).unwrap();
        let p = exact_query(&model, &sizes, &q, &Caps::default()).unwrap();
        // 0.3 * 0.7 + 0.7 * 0.2 = 0.35
        assert!((p - 0.35).abs() < 1e-12);
    }

    #[test]
    fn exact_with_evidence() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 3).unwrap();
        let q = Query::new(
            Literal::pos(GroundAtom::new(RelId(1), vec![0])),
            vec![Literal::pos(GroundAtom::new(RelId(0), vec![0]))],
        )
        .unwrap();
        let p = exact_query(&model, &sizes, &q, &Caps::default()).unwrap();
        assert!((p - 0.7).abs() < 1e-12);
    }

    #[test]
    fn forward_sample_deterministic() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 10).unwrap();
        let a = forward_sample(&model, &sizes, 42).unwrap();
        let b = forward_sample(&model, &sizes, 42).unwrap();
        for rel in model.signature().rel_ids() {
            assert_eq!(a.tuples(rel), b.tuples(rel));
        }
    }

    #[test]
    fn degenerate_probabilities() {
        let sig = Signature::build(&["s"], &[("Q", &["s"])]).unwrap();
        for (p, expect) in [(1.0, 5usize), (0.0, 0usize)] {
            let nodes = vec![NodeSpec::Partition {
                cases: vec![PartitionCase {
                    formula: Formula::Bool(true),
                    prob: rational(p),
                }],
            }];
            let model = Model::new(sig.clone(), nodes, vec![BTreeSet::new()]).unwrap();
            let sizes = DomainSizes::uniform(model.signature(), 5).unwrap();
            let w = forward_sample(&model, &sizes, 7).unwrap();
            assert_eq!(w.tuples(RelId(0)).len(), expect);
        }
    }

    #[test]
    fn estimate_matches_exact_on_root() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 4).unwrap();
        let q = Query::new(Literal::pos(GroundAtom::new(RelId(0), vec![0])), vec![]).unwrap();
        let est = estimate_query(&model, &sizes, &q, 100_000, 11).unwrap();
        assert!((est.value - 0.3).abs() < 3.0 * est.std_error + 1e-9);
    }

    #[test]
    fn zero_samples_rejected() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 3).unwrap();
        let q = Query::new(Literal::pos(GroundAtom::new(RelId(0), vec![0])), vec![]).unwrap();
        assert!(matches!(
            estimate_query(&model, &sizes, &q, 0, 1),
            Err(InferError::NoSamples)
        ));
    }

    #[test]
    fn estimate_is_parallelism_invariant() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 4).unwrap();
        let q = Query::new(
            Literal::pos(GroundAtom::new(RelId(1), vec![0])),
            vec![Literal::pos(GroundAtom::new(RelId(0), vec![1]))],
        )
        .unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_query(&model, &sizes, &q, 5000, 3).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| estimate_query(&model, &sizes, &q, 5000, 3).unwrap());
        assert_eq!(one.value.to_bits(), four.value.to_bits());
        assert_eq!(one.std_error.to_bits(), four.std_error.to_bits());
    }

    #[test]
    fn stderr_shrinks_with_samples() {
        let model = chain_model();
        let sizes = DomainSizes::uniform(model.signature(), 4).unwrap();
        let q = Query::new(Literal::pos(GroundAtom::new(RelId(1), vec![0])), vec![]).unwrap();
        let small = estimate_query(&model, &sizes, &q, 2000, 5).unwrap();
        let large = estimate_query(&model, &sizes, &q, 32000, 5).unwrap();
        let ratio = small.std_error / large.std_error;
        // expect ~ sqrt(16) = 4
        assert!(ratio > 2.5 && ratio < 6.5, "ratio = {}", ratio);
    }
}
