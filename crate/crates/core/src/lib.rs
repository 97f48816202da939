//! Lifted Bayesian networks with relative-frequency (Type I) dependencies.
//!
//! The crate implements two model classes over finite multi-sorted relational
//! domains: networks whose node probabilities are selected by a partition of
//! conditional-probability-logic formulas, and functional networks whose node
//! probabilities are continuous functions of the relative frequencies of
//! first-order features. Both ground to ordinary Bayesian networks over the
//! ground atoms of a finite domain.
//!
//! On top of the grounding semantics the crate provides:
//!
//! * exact inference by world enumeration and approximate inference by
//!   forward sampling / likelihood weighting ([`inference`]);
//! * compilation of the asymptotic (large-domain) limit of a model into a
//!   quantifier-free network via quantifier elimination under the
//!   extension-axiom theory ([`projective`]);
//! * parameter learning, including maximum-likelihood fitting against the
//!   compiled limit from subsampled substructures ([`learn`]);
//! * a textual model/structure language with parser and printer ([`parse`]).

pub mod caps;
pub mod ground;
pub mod inference;
pub mod learn;
pub mod logic;
pub mod model;
pub mod parse;
pub mod projective;

pub use caps::Caps;
pub use logic::{
    AtomicDiagram, Binding, DomainSizes, Formula, RelId, Signature, SortId, Structure, Term, Var,
};
pub use model::{FunctionFamily, Model, NodeSpec};
pub use projective::QfLbn;
