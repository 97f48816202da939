//! Asymptotic (large-domain) analysis: quantifier-free projective networks,
//! quantifier elimination under the extension-axiom theory, almost-sure
//! frequency limits over atomic diagrams, and the limit compilers that turn
//! a model into its asymptotically equivalent quantifier-free network.

mod axioms;
mod compile;
mod freq_limit;
mod projectivity;
mod qe;
mod qflbn;

pub use axioms::{extension_axiom_rate, ExtensionAxiom};
pub use compile::{compile_limit, compile_limit_full, compile_threshold_limit, CompiledAux};
pub use freq_limit::freq_limit;
pub use projectivity::{check_projectivity, ProjectivityReport, ProjectivityRow};
pub use qe::qe;
pub use qflbn::{limit_query, Prob, QfLbn, QfNode};

use thiserror::Error;

use crate::ground::GroundError;
use crate::inference::InferError;
use crate::logic::{DiagramError, EvalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("CRITICAL: {comparison} has equal asymptotic sides ({value}); no asymptotic statement is possible")]
    Critical { comparison: String, value: String },
    #[error("aggregation function of `{relation}` is not interior-preserving; rerun with force to compile anyway")]
    NonInteriorFamily { relation: String },
    #[error("formula is not supported here: {0}")]
    Unsupported(String),
    #[error("frequency condition `{0}` has asymptotic probability 0")]
    ZeroDenominatorLimit(String),
    #[error("in the limit, {true_cases} partition cases of `{relation}` hold on a positive-probability diagram")]
    PartitionViolationInLimit { relation: String, true_cases: usize },
    #[error("context diagram has probability 0")]
    ZeroProbabilityContext,
    #[error("relation #{0} is not part of the network")]
    UnknownRelation(usize),
    #[error("expected a functional model; `{0}` is a partition node")]
    ExpectedFunctional(String),
    #[error("expected a partition model; `{0}` is a functional node")]
    ExpectedPartition(String),
    #[error("evidence has probability zero in the limit")]
    ZeroEvidence,
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error("model error: {0}")]
    Model(String),
}
