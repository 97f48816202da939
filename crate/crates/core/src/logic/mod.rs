//! Multi-sorted relational signatures, finite structures, the formula AST of
//! conditional probability logic and its counting semantics, and complete
//! atomic diagrams.

mod diagram;
mod eval;
mod formula;
mod signature;
mod structure;

pub use diagram::{
    atoms_over, enumerate_diagrams, enumerate_diagrams_of, extensions_of, AtomicDiagram,
    DiagramAtom, DiagramError,
};
pub use eval::{count, evaluate, frequency, EvalError, Evaluator};
pub use formula::{free_variables, substitute, Formula, FreqCmp, Term, Var};
pub use signature::{RelId, Relation, Signature, SignatureError, SortId};
pub use structure::{Binding, DomainSizes, Structure, StructureError};
