//! Minimal symbolic expression engine.
//!
//! Everything downstream (frames, metrics, Laplacians, representation
//! operators, reduced equations, exact solutions) is expressed in this
//! language, differentiated exactly, and identity-tested by randomized
//! sampling rather than canonical rewriting.

pub mod equiv;
pub mod node;
pub(crate) mod normalize;
pub mod parse;

pub use equiv::{equiv, equiv_bool, sample_admissible, EquivCfg, EquivWitness, SampleBox};
pub use node::{rat_to_f64, Binding, ExprError, Node, Rat, SymExpr, Symbol, SymbolKind};
pub use parse::{parse_expr, ParseError};
