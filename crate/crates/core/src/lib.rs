//! Symbolic-numeric toolkit for invariant geometry on low-dimensional Lie
//! groups: structure constants to invariant frames, group Laplacians,
//! orbit-based representation operators, reduced nonlinear Schrödinger
//! models, and numerically verified exact solutions.

pub mod algebra;
pub mod catalog;
pub mod config;
pub mod exec;
pub mod expr;
pub mod geometry;
pub mod group;
pub mod numeric;
pub mod operator;
pub mod orbit;
pub mod reduction;
pub mod solver;
pub mod symmat;

pub use expr::{Binding, SymExpr};
