//! Clause-mask satisfiability checking for CNF formulas.
//!
//! Each clause becomes a bit field over all `2^v` assignments marking the ones
//! that falsify it; a formula is unsatisfiable exactly when the OR of its
//! clause masks has every bit set. The crate provides the CNF front end
//! ([`cnf`]), the bit field ([`bitfield`]), the mask engine ([`maskset`]),
//! reference solvers ([`oracle`]), scaling measurements ([`bench`]) and the
//! command-line driver ([`cli`]).

pub mod bench;
pub mod bitfield;
pub mod cli;
pub mod cnf;
pub mod maskset;
pub mod oracle;

pub use bitfield::BitField;
pub use cnf::{Assignment, Clause, Formula, Literal, VarId};
pub use maskset::{decide, extract_models, Decision, Mode, SolveOptions, SolveReport};
