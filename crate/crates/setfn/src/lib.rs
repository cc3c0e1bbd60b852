//! Workbench for a finitely axiomatized first-order theory of sets and
//! functions.
//!
//! The object language extends ordinary first-order logic with sort sigils
//! (uppercase set variables, lowercase thing variables, subscripted function
//! variables), typographically infinite conjunctions, multiple quantifiers
//! over families of ur-functions, and a restricted iota operator. The crate
//! provides:
//!
//! - [`syntax`]: abstract syntax, sorts, and the well-formedness checker;
//! - [`binding`]: occurrence analysis and capture-avoiding substitution,
//!   including subscript rewriting and operator range switching;
//! - [`parser`]: ASCII concrete syntax and the canonical printer;
//! - [`theory`]: the twenty axioms, numerals, two-tuples, and theorem schema
//!   instantiation;
//! - [`kernel`]: a proof checker for natural-deduction scripts with the
//!   nonstandard inference rules;
//! - [`model`]: finite structures, evaluation, validity checking, axiom
//!   audits, and category-style composition laws;
//! - [`cli`]: the command-line interface.

pub mod binding;
pub mod cli;
pub mod kernel;
pub mod model;
pub mod parser;
pub mod syntax;
pub mod theory;
