//! Symbolic parallel composition of labeled transition systems, with a
//! Dolev-Yao attacker and crypto library, crypto-aware symbolic execution
//! of a mini binary IR, and extraction of process models from execution
//! trees.
//!
//! The pieces fit together like this: `terms` and `symbolic` provide the
//! shared vocabulary (terms, symbols, events, the symbolic-LTS contract);
//! `compose` builds products of such systems, parametric in a combined
//! deduction relation; `dy` and `dylib` give the attacker and library;
//! `combiners` the shipped deduction combiners; `bir` and `sbir` the
//! program side (concrete and symbolic); `sapic` the extracted process
//! model; `scenario` ties everything to configuration files and the CLI.

pub mod bir;
pub mod combiners;
pub mod compose;
pub mod demos;
pub mod dy;
pub mod dylib;
pub mod fixtures;
pub mod sapic;
pub mod sbir;
pub mod scenario;
pub mod suites;
pub mod symbolic;
pub mod terms;
