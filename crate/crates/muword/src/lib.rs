//! A workbench for the modal μ-calculus on finite data words.
//!
//! A data word is a finite sequence of (letter, data value) pairs. Positions
//! carrying the same value form a *class*; besides the ordinary successor every
//! position has a *class successor* (the next position with the same value).
//! The crate evaluates μ-calculus formulas with global and class modalities
//! over such words, classifies formulas into the BR/BMA fragments, compiles
//! formulas to data automata and transducer cascades (and back), translates
//! Data-LTL and two-variable first-order logic, and checks every construction
//! against brute-force oracles by exhaustive enumeration of small words.

pub mod cascades;
pub mod dataauto;
pub mod dataword;
pub mod dltl;
pub mod evaluator;
pub mod formula;
pub mod fragments;
pub mod reductions;
pub mod testkit;
pub mod wordautomata;
