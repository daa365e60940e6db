//! Sobolev-norm training for physics-informed neural networks.
//!
//! This crate trains small fully-connected tanh networks to solve PDEs by
//! penalizing residual, initial and boundary mismatches in Sobolev norms —
//! matching derivatives of the residual, not just its values. It is
//! self-contained:
//!
//! - [`jet`] — truncated Taylor arithmetic for exact mixed input partials up
//!   to order three;
//! - [`tape`] — reverse-mode parameter gradients through any scalar
//!   expression built from those partials;
//! - [`network`] — the tanh multilayer perceptron and its initialization;
//! - [`loss`] — the Sobolev loss functionals and their Monte-Carlo
//!   discretizations;
//! - [`problems`] — heat, Burgers, kinetic Fokker–Planck, high-dimensional
//!   Poisson, and toy regression targets;
//! - [`reference`] — exact/reference solvers used for test error;
//! - [`optimizer`] — Adam;
//! - [`train`] — the training loop, metrics, and multi-seed sweeps;
//! - [`report`] — aggregation of run records into summary tables.
//!
//! The `sobolev-pinn` binary exposes training, sweeps, reference-grid
//! generation and reporting on the command line. The accompanying book under
//! `book/` walks through the concepts; its code snippets compile and run as
//! doc-tests of this crate.

pub mod error;
pub mod jet;
pub mod loss;
pub mod network;
pub mod optimizer;
pub mod problems;
pub mod quad;
pub mod reference;
pub mod report;
pub mod tape;
pub mod train;

pub use error::{Error, Result};

/// Doc-tested book chapters: every fenced Rust block in the guide compiles
/// and runs against the current API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/jets.md")]
    mod jets {}
    #[doc = include_str!("../../../book/src/networks-and-gradients.md")]
    mod networks_and_gradients {}
    #[doc = include_str!("../../../book/src/sobolev-losses.md")]
    mod sobolev_losses {}
    #[doc = include_str!("../../../book/src/problems-and-references.md")]
    mod problems_and_references {}
    #[doc = include_str!("../../../book/src/training-and-experiments.md")]
    mod training_and_experiments {}
}
