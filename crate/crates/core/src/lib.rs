//! Low-rank matrix factorization with Nyström-initialized ScaledGD.
//!
//! Module layout, bottom to top: [`matcore`] (dense kernels), [`problems`]
//! (targets and regimes), [`init`] (initial factors), [`solvers`] (step
//! kernels and the run loop), [`diagnostics`] (per-iteration metrics and the
//! rate classifier), [`nora`] (adapter finetuning of a linear model).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod init;
pub mod matcore;
pub mod nora;
pub mod problems;
pub mod solvers;

pub use matcore::{Matrix, MatError, Seed};
