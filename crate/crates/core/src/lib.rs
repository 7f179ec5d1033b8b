//! Finite element solver for a Cahn–Hilliard type system with a delayed
//! chemical potential and a dynamic boundary condition.
//!
//! The singular part of the bulk and boundary potentials is a maximal
//! monotone graph, handled through its Yosida approximation ([`graphs`]).
//! Space is discretized with P1 elements ([`discretization`]); the
//! [`stepper`] advances the regularized delay scheme block by block, and
//! [`diagnostics`] turns the qualitative results about the limit problem
//! into measurable checks. [`verify`] runs the acceptance suite.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod experiments;
pub mod graphs;
pub mod io;
pub mod linalg;
pub mod stepper;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/scheme.md")]
    mod scheme {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
