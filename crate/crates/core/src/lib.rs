//! Navigation functions for stochastic systems.
//!
//! Under the noise-matching condition `λ G R⁻¹ Gᵀ = Σt`, the value function of a
//! first-exit stochastic optimal control problem is `V = -λ log Ψ`, where the
//! desirability `Ψ` solves a linear elliptic PDE with Dirichlet data
//! `e^(-φ/λ)` on goals and obstacles. This crate rasterizes scenarios into
//! configuration-space grids ([`domain`]), discretizes and solves the PDE
//! ([`pde`]), maps between `Ψ` and `V` ([`transform`]), and turns `V` into a
//! feedback policy that can be followed, simulated, and cross-checked by
//! Feynman–Kac sampling ([`control`]). Closed-form oracles live in
//! [`analytic`]; [`cli`] wires everything to configuration files.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod control;
pub mod domain;
pub mod error;
pub mod pde;
pub mod transform;

pub use error::{Error, Result};
