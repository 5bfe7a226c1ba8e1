//! Discrete field constants on box domains.
//!
//! This crate assembles a staggered-grid gradient-curl-divergence complex
//! with mixed tangential/normal boundary conditions and diagonal material
//! weights, and computes the best constants of the associated first-order
//! operators: the scalar (Poincare/Friedrichs) constant, the divergence and
//! rotation constants, and the full field constant given by their maximum.
//! Every computed value is cross-checkable against a dense eigensolver below
//! a dimension cap, and the discrete complex reproduces the structural
//! identities of its continuous counterpart exactly.

pub mod cli;
pub mod config;
pub mod constants;
pub mod dense;
pub mod derham;
pub mod dual_pair;
pub mod error;
pub mod grid;
pub mod helmholtz;
pub mod selftest;
pub mod sparse;

pub use error::{Error, Result};
