//! Stokes flow in branched 2D channel networks: per-component scattering
//! matrices from a Sherman–Lauricella boundary integral solver, assembled
//! into networks by flux conservation and cycle pressure continuity.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bie;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod network;
pub mod poiseuille;
pub mod quadrature;
pub mod scattering;
pub mod validation;

pub use num_complex::Complex64 as C64;
