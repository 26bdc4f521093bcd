//! Random convolutional networks over finite abelian groups `Z_m1 x .. x Z_mk`:
//! exact layer spectra by character-block diagonalization, forward and backward
//! passes, Jacobian diagnostics, the single-step gradient attack, and seeded
//! experiments that check the quantitative bounds.

// Range checks are written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod convop;
pub mod error;
pub mod group;
pub mod network;
pub mod rng;
pub mod signal;
pub mod spectral;
pub mod stats;
pub mod verify;
