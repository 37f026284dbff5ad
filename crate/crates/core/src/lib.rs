//! Quantum maximum-entropy closure of Wigner moment systems.
//!
//! The crate evaluates the moment constraints of the maximum-entropy
//! distribution for Kane, parabolic and graphene bands, inverts them for the
//! Lagrange multipliers, adds the second-order quantum corrections, computes
//! electron-phonon production terms and derives relaxation-time mobilities.
//!
//! Public quantities are SI unless stated otherwise. Energies inside the
//! occupation exponent are reduced by `k_B T_L` of the band model.

// `!(x > 0.0)` deliberately rejects NaN; quadrature nodes keep full published precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod closure_second;
pub mod closure_zero;
pub mod collisions;
pub mod constants;
pub mod dispersion;
pub mod error;
pub mod occupation;
pub mod quadrature;
pub mod transport;

mod band;

pub use closure_zero::{
    closure_fluxes, constraints_forward, invert_constraints, jacobian_2x2, ClosureFluxes,
    Compatibility, Inversion, InversionOptions, MomentVector, Multipliers, Order,
};
pub use dispersion::{BandKind, DispersionModel};
pub use error::{Error, Result};
pub use quadrature::{Estimate, QuadratureSpec};
