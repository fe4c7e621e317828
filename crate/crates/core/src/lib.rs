//! Velocity-band moment-closure solver for the 1D1V Vlasov-Ampere system.
//!
//! The distribution function is represented by five velocity moments per
//! uniform velocity band, each carried as a modal Legendre field on a 1D
//! spatial DG mesh. Time stepping Strang-splits the inter-band force coupling
//! (a fourth-order Taylor exchange step that conserves global moments exactly)
//! from the per-band fluid systems coupled to the Ampere law, which advance by
//! a one-step Lax-Wendroff DG method of the configured order.

pub mod closure;
pub mod diagnostics;
pub mod coupling;
pub mod driver;
pub mod error;
pub mod mesh;
pub mod scenario;
pub mod state;

pub mod field_init;
pub mod fluid;
pub mod forcing;

pub use error::{Error, Result};
