//! Local spacing statistics of fractional parts `{alpha * a(x)}` for lacunary
//! and polynomial sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`sequences`] materialises the integer sequences `a(1..N)` exactly.
//! * [`fracparts`] turns a fixed-point `alpha` and those integers into ordered
//!   points on the circle.
//! * [`spacings`], [`correlations`] and [`smallparts`] compute the observables.
//! * [`poisson_model`] holds the reference laws of i.i.d. uniform levels.
//! * [`counting`] counts solutions of the Diophantine systems that control the
//!   variance of the correlation sums.
//! * [`harness`] runs seeded experiment campaigns and keeps a JSON-lines ledger.

pub mod correlations;
pub mod counting;
pub mod error;
pub mod fracparts;
pub mod harness;
pub mod io;
pub mod poisson_model;
pub mod quad;
pub mod seeds;
pub mod sequences;
pub mod smallparts;
pub mod spacings;

pub use error::{Error, Result};
