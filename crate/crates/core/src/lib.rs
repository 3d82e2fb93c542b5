//! Arbitrage-free eSSVI implied total variance surfaces.
//!
//! The crate covers the full path from a raw option chain to a certified
//! surface:
//!
//! - [`pipeline`] turns quotes into per-maturity anchors (forward, `k*`, `theta*`).
//! - [`robust`] fits slices one maturity at a time inside explicit `psi` bounds.
//! - [`global`] fits all slices jointly over a rectangular parameter box.
//! - [`arbitrage`] checks butterfly conditions and classifies every pair of
//!   slices for calendar-spread arbitrage, locating crossings and tangencies.
//! - [`metrics`] reports the fit measures.
//!
//! ```
//! use essvi::surface::EssviSlice;
//! use essvi::arbitrage::{classify_pair, Verdict};
//!
//! let near = EssviSlice::new(0.04, -0.3, 0.2, 0.5).unwrap();
//! let far = EssviSlice::new(0.06, -0.3, 0.25, 1.0).unwrap();
//! assert_eq!(classify_pair(&near, &far).unwrap().verdict, Verdict::NoArbStrict);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod blackscholes;
pub mod cli;
pub mod error;
pub mod global;
pub mod lsq;
pub mod metrics;
pub mod minimize;
pub mod pipeline;
pub mod robust;
pub mod surface;
pub mod synth;

pub use error::{Error, Result};
pub use surface::EssviSlice;
