//! Mean-field dynamics of a Bose-Einstein condensate in a pumped optical cavity.
//!
//! Two engines are provided: a three-mode reduction ([`dma`]) and a
//! split-step Gross-Pitaevskii solver ([`gp`]). Steady states, their
//! folds and their linear stability live in [`steady`] and [`stability`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dma;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod scenario;
pub mod stability;
pub mod steady;

pub use error::{Error, Result};
