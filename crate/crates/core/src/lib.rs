#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod calibration;
pub mod eos;
pub mod error;
pub mod expr;
pub mod numerics;
pub mod oracle;
pub mod thermo;

pub use error::{Error, Result};
