// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cbn;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod graph;
pub mod knowledge;
pub mod learners;
pub mod par;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
