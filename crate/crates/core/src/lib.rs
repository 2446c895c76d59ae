#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod hull;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod scaling;
pub mod streaming;

pub use error::{Error, Result};
