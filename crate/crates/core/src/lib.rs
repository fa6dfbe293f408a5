#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bell;
pub mod bloch;
pub mod conic;
pub mod error;
pub mod glue;
pub mod hull;
pub mod innn22;
pub mod jointmeas;
pub mod lhvlp;
pub mod simpoly;
pub mod steer;
pub mod sweep;

pub use error::{Error, Result};
