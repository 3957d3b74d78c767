//! Exact experimental designs for a shifted Ornstein–Uhlenbeck sheet
//! observed on monotonic point sets.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod design;
pub mod error;
pub mod fisher;
pub mod io;
pub mod model;
pub mod oracle;
pub mod report;
pub mod sim;
pub mod simplex;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CovarianceParams, GridDesign, MonotoneDesign, Point, Region, ScatteredDesign};
