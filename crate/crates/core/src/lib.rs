#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod counterexample;
pub mod curvature;
pub mod fields;
pub mod geodesic;
pub mod inequality;
pub mod quadrature;
pub mod surface;

pub use error::{Error, Result};
pub use fields::{Jet, Point, SmoothField};
pub use surface::{ConformalSurface, CurvatureConvention};
