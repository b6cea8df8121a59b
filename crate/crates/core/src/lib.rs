//! Greedy sparse linear discriminant analysis over decision stumps, its
//! exact online update, and a cascaded sliding-window detector built on it.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! name the double-precision types most callers want.

// Negated float comparisons are deliberate: they treat NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod error;
pub mod gslda;
pub mod io;
pub mod label;
pub mod linalg;
pub mod ogslda;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod weak;

pub use error::{Error, Result};
pub use label::Label;
pub use scalar::Real;

pub type LinearModel = gslda::LinearModel<f64>;
pub type ScatterState = gslda::ScatterState<f64>;
pub type OnlineClassifier = ogslda::OnlineClassifier<f64>;
pub type Cascade = cascade::Cascade<f64>;
pub type Stump = weak::Stump<f64>;

pub type LinearModel32 = gslda::LinearModel<f32>;
pub type ScatterState32 = gslda::ScatterState<f32>;
pub type OnlineClassifier32 = ogslda::OnlineClassifier<f32>;
pub type Cascade32 = cascade::Cascade<f32>;
