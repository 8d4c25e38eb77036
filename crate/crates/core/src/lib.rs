//! Glucose regulation with Takagi-Sugeno fuzzy control and TD3.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod env;
pub mod error;
pub mod fuzzy;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod patient;
pub mod td3;
pub mod tune;

pub use error::{Error, Result};
