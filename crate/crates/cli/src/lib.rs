//! Scenario files, solve runs and their output artifacts for `scvx`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod output;
pub mod run;
pub mod scenario;
