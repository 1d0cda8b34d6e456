//! Library side of the `layered` command: configuration, the studies behind
//! each subcommand and the writing of their outputs.

// Range checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod studies;
