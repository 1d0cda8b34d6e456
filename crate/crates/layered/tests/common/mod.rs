//! Independent reference values shared by the integration tests.
//!
//! Nothing here calls into the routines under test except for plain data
//! types and the generic quadrature rules.
#![allow(dead_code)]

pub mod oracles;
