//! Simulation of high-frequency pulses crossing a randomly layered slab whose
//! speed fluctuations have long-range correlations.
//!
//! The crate follows one pipeline end to end:
//!
//! * [`medium`] synthesizes the fluctuation field as a superposition of
//!   Ornstein–Uhlenbeck modes;
//! * [`correlation`] evaluates the correlation function, its power-law tail
//!   and the attenuation/dispersion coefficients `Γ_c`, `Γ_s`;
//! * [`kernel`] builds the transmitted front from those coefficients;
//! * [`modes`] integrates the coupled right/left-going mode amplitudes through
//!   sampled media, and [`limit_sde`] simulates their diffusion limit;
//! * [`stats`] studies the random travel time and the arrival delay;
//! * [`fractional`] provides the causal memory operator, its Weyl-derivative
//!   limit and a Kramers–Kronig check.
//!
//! ```
//! use layered::correlation::{scattering_coefficients, tail_constants};
//! use layered::medium::MediumParams;
//!
//! let params = MediumParams::gamma_half();
//! let tail = tail_constants(&params);
//! assert!((tail.gamma - 0.5).abs() < 1e-15);
//! let c = scattering_coefficients(&params, 1.0).unwrap();
//! assert!(c.gamma_c > 0.0);
//! ```

// Input checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod error;
pub mod fractional;
pub mod kernel;
pub mod limit_sde;
pub mod medium;
pub mod modes;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
