//! Runs the code blocks of the book as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/medium.md")]
mod medium {}

#[doc = include_str!("../../../book/src/coefficients.md")]
mod coefficients {}

#[doc = include_str!("../../../book/src/pulses.md")]
mod pulses {}

#[doc = include_str!("../../../book/src/coupled-modes.md")]
mod coupled_modes {}

#[doc = include_str!("../../../book/src/travel-time.md")]
mod travel_time {}

#[doc = include_str!("../../../book/src/fractional.md")]
mod fractional {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
mod reproducibility {}
