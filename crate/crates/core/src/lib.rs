//! Numerics for the planar logarithmic Choquard equation: the logarithmic
//! convolution on a box, the radial ground state, linearized operators and
//! eigensolvers, Lyapunov–Schmidt reduction and semiclassical concentration.
//!
//! The guide in `book/` walks through the pipeline; its code blocks run as
//! doctests of this crate.

pub mod error;
pub mod field;
pub mod groundstate;
pub mod linops;
pub mod logkernel;
pub mod reduction;
pub mod semiclassical;
pub mod special;

pub(crate) mod banded;
pub(crate) mod fft;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernel.md")]
    mod kernel {}
    #[doc = include_str!("../../../book/src/ground-state.md")]
    mod ground_state {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/reduction.md")]
    mod reduction {}
    #[doc = include_str!("../../../book/src/concentration.md")]
    mod concentration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
