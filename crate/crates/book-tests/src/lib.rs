//! Compiles every listing of the guide in `book/` as a doctest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/state.md")]
pub mod state {}
#[doc = include_str!("../../../book/src/quasidistributions.md")]
pub mod quasidistributions {}
#[doc = include_str!("../../../book/src/parity-chsh.md")]
pub mod parity_chsh {}
#[doc = include_str!("../../../book/src/nocount-ch.md")]
pub mod nocount_ch {}
#[doc = include_str!("../../../book/src/monte-carlo.md")]
pub mod monte_carlo {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
