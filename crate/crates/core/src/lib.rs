//! Phase-space quasidistributions and Bell tests for the two-mode squeezed
//! vacuum produced by a nondegenerate optical parametric amplifier (the
//! regularized EPR state).
//!
//! The crate is organised around four layers:
//!
//! * [`analytics`]: closed forms for the Wigner and Q functions, the
//!   displaced parity correlation and the no-count probabilities.
//! * [`fock`]: an independent photon-number-basis model that reproduces
//!   the same quantities from explicit displacement matrix elements.
//! * [`bell`]: CHSH and Clauser–Horne combinations, parameter scans and
//!   the optimiser that searches for maximal violation.
//! * [`mc`]: a seeded Monte Carlo simulation of displaced photon counting.
//!
//! ```
//! use nopa_bell::{bell, SqueezingParam};
//! let report = bell::chsh_optimize(SqueezingParam::new(6.0)?, &bell::OptimizerConfig::default())?;
//! assert!((report.value - 2.19055).abs() < 1e-4);
//! assert!(report.violated);
//! # Ok::<(), nopa_bell::Error>(())
//! ```

pub mod analytics;
pub mod bell;
pub mod error;
pub mod fock;
pub mod mc;
pub mod optim;
pub mod params;

pub use error::{Error, Result};
pub use params::{ComplexAmplitude, PhasePoint, SqueezingParam};
