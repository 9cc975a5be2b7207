//! Numerical core for deforming conformal minimal immersions of annular
//! domains.
//!
//! The library represents an immersion through its derivative data (a tuple of
//! holomorphic components with vanishing square sum), deforms it by
//! multiplicative López-Ros factors assembled from period-dominating sprays,
//! and certifies intrinsic boundary-distance growth through ring labyrinths.
//! Flux prescription along a parameter family is built on the same spray
//! machinery.
//!
//! Modules are layered bottom-up:
//!
//! * [`domain`]: annular domains, exhaustions, homology curves, parameter
//!   grids, and cut-off weights on finite grids.
//! * [`funspace`]: truncated Laurent arithmetic, evaluation, inversion,
//!   exponentials, contour integration, and least-squares fitting.
//! * [`holo`]: factored nonvanishing holomorphic multipliers (exponentials,
//!   spray products) with stable log-magnitude evaluation.
//! * [`weierstrass`]: derivative tuples, deformation step stacks, periods,
//!   flux, immersion integration, rank tests, and fullness perturbations.
//! * [`labyrinth`]: ring labyrinths with alternating gates and the
//!   crossing-length certificate.
//! * [`spray`]: curve bumps, period-dominating sprays, Newton period solves,
//!   and multiplier profiles.
//! * [`deform`]: López-Ros steps, distance-increasing deformations with
//!   machine-checkable certificates, and graph distance estimates.
//! * [`fluxctl`]: flux prescription along parameter families.

pub mod deform;
pub mod domain;
pub mod error;
pub mod fft;
pub mod fluxctl;
pub mod funspace;
pub mod holo;
pub mod labyrinth;
pub mod quad;
pub mod spray;
pub mod weierstrass;

pub use error::{Error, Result};

/// Complex double-precision scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Imaginary unit as a [`C64`].
pub const I: C64 = C64::new(0.0, 1.0);
