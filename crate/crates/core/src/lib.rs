//! Numerical laboratory for the Gaussian fluctuations of mean-field
//! interacting particle systems driven by idiosyncratic and common noise.
//!
//! The crate is organised around the objects of the model:
//!
//! * [`scenario`]: coefficients, initial densities, test functions, the
//!   config grammar and the reproducible RNG plan.
//! * [`particles`]: Euler–Maruyama simulation of the `N`-particle system
//!   and the martingale ledgers `M^N(φ)`, `M̂^N(φ)`.
//! * [`meanfield`]: spectral solver for the stochastic Fokker–Planck
//!   equation of the conditional density `ρ_t`.
//! * [`sobolev`]: Fourier transforms of empirical measures and fields and
//!   Bessel-weighted `H^{-α}` norms.
//! * [`fluctuation`]: solver for the limiting linear fluctuation SPDE.
//! * [`statlab`]: Monte-Carlo campaigns (scaling fits, exponential law of
//!   large numbers, conditional CLT, tightness increments, KS tests).
//! * [`cli`]: the `fluctlab` command line front end and run persistence.

pub mod cli;
pub mod error;
pub mod fluctuation;
pub mod grid;
pub mod io;
pub mod meanfield;
pub mod particles;
pub mod scenario;
pub mod sobolev;
pub mod statlab;

pub use error::{Error, Result};
