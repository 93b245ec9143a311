//! Drift estimation for the fractional Ornstein–Uhlenbeck process and the
//! second-order asymptotic expansion of the estimator's distribution.
//!
//! * [`fgn`]: exact fractional Gaussian noise by circulant embedding.
//! * [`fou`]: fOU paths and the quadratic functional `Q_T`.
//! * [`estimator`]: moment estimator, bias correction, clipping.
//! * [`kernels`]: singular kernels and the quadratures for the constants.
//! * [`constants`]: every scalar of the expansion.
//! * [`density`]: expansion densities, CDFs and moments.
//! * [`montecarlo`]: replicated experiments and goodness of fit.

pub mod constants;
pub mod density;
pub mod error;
pub mod estimator;
pub mod fgn;
pub mod fou;
pub mod kernels;
pub mod montecarlo;
pub mod quadrature;

pub use error::{Error, Result};
