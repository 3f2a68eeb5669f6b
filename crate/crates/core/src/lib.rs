//! Exact Fedosov star products on regular Poisson charts in foliated normal
//! form, their descent to finite-order Whitney jets, and the equivariance,
//! reduction and equivalence checks built on them.
//!
//! Everything is generic over a [`coeff::Scalar`] field; the aliases below fix
//! the Gaussian rationals, which is what the Weyl algebra needs for its `i`.

#![allow(clippy::needless_range_loop, clippy::len_without_is_empty)]

pub mod coeff;
pub mod equivariance;
pub mod error;
pub mod fedosov;
pub mod geometry;
pub mod report;
pub mod weyl;
pub mod whitney;

pub use error::{Error, Result};

pub type Gaussian = coeff::GaussianRational;
pub type Poly = coeff::Polynomial<Gaussian>;
pub type PolySeries = coeff::Series<Gaussian>;
pub type Ideal = coeff::IdealSpec<Gaussian>;
