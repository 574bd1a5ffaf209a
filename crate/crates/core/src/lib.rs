//! Semiparametric single-index regression for right-censored responses.
//!
//! Censoring is allowed to depend on the covariates through a one-dimensional
//! index `theta'x`. The pipeline is:
//!
//! 1. [`cox::fit_cox`] estimates the censoring index from a Cox model on the
//!    censoring times.
//! 2. [`beran`] estimates the conditional censoring distribution given the
//!    index, and [`measure`] turns it into inverse-probability-of-censoring
//!    weights on the uncensored observations.
//! 3. [`index`] fits the single-index model `E[Y | X, Y <= tau] = m(beta'x)`
//!    by trimmed weighted least squares in two stages.
//!
//! [`sim`] reproduces the Monte Carlo comparison against Kaplan–Meier weights.

pub mod beran;
pub mod cox;
pub mod data;
pub mod error;
pub mod index;
pub mod kernels;
pub mod linalg;
pub mod measure;
pub mod optim;
pub mod sim;

pub use data::ObservedTriple;
pub use error::{Error, Result};
pub use kernels::Kernel;
