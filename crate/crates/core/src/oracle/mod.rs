// SPDX-License-Identifier: Apache-2.0

//! Brute-force references and statistical measurement.
//!
//! Everything here may enumerate every occupied bin, which the sketch itself
//! never does. It is meant for tests, evaluation and small data.

pub mod covariance;
pub mod eval;
pub mod histogram;
pub mod imse;
pub mod mixture;

pub use covariance::{covariance_mse, sample_covariance};
pub use histogram::{density_star_exact, exact_histogram, n_hat, n_hat_raw, tv_gap, ExactHistogram, StarDensities};
pub use imse::{estimate_imse, iv_gap, ImseAccumulator, ImseReport, McDomain};
pub use mixture::{gaussian_mixture, Component, GaussianMixture};
