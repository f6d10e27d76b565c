//! Simulation, summarisation and classification of spatial extreme dependence.
//!
//! The crate is organised around the data flow of the toolkit:
//!
//! - [`sim`] draws Gaussian random fields and builds max-stable, inverted
//!   max-stable, extreme-Gaussian and max-mixture realisations on a site set.
//! - [`extremes`] turns observation matrices into dependence tensors: moving
//!   average detrending, block maxima, rank transform to unit Fréchet and the
//!   pairwise empirical upper/lower tail-dependence estimators.
//! - [`nn`] is a small dense/convolutional network engine (f64, reverse-mode
//!   gradients, Adam) used to classify dependence tensors.
//! - [`corpus`] generates labelled corpora for the three simulation scenarios,
//!   splits them and evaluates trained networks group by group.

pub mod corpus;
pub mod error;
pub mod extremes;
pub mod nn;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
