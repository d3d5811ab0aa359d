//! Core algorithms: spin dynamics models, exact-discretization simulation,
//! continuous-discrete Kalman filtering, spin-noise spectroscopy and
//! squeezing/entanglement witnesses.

pub mod error;
pub mod estimator;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod physmodel;
pub mod simulator;
pub mod spectra;
pub mod witness;

pub use error::{Error, Result};
