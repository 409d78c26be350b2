//! Finite-volume grand-canonical laboratory for a charged, non-interacting
//! quantum gas in a random potential and a constant magnetic field.
//!
//! The pipeline is: sample a potential on a Dirichlet box ([`potentials`]),
//! assemble the magnetic Schrödinger operator as a polynomial in the field
//! strength `b` ([`operator`]), then evaluate pressure, density and the
//! generalized susceptibilities either spectrally ([`spectral`], [`thermo`])
//! or through contour integrals of resolvent traces ([`contour`],
//! [`response`]). [`experiments`] drives finite-volume sweeps, disorder
//! ensembles, ergodic averages and boundary-layer probes.

pub mod contour;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod operator;
pub mod potentials;
pub mod response;
pub mod spectral;
pub mod thermo;

pub use error::{Error, Result};
pub use linalg::{c64, CMatrix};
