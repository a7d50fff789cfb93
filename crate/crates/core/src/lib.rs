//! Measurement-free preparation of approximate GKP grid states with a
//! sequence of qubit-controlled oscillator displacements (Rabi gates).
//!
//! The oscillator lives in a truncated Fock basis ([`hilbert`]), gate
//! sequences are built and applied in [`protocol`], figures of merit are in
//! [`fom`], the infinite-squeezing model is [`peaks`] and open-system
//! simulation is [`noise`].

pub mod density;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod optimize;
pub mod peaks;
pub mod protocol;
pub mod fom;
pub mod noise;
pub mod quadrature;

pub use density::BosonDensity;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
