//! Single-photon emission of a (giant) two-level atom coupled to a honeycomb
//! lattice of photonic resonators with sublattice detuning.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: honeycomb geometry and the real-space photonic Hamiltonian
//!   for uniform and domain-wall detuning profiles.
//! - [`sparse`]: the Hermitian CSR operator shared by every solver.
//! - [`bloch`]: Bloch bands, eigenvector angles, massive-Dirac valleys, Berry
//!   curvature and valley Chern numbers.
//! - [`emitter`]: giant-atom couplings, the valley structure factor and the
//!   valley-selectivity conditions.
//! - [`propagator`]: Chebyshev evaluation of `exp(-iHt) psi`.
//! - [`dynamics`]: single-excitation evolution and emission observables.
//! - [`edgemodes`]: domain-wall ribbon spectra, analytic edge-mode envelopes,
//!   edge LDOS and decay-rate formulas.
//! - [`scenario`]: end-to-end drivers for the bulk and domain-wall emission
//!   experiments, the ribbon spectrum and the band maps.
//!
//! Units: energies in units of the hopping `J`, lengths in units of the
//! nearest-neighbour distance `a`, times in units of `1/J`.

pub mod bloch;
pub mod dynamics;
pub mod edgemodes;
pub mod emitter;
mod error;
pub mod lattice;
pub mod propagator;
pub mod scenario;
pub mod sparse;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Real 2-vector used for positions and momenta.
pub type Vec2 = nalgebra::Vector2<f64>;
