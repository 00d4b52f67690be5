//! Tomographic (probability) representation of one-dimensional quantum
//! mechanics.
//!
//! States are mapped to symplectic tomograms `w(X, μ, ν)`, tomograms are
//! mapped back to density matrices, and tomograms are evolved in time by
//! independent routes that can be checked against each other:
//!
//! * exact frame pullbacks for the free particle and the unit oscillator
//!   ([`propagator::evolve_pullback`]);
//! * propagation of the reconstructed density matrix with a quantum Green
//!   function, closed form, time-sliced or van Vleck
//!   ([`propagator::evolve_via_green`]);
//! * the first-order evolution equation solved along characteristics
//!   ([`evolution::solve_characteristics`]).
//!
//! Units are ħ = m = 1 throughout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod greens;
pub mod io;
pub mod numerics;
pub mod propagator;
pub mod states;
pub mod tomography;

pub use error::{Error, Result};
pub use evolution::{
    reduce_evolution_equation, solve_characteristics, BargmannPoint, LinearForm, PotentialPolynomial, TransportPDE,
};
pub use greens::{GreenFunction, GreenKind, Potential};
pub use numerics::UniformGrid;
pub use propagator::{evolve_pullback, evolve_via_green, kernel_fourier, KernelFourierQuery, Route};
pub use states::{DensityMatrix, StateSpec, WaveFunction};
pub use tomography::{Discrepancy, OpticalTomogram, ThetaGrid, Tomogram};
