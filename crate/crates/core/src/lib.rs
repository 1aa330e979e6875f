//! Equilateral restricted four-body problem toolkit.
//!
//! Three primaries with masses `1 - 2mu, mu, mu` sit at the vertices of an
//! equilateral triangle of unit side, rotating uniformly about their common
//! center of mass. A massless particle moves in the same plane. This crate
//! implements the synodic-frame dynamics and the analysis pipeline around the
//! collinear equilibrium point L2:
//!
//! * [`model`] — equations of motion, effective potential and its closed-form
//!   partial derivatives through order 4, Jacobi integral, reversing symmetry;
//! * [`integrator`] — adaptive Dormand–Prince 5(4) with dense output, section
//!   event detection and a primary-proximity guard;
//! * [`equilibria`] — equilibrium location and Hill-region classification;
//! * [`linstab`] — linearization at collinear points, stability regimes and
//!   the critical mass where the 1:1 non-semisimple resonance occurs;
//! * [`nf_algebra`] — exact polynomial algebra in symplectic polar
//!   coordinates (Laurent powers of `r`, Fourier basis in `theta`);
//! * [`normal_form`] — Burgoyne semisimple/nilpotent splitting, the Deprit
//!   Lie-transform normal form through second order, and its versal
//!   deformation;
//! * [`manifolds`] — globalization of the unstable manifold of L2, Poincare
//!   cuts on `y = 0`, and detection of symmetric homoclinic orbits.

pub mod equilibria;
pub mod integrator;
pub mod linstab;
pub mod manifolds;
pub mod model;
pub mod nf_algebra;
pub mod normal_form;
pub mod report;

/// Double-precision Laurent–Fourier polynomial, the working type of the
/// normal-form pipeline.
pub type Poly = nf_algebra::LaurentFourierPoly<f64>;
/// Exact-coefficient Laurent–Fourier polynomial, used where ring identities
/// must hold without rounding.
pub type RatPoly = nf_algebra::LaurentFourierPoly<num_rational::BigRational>;
/// Double-precision polynomial in the four Cartesian phase-space variables.
pub type CartPoly = nf_algebra::CartesianPoly4<f64>;

pub use model::{State, SystemConfig};
