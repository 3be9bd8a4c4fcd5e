//! Numerical verification of elliptic hypergeometric integral identities.
//!
//! The crate evaluates elliptic gamma functions and the type-I / type-II
//! contour integrals built from them (Dixon and Selberg integrals), and
//! checks the transformation formulas relating them at desk scale (up to
//! three integration variables). It provides:
//!
//! - [`symalg`]: exact multiplicative algebra of parameter monomials
//!   (eighth-root-of-unity phases, rational exponents with denominator
//!   dividing 8, balancing relations).
//! - [`efun`]: elliptic Pochhammer symbols and the elliptic gamma function
//!   in the three bases `(p,q)`, `(p,q^2)`, `(sqrt p, sqrt q)`.
//! - [`kernels`]: the parameter-independent densities of type-I and
//!   type-II integrands on the torus.
//! - [`quad`]: trapezoidal quadrature over products of unit circles with
//!   convergence control, numeric residues, and 1-D residue-corrected
//!   contour deformation.
//! - [`ispec`]: machine-readable integral specifications (variable groups,
//!   gamma-factor orbits, balancing validation, contour checks) and their
//!   evaluation.
//! - [`catalog`]: the registry of verifiable identities, shipped as JSON
//!   data under `catalog/`.
//! - [`fubini`]: the labeled-graph admissibility test for interchanging
//!   integration order in iterated integrals.
//! - [`sampler`]: deterministic generation of parameter assignments
//!   satisfying balancing relations and contour windows.

pub mod catalog;
pub mod efun;
pub mod error;
pub mod fubini;
pub mod ispec;
pub mod kernels;
pub mod quad;
pub mod sampler;
pub mod schema;
pub mod symalg;

pub use error::CoreError;
pub use num_complex::Complex64;
