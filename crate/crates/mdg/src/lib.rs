//! Space-time discontinuous Galerkin solver for 1D unsteady conservation
//! laws with solution-adaptive interface tracking.
//!
//! A 1D unsteady problem is posed on a single space-time slab of
//! quadrilaterals whose top-node abscissae are unknowns alongside the modal
//! flow coefficients. Conservation is enforced on elements (the space-time DG
//! residual) and on element interfaces (a nodal jump residual tested in the
//! continuous trace space); the combined over-determined system is minimized
//! in the least-squares sense by Levenberg-Marquardt. Element faces migrate
//! onto shocks, contacts, and derivative kinks, so no Riemann-solver flux,
//! limiter, or artificial viscosity appears anywhere.

pub mod dg_space;
pub mod lm;
pub mod mesh;
pub mod physics;
pub mod residual;
pub mod riemann;

pub use physics::{Primitive, SpaceTimeNormal, State, System};
