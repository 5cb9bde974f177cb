//! Numerical toolkit for the vanishing-viscosity limit of gradient flows
//! `eps u' + DE_t(u) = 0` driven by smooth, possibly nonconvex, time-dependent
//! energies on R^d.
//!
//! The crate is organized around the objects that survive the limit:
//!
//! * [`energy`] — time-dependent energy models with analytic derivatives,
//!   derivative self-validation, power-control and coercivity diagnostics.
//! * [`flow`] — stiff implicit-Euler integration of the perturbed flow for a
//!   fixed viscosity, with an energy-identity audit along the trajectory.
//! * [`critical`] — location and pseudo-arclength continuation of critical
//!   points, fold detection, transversality and Lojasiewicz diagnostics.
//! * [`transition`] — heteroclinic jump transitions at frozen time and their
//!   energy-dissipation cost.
//! * [`cost`] — independent estimates of the dissipation cost between critical
//!   points (1-d quadrature, lattice shortest paths) and metric property checks.
//! * [`limit`] — assembly of the limiting quasistatic evolution
//!   (branch-following plus jumps), defect-measure profiles, and the
//!   convergence comparison against finite-viscosity trajectories.

pub mod cost;
pub mod critical;
pub mod energy;
pub mod flow;
pub mod limit;
pub mod sample;
pub mod transition;

pub use energy::EnergyModel;
pub use flow::Trajectory;

/// State vector in R^d.
pub type State = nalgebra::DVector<f64>;
/// Symmetric d x d matrix (Hessian).
pub type Matrix = nalgebra::DMatrix<f64>;
