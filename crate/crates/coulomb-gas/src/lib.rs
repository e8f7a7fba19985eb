//! Coulomb gas numerics on the unit torus and in free space.
//!
//! The library evaluates the periodic Coulomb Green's function on T³ (Ewald
//! split, optional spline tabulation for the sampler hot loop), simulates the
//! associated Gibbs measure with Metropolis and heat-bath chains, estimates
//! linear statistics of the empirical measure together with the potential-
//! theoretic bounds that control them, and produces certified lower bounds on
//! the ground-state energy via ball smearing.
//!
//! Modules:
//!
//! * [`kernel`]: interaction kernels g and their ball averages γ_r ∗ g.
//! * [`system`]: particle configurations, cached energies, move deltas.
//! * [`sampler`]: MCMC chains, reproducible across checkpoints.
//! * [`observables`]: test functions, field grids, fluctuation estimators.
//! * [`equilibrium`]: equilibrium measure for quadratic confinement.
//! * [`groundstate`]: annealed minimizers and smearing certificates.
//! * [`experiments`]: config-driven experiment drivers and reports.

pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod geom;
pub mod groundstate;
pub mod kernel;
pub mod observables;
pub mod sampler;
pub mod stats;
pub mod system;

pub use error::{Error, Result};
pub use geom::Point3;
