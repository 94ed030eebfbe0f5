//! Simulation and optimization toolkit for Rydberg-blockade (PXP-type) models on
//! two-dimensional lattices: constrained bases, sparse Hamiltonians, Krylov time
//! evolution, forward-scattering subspaces, two-angle TDVP orbits and
//! derivative-free revival optimization.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the experiments use.

pub mod basis;
pub mod eigen;
pub mod error;
pub mod evolve;
pub mod fsa;
pub mod lattice;
pub mod num;
pub mod operators;
pub mod optimize;
pub mod tdvp;

pub use basis::{enumerate_basis, maximally_excited, Configuration, ConstrainedBasis};
pub use error::{Error, Result};
pub use lattice::{build_lattice, Boundary, LatticeKind, LatticeSpec, SiteGraph, Sublattice};
pub use num::{Complex, Real};

pub type Operator = operators::SparseOperator<f64>;
pub type Model = operators::ModelSpec<f64>;
pub type State = evolve::StateVector<f64>;
pub type Series = evolve::TimeSeries<f64>;
pub type Spectrum = eigen::SpectrumResult<f64>;
pub type Fsa = fsa::FsaBasis<f64>;
pub type Tdvp = tdvp::TdvpParams<f64>;
pub type Trajectory = tdvp::TdvpTrajectory<f64>;
pub type Revival = optimize::RevivalReport<f64>;
pub type Optimum = optimize::OptResult<f64>;
