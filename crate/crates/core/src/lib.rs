//! Exact diagonalization toolkit for the resonant sector of few-body
//! dipole-dipole couplings in one-dimensional Rydberg chains.
//!
//! Pipeline: [`basis`] enumerates the conserved sector, [`geometry`] places
//! atoms, [`coupling`] evaluates matrix elements, [`hamiltonian`] assembles the
//! dense sector matrix, [`spectral`] diagonalizes it, [`dynamics`] evolves a
//! quench and [`analysis`] classifies the result.

pub mod analysis;
pub mod basis;
pub mod coupling;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod spectral;

pub use basis::{InteractionOrder, Level, MemoryBudget, SectorBasis, SectorState};
pub use coupling::{CouplingConstants, HopKind, HoppingFlags};

pub use dynamics::{ObservableSeries, QuenchSpec};
pub use error::{Error, Result};
pub use geometry::ChainGeometry;
pub use hamiltonian::SectorHamiltonian;
pub use spectral::EigenSystem;
