//! Simulation core for two crossed Su-Schrieffer-Heeger chains coupled
//! through a four-node junction.
//!
//! Everything lives in the single-excitation sector with `hbar = 1` and the
//! inter-cell hopping `J2` as the energy unit. The bare atomic frequency is
//! removed by working in the frame rotating at it, so the chain Hamiltonians
//! have a zero diagonal.
//!
//! Module map:
//! - [`model`]: chain/junction specifications and Hamiltonian assembly.
//! - [`spectral`]: edge-state solutions, doublet and manifold extraction.
//! - [`effective`]: two-spin effective model, propagator, SWAP calibration.
//! - [`dynamics`]: exact propagation, gate fidelities, ensembles, sweeps.
//! - [`open_system`]: waveguide kernels and the excitation-sectored master equation.
//! - [`reproduce`]: the numerical checks behind the `repro` command.

pub mod dynamics;
pub mod effective;
pub mod error;
pub mod linalg;
pub mod model;
pub mod open_system;
pub mod optimize;
pub mod reproduce;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{
    ChainSpec, Chain, DisorderMode, DisorderSpec, JunctionSpec, SiteIndex, Sublattice, SystemConfig,
    SystemSpec,
};
pub use spectral::{EdgeDoublet, EdgeManifold, EdgeWindow};
pub use effective::{SpinModelParams, SweetPoint};
pub use dynamics::{EnsembleReport, StateVector};
pub use open_system::{AtomLayout, DissipationKernel, SectoredDensityMatrix};

pub use nalgebra::{DMatrix, DVector, Matrix4};
pub use num_complex::Complex64 as C64;
