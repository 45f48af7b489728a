//! Normalized solutions of `−Δu + V(|x|)u + λu = ρ|u|^{q−2}u` with
//! `‖u‖₂ = μ`: discretization, solvers and verification instruments.

pub mod constants;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod json;
pub mod linalg;
pub mod potentials;
mod precond;
pub mod record;
pub mod scalar;
pub mod solvers;
pub mod spectral;

pub use constants::{geometry, gn_constant, gn_quotient, mu0, GNConstant, Geometry};
pub use energy::{energy, lagrange_multiplier, pde_residual, EnergyParams, Functional};
pub use error::{Error, Result};
pub use grid::{build_grid, GridSpec, RadialField, RadialGrid, Spacing};
pub use potentials::{Potential, PotentialKind};
pub use record::{SolutionKind, SolutionRecord};
pub use scalar::Real;
pub use spectral::{lambda1, LinearizedOperator, MorseIndex};

/// Double-precision grid.
pub type Grid = RadialGrid<f64>;
/// Double-precision field.
pub type Field = RadialField<f64>;
/// Single-precision grid.
pub type Grid32 = RadialGrid<f32>;
/// Single-precision field.
pub type Field32 = RadialField<f32>;
