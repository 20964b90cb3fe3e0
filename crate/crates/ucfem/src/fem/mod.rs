//! Finite element core: quadrature, spaces and dof maps, field evaluation,
//! assembly of the saddle-point forms, transfer operators, and norms.

pub mod assembly;
pub mod function;
pub mod norms;
pub mod quadrature;
pub mod space;
pub mod transfer;

pub use assembly::{
    assemble_gradient_smoother, assemble_lagrange_matrix, assemble_saddle,
    assemble_saddle_systems, assemble_scalar_load, DatasetData, SaddleSystem,
};
pub use function::{
    CoefficientField, ExactScalar, ExactVector, FeFunction, FluxData, PointLocator, ScalarData,
};
pub use norms::{error_norms, l2_norm, triple_norm, ErrorNorms, TripleNorm};
pub use quadrature::{EDGE_GAUSS, TRI_QUAD};
pub use space::{build_dofmap, DofMap, ElemGeom, Family, MixedSpaces, SpaceDescriptor};
pub use transfer::{l2_project_dg, lagrange_interpolate, prolong_lagrange, rt_interpolate};

use std::fmt;

/// Errors from space construction and assembly.
#[derive(Debug)]
pub enum FemError {
    /// Unsupported (family, order) pair or mismatched space pairing.
    UnsupportedSpace(String),
    /// Coefficient below its positivity floor, mesh/space mismatch, and similar.
    InvalidInput(String),
}

impl fmt::Display for FemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FemError::UnsupportedSpace(msg) => write!(f, "unsupported space: {msg}"),
            FemError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for FemError {}
