pub mod analysis;
pub mod barrier;
pub mod cli;
pub mod error;
pub mod exponents;
pub mod geometry;
pub mod oracle;
pub mod report;
pub mod rhs;
pub mod solver;

pub use barrier::{BarrierFunction, BarrierKind, CertifiedBarrier};
pub use error::{Error, Result};
pub use exponents::{GrowthParams, Violation};
pub use geometry::{BoundaryFrame, Constraint, ConvexDomain, ConvexityCertificate, KConvexity};
pub use oracle::ExactSolution;
pub use rhs::{RhsKind, RhsModel, RightHandSide};
