//! Left-invariant Hermitian geometry on low-dimensional real Lie algebras.
//!
//! The crate computes Bismut–Ricci forms of invariant Hermitian structures,
//! tests the SKT (pluriclosed) condition `∂∂̄ω = 0`, and integrates the
//! pluriclosed flow together with its bracket-flow counterpart.

pub mod bismut;
pub mod catalog;
pub mod error;
pub mod flow;
pub mod forms;
pub mod generate;
pub mod hermitian;
pub mod instance;
pub mod liealg;
pub mod ode;

pub use error::{Error, Result};
pub use forms::{FormBasis, InvariantForm, C64};
pub use hermitian::{ComplexStructure, HermitianStructure, Metric, UnitaryFrame};
pub use liealg::{LieAlgebra, StructureReport};
pub use catalog::{catalog, InstanceSpec, Provenance};
pub use flow::{FlowControls, FlowKind, Trajectory};
pub use instance::{parse_instance, read_instance, to_instance_string, write_instance};
