//! Extremality tests and recursive extremal decomposition of quantum
//! steering assemblages.
//!
//! An assemblage is a grid `σ_{n|r}` of positive semidefinite `d x d` blocks
//! (outcome `n`, input `r`, both 0-based) whose marginal `Σ_n σ_{n|r}` is the
//! same for every input and has unit trace.

pub mod assemblage;
pub mod cli;
pub mod decomposition;
pub mod exec;
pub mod extremality;
pub mod format;
pub mod numerics;
pub mod perturbation;
pub mod random;
pub mod scenarios;

pub use assemblage::{Assemblage, AssemblageError, ValidationReport};
pub use decomposition::{decompose, DecomposeOptions, DecompositionResult};
pub use exec::Execution;
pub use extremality::{is_extremal, is_extremal_direct, ExtremalityReport, Stage};
pub use numerics::{HermitianOperator, DEFAULT_EPSILON};
pub use perturbation::Perturbation;
