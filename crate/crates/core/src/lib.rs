//! Discrete fractional p-Laplacian ground states on bounded domains.

pub mod bubble;
pub mod concentration;
pub mod domain;
pub mod error;
pub mod field;
pub mod fieldio;
pub mod functionals;
pub mod grid;
pub mod moving_plane;
pub mod nonlocal;
pub mod profile;
pub mod quadrature;
pub mod reduce;
pub mod solver;
pub mod weights;

pub use domain::DomainSpec;
pub use error::{Error, Result};
pub use field::{Field, NodeMeasure};
pub use grid::{Grid, GridHeader};
pub use solver::{InitKind, SolverConfig};
pub use weights::{NearField, PairWeights, Summation, WeightOptions};
