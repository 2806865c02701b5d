pub mod coefficients;
pub mod crosscheck;
pub mod error;
pub mod generate;
pub mod io;
pub mod leech;
pub mod matrix;
pub mod oracle;
pub mod realization;
pub mod riccati;
pub mod verify;

pub use coefficients::{build_redheffer, build_upsilon, central_solution, CoefficientSet, RedhefferCoefficients};
pub use error::{Error, Result};
pub use leech::{DerivedMatrices, LeechData, SolverOptions};
pub use matrix::CMatrix;
pub use realization::{apply_lft, hinf_norm_estimate, Realization};
