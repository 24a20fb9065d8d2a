//! Executable evaluators for the smooth constructions behind a model
//! structure on diffeological spaces: smoothing profiles, the hemisphere
//! disk model, homotopy algebra, the subdivision bijection, plot-generated
//! diffeologies, finite cell complexes and the cell-by-cell lifting
//! algorithms, plus numerical verification suites for all of them.

pub mod diffeology;
pub mod diskmodel;
pub mod error;
pub mod expr;
pub mod homotopy;
pub mod instance;
pub mod lifting;
pub mod smoothfn;
pub mod subdivision;
pub mod verify;

pub use error::{Error, Result};
