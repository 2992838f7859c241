//! Kinetic mean-field model of two-dimensional grain growth.
//!
//! Grains are grouped by topological class `n >= 2` (number of edges) and
//! area `a >= 0`. Each class is transported in area with speed `n - 6` and
//! classes exchange grains through a tri-diagonal collision operator scaled
//! by a nonlocal coupling weight chosen to keep the polyhedral defect at zero.
//! The crate provides the truncated operator, two independent time steppers,
//! the truncation ladder, verification diagnostics, the self-similar moment
//! scheme and file I/O.

pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod expm;
pub mod io;
pub mod linalg;
pub mod moments;
pub mod params;
pub mod quadrature;
pub mod selfsim;
pub mod state;
pub mod stepper;
pub mod supersolution;
pub mod transport;

pub use error::{Error, Result};
pub use exec::Exec;
pub use moments::{compute_moments, MomentSet};
pub use params::{AreaGrid, ModelParams, OperatorMode};
pub use state::SimState;
pub use supersolution::SuperSolution;
