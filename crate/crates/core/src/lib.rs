//! Quantum-jump trajectories of small open quantum systems, with the
//! martingale decomposition of stochastic entropy production, stopping-time
//! statistics and an exhaustive path-enumeration oracle.

pub mod analysis;
pub mod entropy;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{steady_state, QuantumModel, QubitParams, SteadyState};
pub use rng::StreamId;
pub use trajectory::{Integrator, SimOptions};
