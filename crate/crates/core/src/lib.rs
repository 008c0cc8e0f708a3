//! Economic model predictive control (EMPC) of pump stations feeding a
//! storage tank, with a trigger-level baseline and a closed-loop simulator.
//!
//! * [`model`]: tank mass balance, tabulated pump combinations, tariff,
//!   demand and stage costs.
//! * [`empc`]: finite-horizon dynamic programming solver, exhaustive
//!   enumeration oracle and the receding-horizon step.
//! * [`trigger`]: depth hysteresis controller.
//! * [`sim`]: closed-loop harness, run metrics and controller comparison.
//! * [`scenario`]: versioned scenario file schema.
//! * [`export`]: CSV and JSON-lines writers.

pub mod empc;
pub mod error;
pub mod export;
pub mod model;
pub mod scenario;
pub mod sim;
pub mod trigger;

pub use error::ModelError;
