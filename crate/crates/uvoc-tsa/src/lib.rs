//! Simulation and analysis toolkit for transient stability assessment of
//! grid-forming converters under unified virtual oscillator control (uVOC)
//! during symmetrical AC grid faults.
//!
//! The toolkit covers:
//!
//! * the uVOC control law with current-reference saturation, active
//!   resistance, virtual impedance, and the fault-management state machine
//!   ([`controller`]);
//! * reduced-order synchronous-frame models for current-unconstrained and
//!   current-constrained operation, with quasi-static or dynamic current
//!   representation ([`reduced`]);
//! * a stationary-frame averaged simulation of the complete controller
//!   coupled to the aggregated network, used as an independent cross-check
//!   of the reduced models ([`oracle`]);
//! * a Dormand–Prince 4(5) integrator with dense output and event
//!   localization ([`solver`]);
//! * phase-plane machinery: normalized derivative surfaces over the (δ, V)
//!   plane, equilibrium refinement and classification, limit-cycle detection
//!   with period measurement, and fault-clearing sweeps ([`analysis`]);
//! * scenario orchestration and file exports for the command-line frontend
//!   ([`scenario`], [`export`], [`config`]).

pub mod analysis;
pub mod config;
pub mod controller;
pub mod error;
pub mod export;
pub mod oracle;
pub mod params;
pub mod phasor;
pub mod reduced;
pub mod scenario;
pub mod solver;

pub use error::{AnalysisError, ConfigError, ControlError, ParamError, SolverError};
pub use phasor::Phasor;
