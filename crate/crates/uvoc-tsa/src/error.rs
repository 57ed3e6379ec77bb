//! Error types shared across the toolkit.

use thiserror::Error;

/// Parameter validation failure.
#[derive(Debug, Error)]
pub enum ParamError {
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

/// Configuration document parse/validation failure.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Controller evaluation failure.
#[derive(Debug, Error)]
pub enum ControlError {
    #[error("degenerate oscillator voltage: |v| = {norm} V is below the floor {floor} V")]
    DegenerateVoltage { norm: f64, floor: f64 },
    #[error("undefined saturation direction: S0 = 0 (both power set-points are zero)")]
    ZeroSetpoint,
    #[error("singular network: total series impedance is zero")]
    SingularNetwork,
}

/// Integration failure.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("step size underflow at t = {t} (h = {h} < h_min = {h_min}); the problem may be stiff or singular here")]
    StepUnderflow {
        t: f64,
        h: f64,
        h_min: f64,
        last_state: Vec<f64>,
    },
    #[error("step budget exhausted: {max_steps} steps taken, integration reached t = {t}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("invalid integrator configuration: {0}")]
    BadConfig(String),
    #[error("right-hand side returned a non-finite derivative at t = {t}")]
    NonFiniteRhs { t: f64 },
    #[error("interpolation time {t} outside the trajectory span [{t0}, {t1}]")]
    OutOfSpan { t: f64, t0: f64, t1: f64 },
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Analysis-stage failure.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("surface resolution {0} is below the minimum of 16 per axis")]
    ResolutionTooLow(usize),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Control(#[from] ControlError),
}
