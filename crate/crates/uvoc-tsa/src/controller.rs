//! uVOC control law, current-reference generation, circular limiter, virtual
//! impedance filter, modulation voltage, and the fault-management state
//! machine with its gain schedule.
//!
//! The oscillator runs on αβ-frame peak quantities: the state `v` is the
//! space vector of the internal voltage in peak volts, currents are peak
//! amps. Gains follow the SI-consistent reading of the controller tables.

use crate::error::ControlError;
use crate::params::{ControlParams, ConverterParams, PerUnitBase, PuKind};
use crate::phasor::Phasor;

/// Real and reactive power set-points (SI watts / vars).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoints {
    pub p0: f64,
    pub q0: f64,
}

impl Setpoints {
    pub fn new(p0: f64, q0: f64) -> Self {
        Setpoints { p0, q0 }
    }

    /// Apparent-power magnitude √(P₀² + Q₀²).
    pub fn s0(&self) -> f64 {
        self.p0.hypot(self.q0)
    }
}

/// Fault-management latch and ramp signals.
///
/// `x_f` latches on over-current and clears on terminal-voltage recovery;
/// `x_r` tracks `x_f` upward instantly and ramps down linearly over `t_ramp`
/// after the latch clears.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultFsmState {
    pub x_f: bool,
    pub x_r: f64,
    /// Time of the latest x_f release, if a ramp-down is in progress or done.
    pub clear_time: Option<f64>,
}

impl Default for FaultFsmState {
    fn default() -> Self {
        Self::new()
    }
}

impl FaultFsmState {
    pub fn new() -> Self {
        FaultFsmState {
            x_f: false,
            x_r: 0.0,
            clear_time: None,
        }
    }

    /// x_r value at time `t` given the stored latch/ramp state. Piecewise
    /// linear and deterministic, so the continuous rhs may evaluate it at
    /// trial times without mutating the latch.
    pub fn x_r_at(&self, t: f64, t_ramp: f64) -> f64 {
        if self.x_f {
            return 1.0;
        }
        match self.clear_time {
            Some(tc) => (1.0 - (t - tc).max(0.0) / t_ramp).clamp(0.0, 1.0),
            None => self.x_r,
        }
    }
}

/// Resolved controller gains for one evaluation instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    /// Synchronization gain η = η₀(1 + x_r/τ_f).
    pub eta: f64,
    /// Magnitude-correction gain μ = (1 − x_r)·μ₀.
    pub mu: f64,
    /// Effective reactive set-point (SI var); boosted while x_f is latched.
    pub q0_eff: f64,
}

/// Current reference i₀ = 2(P₀ − jQ₀)v / (N‖v‖²) in peak amps.
pub fn current_reference(
    v: Phasor,
    sp: Setpoints,
    n_phases: u32,
    v_floor: f64,
) -> Result<Phasor, ControlError> {
    if sp.p0 == 0.0 && sp.q0 == 0.0 {
        return Ok(Phasor::ZERO);
    }
    let norm = v.norm();
    if norm < v_floor {
        return Err(ControlError::DegenerateVoltage {
            norm,
            floor: v_floor,
        });
    }
    let k = 2.0 / (n_phases as f64 * v.norm_sq());
    Ok((Phasor::new(sp.p0, -sp.q0) * v) * k)
}

/// Circular saturation: identity below `i_m_peak`, radial scaling above.
pub fn circular_limit(i0: Phasor, i_m_peak: f64) -> Phasor {
    let norm = i0.norm();
    if norm <= i_m_peak {
        i0
    } else {
        i0 * (i_m_peak / norm)
    }
}

/// Oscillator law: dv/dt = jω₀v + jη(i₀,sat − i) + μ(V̂₀² − ‖v‖²)v.
pub fn oscillator_rhs(
    v: Phasor,
    i_sat_ref: Phasor,
    i_meas: Phasor,
    gains: &Gains,
    conv: &ConverterParams,
) -> Phasor {
    let rot = v.rot90() * conv.omega0;
    let sync = (i_sat_ref - i_meas).rot90() * gains.eta;
    let vhat0_sq = conv.v0_peak * conv.v0_peak;
    let mag = v * (gains.mu * (vhat0_sq - v.norm_sq()));
    rot + sync + mag
}

/// Gain schedule and reactive boost.
///
/// While the over-current latch holds and the boost is enabled, the reactive
/// set-point is raised to Q₀ = √(S₀² − P₀²) with S₀ the configured
/// apparent-power target, so the full current capability supports the
/// terminal voltage.
pub fn gain_schedule(
    fsm: &FaultFsmState,
    ctrl: &ControlParams,
    sp: Setpoints,
    q0_boost_enabled: bool,
    base: &PerUnitBase,
) -> Gains {
    let eta = ctrl.eta0 * (1.0 + fsm.x_r / ctrl.tau_f);
    let mu = (1.0 - fsm.x_r) * ctrl.mu0;
    let q0_eff = if q0_boost_enabled && fsm.x_f {
        let s0 = base.pu_to_si(ctrl.q0_boost_s0_pu, PuKind::Power);
        (s0 * s0 - sp.p0 * sp.p0).max(0.0).sqrt()
    } else {
        sp.q0
    };
    Gains { eta, mu, q0_eff }
}

/// First-order virtual-impedance filter pair of the controller.
///
/// Branch R realizes `R_v0/(s/ω_b + 1)`, branch L realizes
/// `s·L_v0/(s/ω_b + 1)`. Both filters are updated regardless of operating
/// mode; only the inductive branch output is scaled by x_r.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VirtualImpedanceState {
    /// Resistive-branch state; equals the branch output (V).
    pub zv_r_state: Phasor,
    /// Inductive-branch low-pass state (A).
    pub zv_l_state: Phasor,
}

impl VirtualImpedanceState {
    /// Continuous-time state derivatives for a given measured current.
    pub fn derivatives(
        &self,
        i_meas: Phasor,
        ctrl: &ControlParams,
        base: &PerUnitBase,
    ) -> (Phasor, Phasor) {
        let rv0 = base.pu_to_si(ctrl.rv0_pu, PuKind::Impedance);
        let d_r = (i_meas * rv0 - self.zv_r_state) * ctrl.omega_b;
        let d_l = (i_meas - self.zv_l_state) * ctrl.omega_b;
        (d_r, d_l)
    }

    /// Voltage drop Z_v·i with the inductive branch scaled by `x_r`.
    ///
    /// `omega0` converts the per-unit reactance parameter L_v0 to henries.
    pub fn output(
        &self,
        i_meas: Phasor,
        x_r: f64,
        omega0: f64,
        ctrl: &ControlParams,
        base: &PerUnitBase,
    ) -> Phasor {
        let lv0 = base.pu_to_si(ctrl.lv0_pu, PuKind::Impedance) / omega0;
        // the L-branch output is ω_b·L_v0·(i − x_L), realizing s·L_v0/(s/ω_b+1)
        let y_l = (i_meas - self.zv_l_state) * (ctrl.omega_b * lv0);
        self.zv_r_state + y_l * x_r
    }

    /// Advances both filter states by `dt` with the trapezoidal rule and
    /// returns the drop at the end of the step. `i_prev`/`i_next` are the
    /// measured currents at the step ends.
    #[allow(clippy::too_many_arguments)]
    pub fn step_trapezoidal(
        &mut self,
        i_prev: Phasor,
        i_next: Phasor,
        dt: f64,
        x_r: f64,
        omega0: f64,
        ctrl: &ControlParams,
        base: &PerUnitBase,
    ) -> Phasor {
        let rv0 = base.pu_to_si(ctrl.rv0_pu, PuKind::Impedance);
        let a = ctrl.omega_b * dt / 2.0;
        // trapezoidal update of x' = ω_b(u − x): x+ = ((1−a)x + a(u_prev+u_next)) / (1+a)
        let upd = |x: Phasor, u_prev: Phasor, u_next: Phasor| -> Phasor {
            (x * (1.0 - a) + (u_prev + u_next) * a) / (1.0 + a)
        };
        self.zv_r_state = upd(self.zv_r_state, i_prev * rv0, i_next * rv0);
        self.zv_l_state = upd(self.zv_l_state, i_prev, i_next);
        self.output(i_next, x_r, omega0, ctrl, base)
    }
}

/// Full controller state: oscillator phasor, virtual-impedance filters, FSM.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Oscillator space vector (peak volts). Never at the origin.
    pub v: Phasor,
    pub zv: VirtualImpedanceState,
    pub fsm: FaultFsmState,
}

impl ControllerState {
    /// Initializes the oscillator at nominal magnitude and angle zero.
    pub fn at_nominal(conv: &ConverterParams) -> Self {
        ControllerState {
            v: Phasor::new(conv.v0_peak, 0.0),
            zv: VirtualImpedanceState::default(),
            fsm: FaultFsmState::new(),
        }
    }
}

/// Modulation voltage v_r = v + R₀,eff·(i₀,sat − i) − Z_v·i.
///
/// The active resistance acts only while the over-current latch holds.
pub fn modulation_voltage(
    v: Phasor,
    zv_drop: Phasor,
    i_sat_ref: Phasor,
    i_meas: Phasor,
    x_f: bool,
    ctrl: &ControlParams,
    base: &PerUnitBase,
) -> Phasor {
    let r0_eff = if x_f {
        base.pu_to_si(ctrl.r0_pu, PuKind::Impedance)
    } else {
        0.0
    };
    v + (i_sat_ref - i_meas) * r0_eff - zv_drop
}

/// Advances the fault FSM given the instantaneous space-vector norms.
///
/// Detection compares ‖i‖ against the peak-equivalent threshold √2·Î_T and
/// release compares ‖v_poc‖ against √2·V̂_T. Call times must be
/// non-decreasing.
pub fn fsm_update(
    fsm: &FaultFsmState,
    i_norm_peak: f64,
    v_poc_norm_peak: f64,
    t: f64,
    ctrl: &ControlParams,
    base: &PerUnitBase,
) -> FaultFsmState {
    let i_thresh_peak = std::f64::consts::SQRT_2 * base.pu_to_si(ctrl.i_thresh_pu, PuKind::Current);
    let v_thresh_peak = std::f64::consts::SQRT_2 * base.pu_to_si(ctrl.v_thresh_pu, PuKind::Voltage);
    let mut next = *fsm;
    // resolve the ramp first so releases in this very call restart it cleanly
    if !next.x_f {
        if let Some(tc) = next.clear_time {
            next.x_r = (1.0 - (t - tc).max(0.0) / ctrl.t_ramp).clamp(0.0, 1.0);
        }
    }
    if i_norm_peak > i_thresh_peak {
        next.x_f = true;
        next.x_r = 1.0;
        next.clear_time = None;
    }
    if next.x_f && v_poc_norm_peak > v_thresh_peak {
        next.x_f = false;
        next.clear_time = Some(t);
        next.x_r = 1.0;
    }
    next
}
