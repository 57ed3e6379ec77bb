//! Synchronous-frame reduced-order dynamics.
//!
//! The frame rotates at the grid frequency ω_g and is aligned with the
//! Thevenin source, so the converter voltage phasor is `V·e^{jδ}` with V the
//! L-N RMS magnitude and δ the power angle. Two operating modes are covered:
//!
//! * **Unconstrained** — magnitude correction active, current reference
//!   unsaturated; voltage/angle dynamics plus a 2×2 linear current model.
//! * **Constrained** — reference saturated on the I_m circle, magnitude
//!   correction off, active resistance and virtual inductor in the loop.
//!
//! Each mode offers a quasi-static algebraic (P, Q) or a dynamic two-state
//! current model; the two agree exactly at the current steady state.
//!
//! In constrained mode the effective series resistance includes the active
//! resistance R₀ (it acts on −i inside the modulation voltage); the saturated
//! reference contributes the +R₀·i₀ forcing. At any true equilibrium the
//! measured current equals the reference and the two R₀ contributions cancel,
//! which keeps the reduced equilibria consistent with the full αβ model.

use crate::controller::Setpoints;
use crate::error::ControlError;
use crate::params::{
    thevenin_split, ControlParams, ConverterParams, GridThevenin, PerUnitBase, PuKind,
};
use crate::phasor::Phasor;

/// Operating regime of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatingMode {
    Unconstrained,
    Constrained,
}

/// Fidelity of the converter current representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentModel {
    /// Algebraic (P, Q) from the current steady state at each (V, δ).
    QuasiStatic,
    /// Two additional synchronous-frame current states.
    Dynamic,
}

/// Power-reference convention of the constrained voltage/angle dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetpointScaling {
    /// References scale with the voltage magnitude: N·V·I_m·P₀/S₀ (default).
    VoltageScaled,
    /// Fixed references P₀, Q₀. This is the convention that reproduces the
    /// published benchmark limit-cycle period.
    Fixed,
}

/// Model selection bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelMode {
    pub mode: OperatingMode,
    pub current_model: CurrentModel,
    pub scaling: SetpointScaling,
}

impl ModelMode {
    pub fn unconstrained(current_model: CurrentModel) -> Self {
        ModelMode {
            mode: OperatingMode::Unconstrained,
            current_model,
            scaling: SetpointScaling::VoltageScaled,
        }
    }

    pub fn constrained(current_model: CurrentModel) -> Self {
        ModelMode {
            mode: OperatingMode::Constrained,
            current_model,
            scaling: SetpointScaling::VoltageScaled,
        }
    }
}

/// Reduced synchronous-frame state.
///
/// `i_d`/`i_q` are meaningful only for the dynamic current model; the
/// quasi-static variant carries the two oscillator states alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    /// L-N RMS voltage magnitude (V).
    pub v_mag: f64,
    /// Power angle (rad).
    pub delta: f64,
    /// Synchronous-frame RMS current components (A).
    pub i_d: f64,
    pub i_q: f64,
}

/// Aggregated series network between the oscillator voltage and the Thevenin
/// source: R_e = R_v + R_1 + R_2 + R_TH, L_e = L_v + L_1 + L_2 + L_TH.
///
/// The active resistance is *not* part of this aggregate; constrained-mode
/// operations add it where it acts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkAggregate {
    /// Equivalent resistance (Ω).
    pub r_e: f64,
    /// Equivalent inductance (H).
    pub l_e: f64,
    /// Equivalent reactance ω_g·L_e (Ω).
    pub x_e: f64,
}

impl NetworkAggregate {
    /// Builds the aggregate for a given ramp signal value (the virtual
    /// inductor branch scales with x_r). Must be rebuilt whenever x_r changes.
    pub fn build(
        conv: &ConverterParams,
        ctrl: &ControlParams,
        base: &PerUnitBase,
        grid: &GridThevenin,
        x_r: f64,
    ) -> Self {
        let (r_th_pu, x_th_pu) = thevenin_split(grid);
        let (r_v, l_v) = effective_virtual_impedance(ctrl, conv, base, x_r);
        let zb = base.z_base;
        let r_e = r_v + (conv.r1_pu + conv.r2_pu + r_th_pu) * zb;
        let l_e = l_v + (conv.l1_pu + conv.l2_pu) * zb / conv.omega0 + x_th_pu * zb / grid.omega_g;
        NetworkAggregate {
            r_e,
            l_e,
            x_e: grid.omega_g * l_e,
        }
    }
}

/// Effective virtual impedance at the nominal frequency:
/// r_v = Re{Z_v(jω₀)}, l_v = Im{Z_v(jω₀)}/ω₀, inductive branch scaled by x_r.
/// Returns SI (Ω, H).
pub fn effective_virtual_impedance(
    ctrl: &ControlParams,
    conv: &ConverterParams,
    base: &PerUnitBase,
    x_r: f64,
) -> (f64, f64) {
    let rv0 = base.pu_to_si(ctrl.rv0_pu, PuKind::Impedance);
    let x_lv0 = base.pu_to_si(ctrl.lv0_pu, PuKind::Impedance); // reactance at ω₀
    let r = conv.omega0 / ctrl.omega_b;
    let denom = 1.0 + r * r;
    let r_v = (rv0 + x_r * x_lv0 * r) / denom;
    let x_v = (x_r * x_lv0 - rv0 * r) / denom;
    (r_v, x_v / conv.omega0)
}

/// Largest reachable terminal-voltage magnitude under a current limit:
/// v_max = v_th + z_th·i_lim (all per-unit).
pub fn feasibility_bound(v_th_pu: f64, z_th_mag_pu: f64, i_lim_pu: f64) -> f64 {
    v_th_pu + z_th_mag_pu * i_lim_pu
}

/// Quasi-static power flow of the unconstrained mode.
///
/// `v_th` is the Thevenin source magnitude in SI RMS volts.
pub fn quasi_static_pq_unconstrained(
    v_mag: f64,
    delta: f64,
    v_th: f64,
    net: &NetworkAggregate,
    n_phases: u32,
) -> Result<(f64, f64), ControlError> {
    pq_algebraic(v_mag, delta, v_th, net.r_e, net.x_e, 0.0, 0.0, n_phases)
}

/// Quasi-static power flow of the constrained mode, including the saturated
/// reference forcing. The series resistance is R_e + R₀.
#[allow(clippy::too_many_arguments)]
pub fn quasi_static_pq_constrained(
    v_mag: f64,
    delta: f64,
    sp: Setpoints,
    v_th: f64,
    net: &NetworkAggregate,
    r0: f64,
    i_m: f64,
    n_phases: u32,
) -> Result<(f64, f64), ControlError> {
    let s0 = sp.s0();
    if s0 == 0.0 {
        return Err(ControlError::ZeroSetpoint);
    }
    pq_algebraic(
        v_mag,
        delta,
        v_th,
        net.r_e + r0,
        net.x_e,
        r0 * i_m / s0 * sp.p0,
        r0 * i_m / s0 * sp.q0,
        n_phases,
    )
}

/// Shared algebraic form:
/// P = N[V²R − V·V_TH(Rc − Xs) + V(R·fp − X·fq)]/(R²+X²)
/// Q = N[V²X − V·V_TH(Xc + Rs) + V(X·fp + R·fq)]/(R²+X²)
/// with (fp, fq) = R₀·I_m/S₀·(P₀, Q₀) in the constrained case.
#[allow(clippy::too_many_arguments)]
fn pq_algebraic(
    v_mag: f64,
    delta: f64,
    v_th: f64,
    r: f64,
    x: f64,
    fp: f64,
    fq: f64,
    n_phases: u32,
) -> Result<(f64, f64), ControlError> {
    let d = r * r + x * x;
    if d == 0.0 {
        return Err(ControlError::SingularNetwork);
    }
    let n = n_phases as f64;
    let (s, c) = delta.sin_cos();
    let p =
        n * (v_mag * v_mag * r - v_mag * v_th * (r * c - x * s) + v_mag * (r * fp - x * fq)) / d;
    let q =
        n * (v_mag * v_mag * x - v_mag * v_th * (x * c + r * s) + v_mag * (x * fp + r * fq)) / d;
    Ok((p, q))
}

/// Saturated current reference in the synchronous frame (RMS components):
/// (I_d0, I_q0) = I_m/S₀ · (P₀cosδ + Q₀sinδ, P₀sinδ − Q₀cosδ).
pub fn saturated_reference_dq(
    delta: f64,
    sp: Setpoints,
    i_m: f64,
) -> Result<(f64, f64), ControlError> {
    let s0 = sp.s0();
    if s0 == 0.0 {
        return Err(ControlError::ZeroSetpoint);
    }
    let (s, c) = delta.sin_cos();
    Ok((
        i_m / s0 * (sp.p0 * c + sp.q0 * s),
        i_m / s0 * (sp.p0 * s - sp.q0 * c),
    ))
}

/// Converter current dynamics in the synchronous frame.
///
/// Unconstrained: İ = A·I + [Vcosδ − V_TH, Vsinδ]/L_e with series R_e.
/// Constrained: series R_e + R₀ and the saturated-reference forcing
/// +R₀·(I_d0, I_q0).
#[allow(clippy::too_many_arguments)]
pub fn rhs_current_dynamic(
    state: &ReducedState,
    mode: OperatingMode,
    sp: Setpoints,
    v_th: f64,
    omega_g: f64,
    net: &NetworkAggregate,
    r0: f64,
    i_m: f64,
) -> Result<(f64, f64), ControlError> {
    let (s, c) = state.delta.sin_cos();
    let (r_series, f_d, f_q) = match mode {
        OperatingMode::Unconstrained => (net.r_e, 0.0, 0.0),
        OperatingMode::Constrained => {
            let (id0, iq0) = saturated_reference_dq(state.delta, sp, i_m)?;
            (net.r_e + r0, r0 * id0, r0 * iq0)
        }
    };
    let le = net.l_e;
    let did =
        -(r_series / le) * state.i_d + omega_g * state.i_q + (state.v_mag * c + f_d - v_th) / le;
    let diq = -omega_g * state.i_d - (r_series / le) * state.i_q + (state.v_mag * s + f_q) / le;
    Ok((did, diq))
}

/// Algebraic steady state of the current model (İ_d = İ_q = 0), as a complex
/// RMS phasor I_d + jI_q.
#[allow(clippy::too_many_arguments)]
pub fn steady_current(
    v_mag: f64,
    delta: f64,
    mode: OperatingMode,
    sp: Setpoints,
    v_th: f64,
    net: &NetworkAggregate,
    r0: f64,
    i_m: f64,
) -> Result<Phasor, ControlError> {
    let v = Phasor::from_polar(v_mag, delta);
    let (z, forcing) = match mode {
        OperatingMode::Unconstrained => (Phasor::new(net.r_e, net.x_e), Phasor::ZERO),
        OperatingMode::Constrained => {
            let (id0, iq0) = saturated_reference_dq(delta, sp, i_m)?;
            (
                Phasor::new(net.r_e + r0, net.x_e),
                Phasor::new(id0, iq0) * r0,
            )
        }
    };
    if z.norm_sq() == 0.0 {
        return Err(ControlError::SingularNetwork);
    }
    Ok((v + forcing - Phasor::new(v_th, 0.0)) / z)
}

/// Instantaneous powers from synchronous-frame quantities:
/// P = N(V_d I_d + V_q I_q), Q = N(V_q I_d − V_d I_q).
pub fn pq_from_current(v_mag: f64, delta: f64, i_d: f64, i_q: f64, n_phases: u32) -> (f64, f64) {
    let (s, c) = delta.sin_cos();
    let (vd, vq) = (v_mag * c, v_mag * s);
    let n = n_phases as f64;
    (n * (vd * i_d + vq * i_q), n * (vq * i_d - vd * i_q))
}

/// Everything fixed over one evaluation of the reduced right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct ReducedEnv<'a> {
    pub conv: &'a ConverterParams,
    pub base: &'a PerUnitBase,
    /// Thevenin source magnitude (SI RMS volts).
    pub v_th: f64,
    pub omega_g: f64,
    pub net: NetworkAggregate,
    /// Active resistance in SI ohms (constrained-mode operations only).
    pub r0: f64,
    /// Current limit in SI RMS amps.
    pub i_m: f64,
    /// Synchronization gain η for this instant.
    pub eta: f64,
    /// Magnitude-correction gain μ for this instant.
    pub mu: f64,
    /// Effective set-points (reactive possibly boosted).
    pub sp: Setpoints,
    /// Voltage floor below which evaluation reports collapse (SI RMS volts).
    pub v_floor: f64,
}

impl<'a> ReducedEnv<'a> {
    /// Voltage/angle derivatives of the unconstrained mode.
    ///
    /// V̇ = 2μV(V₀² − V²) + η(Q₀ − Q)/(NV), δ̇ = ω₀ − ω_g + η(P₀ − P)/(NV²).
    pub fn rhs_unconstrained(
        &self,
        state: &ReducedState,
        current_model: CurrentModel,
    ) -> Result<(f64, f64), ControlError> {
        self.check_floor(state.v_mag)?;
        let n = self.conv.n_phases;
        let (p, q) = match current_model {
            CurrentModel::QuasiStatic => {
                quasi_static_pq_unconstrained(state.v_mag, state.delta, self.v_th, &self.net, n)?
            }
            CurrentModel::Dynamic => {
                pq_from_current(state.v_mag, state.delta, state.i_d, state.i_q, n)
            }
        };
        Ok(self.droop_form(state, p, q, self.sp.p0, self.sp.q0))
    }

    /// Voltage/angle derivatives of the constrained mode.
    ///
    /// With voltage-scaled references: V̇ = η(NVI_mQ₀/S₀ − Q)/(NV),
    /// δ̇ = ω₀ − ω_g + η(NVI_mP₀/S₀ − P)/(NV²). With fixed references the
    /// unscaled (P₀, Q₀) are used instead.
    pub fn rhs_constrained(
        &self,
        state: &ReducedState,
        current_model: CurrentModel,
        scaling: SetpointScaling,
    ) -> Result<(f64, f64), ControlError> {
        self.check_floor(state.v_mag)?;
        let s0 = self.sp.s0();
        if s0 == 0.0 {
            return Err(ControlError::ZeroSetpoint);
        }
        let n = self.conv.n_phases;
        let (p, q) = match current_model {
            CurrentModel::QuasiStatic => quasi_static_pq_constrained(
                state.v_mag,
                state.delta,
                self.sp,
                self.v_th,
                &self.net,
                self.r0,
                self.i_m,
                n,
            )?,
            CurrentModel::Dynamic => {
                pq_from_current(state.v_mag, state.delta, state.i_d, state.i_q, n)
            }
        };
        let (p_ref, q_ref) = match scaling {
            SetpointScaling::VoltageScaled => {
                let k = n as f64 * state.v_mag * self.i_m / s0;
                (k * self.sp.p0, k * self.sp.q0)
            }
            SetpointScaling::Fixed => (self.sp.p0, self.sp.q0),
        };
        Ok(self.droop_form(state, p, q, p_ref, q_ref))
    }

    /// Full derivative for the selected model mode, packing (V̇, δ̇[, İ_d, İ_q]).
    pub fn rhs(&self, mode: ModelMode, y: &[f64], dy: &mut [f64]) -> Result<(), ControlError> {
        let state = ReducedState {
            v_mag: y[0],
            delta: y[1],
            i_d: if y.len() > 2 { y[2] } else { 0.0 },
            i_q: if y.len() > 3 { y[3] } else { 0.0 },
        };
        let (dv, dd) = match mode.mode {
            OperatingMode::Unconstrained => self.rhs_unconstrained(&state, mode.current_model)?,
            OperatingMode::Constrained => {
                self.rhs_constrained(&state, mode.current_model, mode.scaling)?
            }
        };
        dy[0] = dv;
        dy[1] = dd;
        if mode.current_model == CurrentModel::Dynamic {
            let (did, diq) = rhs_current_dynamic(
                &state,
                mode.mode,
                self.sp,
                self.v_th,
                self.omega_g,
                &self.net,
                self.r0,
                self.i_m,
            )?;
            dy[2] = did;
            dy[3] = diq;
        }
        Ok(())
    }

    fn droop_form(
        &self,
        state: &ReducedState,
        p: f64,
        q: f64,
        p_ref: f64,
        q_ref: f64,
    ) -> (f64, f64) {
        let n = self.conv.n_phases as f64;
        let v = state.v_mag;
        let v0 = self.base.v_base;
        let dv = 2.0 * self.mu * v * (v0 * v0 - v * v) + self.eta * (q_ref - q) / (n * v);
        let dd = self.conv.omega0 - self.omega_g + self.eta * (p_ref - p) / (n * v * v);
        (dv, dd)
    }

    fn check_floor(&self, v_mag: f64) -> Result<(), ControlError> {
        if v_mag < self.v_floor {
            return Err(ControlError::DegenerateVoltage {
                norm: v_mag,
                floor: self.v_floor,
            });
        }
        Ok(())
    }
}
