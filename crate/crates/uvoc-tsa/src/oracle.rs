//! Stationary-frame averaged simulation of the complete controller coupled to
//! the aggregated L–R network and Thevenin source.
//!
//! This is the independent cross-check for the reduced synchronous-frame
//! models: it integrates the oscillator law, current-reference saturation,
//! virtual-impedance filters and modulation voltage directly in the αβ frame
//! (PWM switching is averaged out), with the fault-management state machine
//! handled through event localization between integration segments.
//!
//! The physical plant is `L_p·di/dt = v_r − v_TH(t) − R_p·i`, where `L_p` and
//! `R_p` contain the filter and Thevenin elements only — the virtual branch
//! acts inside `v_r`.

use crate::controller::{
    circular_limit, current_reference, fsm_update, gain_schedule, modulation_voltage,
    oscillator_rhs, FaultFsmState, Setpoints, VirtualImpedanceState,
};
use crate::error::SolverError;
use crate::params::{
    thevenin_split, ControlParams, ConverterParams, GridThevenin, PerUnitBase, PuKind,
};
use crate::phasor::Phasor;
use crate::solver::{
    integrate, EventAction, EventDirection, EventSpec, IntegratorConfig, Termination, Trajectory,
};

/// Physical plant state: aggregated inductor current, αβ frame, peak amps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub i: Phasor,
}

/// Layout of the 8-dimensional αβ state vector.
///
/// `[v_re, v_im, i_re, i_im, zvr_re, zvr_im, zvl_re, zvl_im]`
pub const STATE_DIM: usize = 8;

fn unpack(y: &[f64]) -> (Phasor, Phasor, VirtualImpedanceState) {
    (
        Phasor::new(y[0], y[1]),
        Phasor::new(y[2], y[3]),
        VirtualImpedanceState {
            zv_r_state: Phasor::new(y[4], y[5]),
            zv_l_state: Phasor::new(y[6], y[7]),
        },
    )
}

/// Scenario-phase environment: which Thevenin source is active and which
/// discrete controller state is latched.
#[derive(Debug, Clone)]
pub struct OracleEnv<'a> {
    pub conv: &'a ConverterParams,
    pub ctrl: &'a ControlParams,
    pub base: &'a PerUnitBase,
    pub grid: GridThevenin,
    /// Base set-points (reactive boost applied on top while latched).
    pub sp: Setpoints,
    pub limiter_enabled: bool,
    pub q0_boost: bool,
    pub fsm_enabled: bool,
    /// Frozen latch state for this segment; x_r follows its ramp law in t.
    pub fsm: FaultFsmState,
}

impl<'a> OracleEnv<'a> {
    /// Thevenin source space vector at time t (peak volts).
    pub fn v_th_vec(&self, t: f64) -> Phasor {
        let mag = std::f64::consts::SQRT_2 * self.grid.v_th_pu * self.base.v_base;
        Phasor::from_polar(mag, self.grid.omega_g * t)
    }

    /// Physical series elements between v_r and the Thevenin source.
    fn plant_rl(&self) -> (f64, f64) {
        let (r_th_pu, x_th_pu) = thevenin_split(&self.grid);
        let zb = self.base.z_base;
        let r_p = (self.conv.r1_pu + self.conv.r2_pu + r_th_pu) * zb;
        let l_p = (self.conv.l1_pu + self.conv.l2_pu) * zb / self.conv.omega0
            + x_th_pu * zb / self.grid.omega_g;
        (r_p, l_p)
    }

    fn x_r_at(&self, t: f64) -> f64 {
        if self.fsm_enabled {
            self.fsm.x_r_at(t, self.ctrl.t_ramp)
        } else {
            0.0
        }
    }

    /// Point-of-coupling voltage v_poc = v_TH + Z_TH·i, phasor-consistent at
    /// the grid frequency.
    pub fn measure_vpoc(&self, t: f64, i: Phasor) -> Phasor {
        let (r_th_pu, x_th_pu) = thevenin_split(&self.grid);
        let z = Phasor::new(r_th_pu, x_th_pu) * self.base.z_base;
        self.v_th_vec(t) + z * i
    }

    /// Coupled controller + plant derivative.
    pub fn full_rhs(
        &self,
        t: f64,
        y: &[f64],
        dy: &mut [f64],
    ) -> Result<(), crate::error::ControlError> {
        let (v, i, zv) = unpack(y);
        let x_r = self.x_r_at(t);
        let fsm_now = FaultFsmState { x_r, ..self.fsm };
        let active_latch = self.fsm_enabled && self.fsm.x_f;
        let gains = gain_schedule(
            &fsm_now,
            self.ctrl,
            self.sp,
            self.q0_boost && self.fsm_enabled,
            self.base,
        );
        let sp_eff = Setpoints::new(self.sp.p0, gains.q0_eff);

        let i0 = current_reference(v, sp_eff, self.conv.n_phases, self.ctrl.v_floor)?;
        let i_m_peak =
            std::f64::consts::SQRT_2 * self.base.pu_to_si(self.ctrl.i_m_pu, PuKind::Current);
        let i0_sat = if self.limiter_enabled {
            circular_limit(i0, i_m_peak)
        } else {
            i0
        };

        let dv = oscillator_rhs(v, i0_sat, i, &gains, self.conv);
        let (dzr, dzl) = zv.derivatives(i, self.ctrl, self.base);
        let zv_out = zv.output(i, x_r, self.conv.omega0, self.ctrl, self.base);
        let v_r = modulation_voltage(v, zv_out, i0_sat, i, active_latch, self.ctrl, self.base);

        let (r_p, l_p) = self.plant_rl();
        let di = (v_r - self.v_th_vec(t) - i * r_p) / l_p;

        dy[0] = dv.re;
        dy[1] = dv.im;
        dy[2] = di.re;
        dy[3] = di.im;
        dy[4] = dzr.re;
        dy[5] = dzr.im;
        dy[6] = dzl.re;
        dy[7] = dzl.im;
        Ok(())
    }
}

/// One scheduled change of the Thevenin source.
#[derive(Debug, Clone, Copy)]
struct PhaseChange {
    t: f64,
    grid: GridThevenin,
}

/// Result of a full αβ run with the FSM timeline.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// FSM state changes as (time, state-after).
    pub fsm_timeline: Vec<(f64, FaultFsmState)>,
    pub termination: Termination,
}

impl OracleRun {
    pub fn final_state(&self) -> &[f64] {
        self.y.last().unwrap()
    }

    /// (V pu, δ rad, ‖i‖ pu, ‖v_poc‖ pu) at sample k, with δ = angle(v) − ω_g·t
    /// wrapped to (−π, π].
    pub fn sample_metrics(
        &self,
        k: usize,
        env_grid: &GridThevenin,
        base: &PerUnitBase,
    ) -> (f64, f64, f64, f64) {
        let y = &self.y[k];
        let t = self.t[k];
        let (v, i, _) = unpack(y);
        let v_pu = v.norm() / std::f64::consts::SQRT_2 / base.v_base;
        let raw = v.angle() - env_grid.omega_g * t;
        let delta = wrap_angle(raw);
        let i_pu = i.norm() / std::f64::consts::SQRT_2 / base.i_base;
        let (r_th_pu, x_th_pu) = thevenin_split(env_grid);
        let v_th = Phasor::from_polar(
            std::f64::consts::SQRT_2 * env_grid.v_th_pu * base.v_base,
            env_grid.omega_g * t,
        );
        let vpoc = v_th + Phasor::new(r_th_pu, x_th_pu) * base.z_base * i;
        let vpoc_pu = vpoc.norm() / std::f64::consts::SQRT_2 / base.v_base;
        (v_pu, delta, i_pu, vpoc_pu)
    }

    /// Largest ‖i‖ (pu) over samples with t in the given window.
    pub fn max_i_pu(&self, t_from: f64, t_to: f64, base: &PerUnitBase) -> f64 {
        let mut m: f64 = 0.0;
        for (k, &t) in self.t.iter().enumerate() {
            if t >= t_from && t <= t_to {
                let (_, i, _) = unpack(&self.y[k]);
                m = m.max(i.norm() / std::f64::consts::SQRT_2 / base.i_base);
            }
        }
        m
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Initializes the αβ state on the rotating steady state implied by a
/// synchronous-frame operating point (V RMS volts, δ rad, I_dq RMS amps).
pub fn init_steady(
    ctrl: &ControlParams,
    base: &PerUnitBase,
    grid: &GridThevenin,
    v_mag: f64,
    delta: f64,
    i_dq: Phasor,
) -> Vec<f64> {
    let s2 = std::f64::consts::SQRT_2;
    let v = Phasor::from_polar(s2 * v_mag, delta);
    let i = i_dq * s2;
    // filter steady state for rotating input u·e^{jωt}: X = ω_b/(jω + ω_b)·U
    let wb = ctrl.omega_b;
    let h = Phasor::new(wb, 0.0) / Phasor::new(wb, grid.omega_g);
    let rv0 = base.pu_to_si(ctrl.rv0_pu, PuKind::Impedance);
    let zvr = h * (i * rv0);
    let zvl = h * i;
    vec![v.re, v.im, i.re, i.im, zvr.re, zvr.im, zvl.re, zvl.im]
}

/// Drives a full αβ simulation through scheduled source steps and FSM events.
///
/// `phases` is the piecewise-constant source schedule starting at `t0`; the
/// FSM latch/release thresholds are localized by the integrator's event
/// machinery and applied between segments, never inside a trial step.
#[allow(clippy::too_many_arguments)]
pub struct OracleSim<'a> {
    pub conv: &'a ConverterParams,
    pub ctrl: &'a ControlParams,
    pub base: &'a PerUnitBase,
    pub sp: Setpoints,
    pub limiter_enabled: bool,
    pub q0_boost: bool,
    pub fsm_enabled: bool,
    pub config: IntegratorConfig,
}

impl<'a> OracleSim<'a> {
    pub fn run(
        &self,
        pre_fault: GridThevenin,
        fault: Option<(f64, GridThevenin)>,
        clear: Option<f64>,
        t_span: (f64, f64),
        y0: Vec<f64>,
    ) -> Result<OracleRun, SolverError> {
        let mut changes: Vec<PhaseChange> = Vec::new();
        if let Some((tf, g)) = fault {
            changes.push(PhaseChange { t: tf, grid: g });
            if let Some(tc) = clear {
                changes.push(PhaseChange {
                    t: tc,
                    grid: pre_fault,
                });
            }
        }

        let mut run = OracleRun {
            t: vec![t_span.0],
            y: vec![y0.clone()],
            fsm_timeline: Vec::new(),
            termination: Termination::ReachedEnd,
        };
        let mut fsm = FaultFsmState::new();
        let mut t = t_span.0;
        let mut y = y0;
        let mut grid = pre_fault;
        let mut change_idx = 0;

        while t < t_span.1 {
            while change_idx < changes.len() && changes[change_idx].t <= t + 1e-15 {
                grid = changes[change_idx].grid;
                change_idx += 1;
            }
            let seg_end = if change_idx < changes.len() {
                changes[change_idx].t.min(t_span.1)
            } else {
                t_span.1
            };
            if seg_end <= t + 1e-15 {
                t = seg_end;
                continue;
            }

            let env = OracleEnv {
                conv: self.conv,
                ctrl: self.ctrl,
                base: self.base,
                grid,
                sp: self.sp,
                limiter_enabled: self.limiter_enabled,
                q0_boost: self.q0_boost,
                fsm_enabled: self.fsm_enabled,
                fsm,
            };

            // apply the FSM to the segment-start state (covers "already above
            // threshold" situations the crossing detector cannot see)
            if self.fsm_enabled {
                let (_, i, _) = unpack(&y);
                let vpoc = env.measure_vpoc(t, i).norm();
                let next = fsm_update(&fsm, i.norm(), vpoc, t, self.ctrl, self.base);
                let next = FaultFsmState {
                    x_r: next.x_r_at(t, self.ctrl.t_ramp),
                    ..next
                };
                if next != fsm {
                    fsm = next;
                    run.fsm_timeline.push((t, fsm));
                    continue; // rebuild env with the new latch state
                }
            }

            let mut events: Vec<EventSpec> = Vec::new();
            if self.fsm_enabled {
                let i_thr = std::f64::consts::SQRT_2
                    * self.base.pu_to_si(self.ctrl.i_thresh_pu, PuKind::Current);
                let v_thr = std::f64::consts::SQRT_2
                    * self.base.pu_to_si(self.ctrl.v_thresh_pu, PuKind::Voltage);
                if !fsm.x_f {
                    events.push(EventSpec::new(
                        move |_t: f64, y: &[f64]| Phasor::new(y[2], y[3]).norm() - i_thr,
                        EventDirection::Rising,
                        EventAction::ModeSwitch,
                        "overcurrent",
                    ));
                } else {
                    let env_probe = env.clone();
                    events.push(EventSpec::new(
                        move |t: f64, y: &[f64]| {
                            env_probe.measure_vpoc(t, Phasor::new(y[2], y[3])).norm() - v_thr
                        },
                        EventDirection::Rising,
                        EventAction::ModeSwitch,
                        "voltage-recovery",
                    ));
                }
                if let Some(tc) = fsm.clear_time {
                    if !fsm.x_f && fsm.x_r_at(t, self.ctrl.t_ramp) > 0.0 {
                        let t_done = tc + self.ctrl.t_ramp;
                        events.push(EventSpec::new(
                            move |t: f64, _y: &[f64]| t - t_done,
                            EventDirection::Rising,
                            EventAction::ModeSwitch,
                            "ramp-complete",
                        ));
                    }
                }
            }

            let env_rhs = env.clone();
            let traj: Trajectory = integrate(
                |tt, yy, dyy| env_rhs.full_rhs(tt, yy, dyy),
                &y,
                (t, seg_end),
                &self.config,
                &events,
            )?;

            for (k, tk) in traj.t.iter().enumerate().skip(1) {
                run.t.push(*tk);
                run.y.push(traj.y[k].clone());
            }

            t = traj.t_final();
            y = traj.final_state().to_vec();

            match &traj.termination {
                Termination::ReachedEnd => {}
                Termination::Event { .. } => {
                    let (_, i, _) = unpack(&y);
                    let vpoc = env.measure_vpoc(t, i).norm();
                    let next = fsm_update(&fsm, i.norm(), vpoc, t, self.ctrl, self.base);
                    // materialize the ramp value so the snapshot comparison is meaningful
                    let next = FaultFsmState {
                        x_r: next.x_r_at(t, self.ctrl.t_ramp),
                        ..next
                    };
                    fsm = next;
                    run.fsm_timeline.push((t, fsm));
                }
                other => {
                    run.termination = other.clone();
                    return Ok(run);
                }
            }
        }
        run.termination = Termination::ReachedEnd;
        Ok(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ControlParams, ConverterParams, GridThevenin, PerUnitBase};
    use crate::reduced::NetworkAggregate;

    fn setup() -> (ConverterParams, ControlParams, PerUnitBase, GridThevenin) {
        let conv = ConverterParams::default_three_phase();
        let ctrl = ControlParams::default_table();
        let base = PerUnitBase::from_converter(&conv);
        let grid = GridThevenin::default_case_grid();
        (conv, ctrl, base, grid)
    }

    #[test]
    fn vpoc_trivial_cases() {
        let (conv, ctrl, base, grid) = setup();
        let env = OracleEnv {
            conv: &conv,
            ctrl: &ctrl,
            base: &base,
            grid,
            sp: Setpoints::new(0.0, 0.0),
            limiter_enabled: true,
            q0_boost: false,
            fsm_enabled: true,
            fsm: FaultFsmState::new(),
        };
        // i = 0 → v_poc = v_TH
        let vpoc = env.measure_vpoc(0.123, Phasor::ZERO);
        assert!((vpoc - env.v_th_vec(0.123)).norm() < 1e-12);
        // z_th = 0 → v_poc = v_TH for any current
        let mut stiff = grid;
        stiff.z_th_mag_pu = 0.0;
        let env2 = OracleEnv {
            grid: stiff,
            ..env.clone()
        };
        let vpoc = env2.measure_vpoc(0.4, Phasor::new(30.0, -4.0));
        assert!((vpoc - env2.v_th_vec(0.4)).norm() < 1e-12);
    }

    #[test]
    fn zero_forcing_zero_derivative() {
        // zero grid impedance, v aligned with v_TH at nominal, zero current and
        // matched magnitude: the plant sees no net drive
        let (conv, ctrl, base, _) = setup();
        let grid = GridThevenin {
            z_th_mag_pu: 1e-9,
            ..GridThevenin::default_case_grid()
        };
        let env = OracleEnv {
            conv: &conv,
            ctrl: &ctrl,
            base: &base,
            grid,
            sp: Setpoints::new(0.0, 0.0),
            limiter_enabled: true,
            q0_boost: false,
            fsm_enabled: false,
            fsm: FaultFsmState::new(),
        };
        let y = init_steady(&ctrl, &base, &grid, base.v_base, 0.0, Phasor::ZERO);
        let mut dy = vec![0.0; STATE_DIM];
        env.full_rhs(0.0, &y, &mut dy).unwrap();
        // di/dt = 0 (no forcing), dv/dt = pure rotation
        assert!(dy[2].abs() < 1e-6);
        assert!(dy[3].abs() < 1e-6);
        let v = Phasor::new(y[0], y[1]);
        let dv = Phasor::new(dy[0], dy[1]);
        assert!((dv - v.rot90() * conv.omega0).norm() < 1e-6 * v.norm() * conv.omega0);
    }

    #[test]
    fn steady_init_stays_steady() {
        // start on a pre-solved equilibrium and check the state magnitudes
        // stay constant in rotating coordinates over a run
        let (conv, ctrl, base, grid) = setup();
        // Case I pre-fault equilibrium, solved independently (scipy fsolve on
        // the same algebra): V=1.000800540 pu, δ=0.069070212 rad
        let v_mag = 1.000800540 * base.v_base;
        let delta = 0.069070212;
        let net = NetworkAggregate::build(&conv, &ctrl, &base, &grid, 0.0);
        let i = crate::reduced::steady_current(
            v_mag,
            delta,
            crate::reduced::OperatingMode::Unconstrained,
            Setpoints::new(950.0, 0.0),
            grid.v_th_pu * base.v_base,
            &net,
            0.0,
            base.pu_to_si(ctrl.i_m_pu, PuKind::Current),
        )
        .unwrap();
        let y0 = init_steady(&ctrl, &base, &grid, v_mag, delta, i);
        let sim = OracleSim {
            conv: &conv,
            ctrl: &ctrl,
            base: &base,
            sp: Setpoints::new(950.0, 0.0),
            limiter_enabled: true,
            q0_boost: false,
            fsm_enabled: true,
            config: IntegratorConfig {
                rtol: 1e-8,
                atol: 1e-10,
                ..Default::default()
            },
        };
        let run = sim.run(grid, None, None, (0.0, 0.5), y0).unwrap();
        assert_eq!(run.termination, Termination::ReachedEnd);
        let (v0_pu, d0, i0_pu, _) = run.sample_metrics(0, &grid, &base);
        let (v1_pu, d1, i1_pu, _) = run.sample_metrics(run.t.len() - 1, &grid, &base);
        assert!((v1_pu - v0_pu).abs() < 2e-4, "V drifted {v0_pu} -> {v1_pu}");
        assert!((d1 - d0).abs() < 2e-3, "delta drifted {d0} -> {d1}");
        assert!((i1_pu - i0_pu).abs() < 2e-3, "i drifted {i0_pu} -> {i1_pu}");
    }
}
