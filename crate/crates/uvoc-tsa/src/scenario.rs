//! Scenario definitions, the reduced-trajectory driver with fault-management
//! mode switching, and the end-to-end run orchestration.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    detect_limit_cycle, find_equilibria, sample_surfaces, CycleConfig, CycleOutcome, Equilibrium,
    PlaneDomain, PlaneModel, StabilityKind, SurfaceGrid,
};
use crate::controller::{fsm_update, gain_schedule, FaultFsmState, Setpoints};
use crate::error::{AnalysisError, ControlError};
use crate::export;
use crate::oracle::wrap_angle;
use crate::params::{
    thevenin_split, ControlParams, ConverterParams, GridThevenin, PerUnitBase, PuKind,
};
use crate::phasor::Phasor;
use crate::reduced::{
    steady_current, CurrentModel, ModelMode, NetworkAggregate, OperatingMode, ReducedEnv,
    SetpointScaling,
};
use crate::solver::{
    integrate, EventAction, EventDirection, EventSpec, IntegratorConfig, Termination,
};

/// A fault ride-through study: grid phases, timing, set-points, and toggles.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub pre_fault: GridThevenin,
    pub fault: GridThevenin,
    /// Source step time (s).
    pub fault_time: f64,
    /// Source restoration time (s), if the fault clears within the run.
    pub clear_time: Option<f64>,
    pub t_end: f64,
    pub p0_pu: f64,
    pub q0_pu: f64,
    pub limiter_enabled: bool,
    pub fsm_enabled: bool,
    pub q0_boost: bool,
    /// Analysis-phase model selection.
    pub model: ModelMode,
}

impl Scenario {
    pub fn setpoints(&self, base: &PerUnitBase) -> Setpoints {
        Setpoints::new(
            base.pu_to_si(self.p0_pu, PuKind::Power),
            base.pu_to_si(self.q0_pu, PuKind::Power),
        )
    }

    pub fn validate(&self) -> Result<(), crate::error::ParamError> {
        use crate::error::ParamError;
        if let Some(tc) = self.clear_time {
            if self.fault_time >= tc || !tc.is_finite() {
                return Err(ParamError::Invalid {
                    field: "clear_time".into(),
                    reason: format!(
                        "fault_time ({}) must precede clear_time ({tc})",
                        self.fault_time
                    ),
                });
            }
        }
        if self.t_end <= self.fault_time || !self.t_end.is_finite() {
            return Err(ParamError::Invalid {
                field: "t_end".into(),
                reason: "t_end must lie beyond fault_time".into(),
            });
        }
        if !self.fault_time.is_finite() || self.fault_time < 0.0 {
            return Err(ParamError::Invalid {
                field: "fault_time".into(),
                reason: "fault_time must be non-negative".into(),
            });
        }
        Ok(())
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["case1", "case2-unprotected", "case2-protected", "case3"]
    }

    /// The four canonical fault studies.
    ///
    /// `case1` is current-unconstrained: 0.52 pu grid (X/R 20), source sag
    /// 1 → 0.6 pu. Its real-power set-point is 950 W — 0.38 pu on the
    /// single-phase 2.5 kW rating — which reproduces the benchmark fault
    /// steady state (‖i‖ ≈ 0.63 pu, ‖v_poc‖ ≈ 0.92 pu); 0.38 pu on the
    /// three-phase base is geometrically incompatible with that pair.
    pub fn builtin(name: &str) -> Option<Scenario> {
        let nominal_52 = GridThevenin {
            v_th_pu: 1.0,
            z_th_mag_pu: 0.52,
            ..GridThevenin::default_case_grid()
        };
        let nominal_01 = GridThevenin {
            z_th_mag_pu: 0.1,
            ..nominal_52
        };
        match name {
            "case1" => Some(Scenario {
                name: name.into(),
                pre_fault: nominal_52,
                fault: GridThevenin {
                    v_th_pu: 0.6,
                    ..nominal_52
                },
                fault_time: 0.25,
                clear_time: None,
                t_end: 4.25,
                p0_pu: 950.0 / 7500.0,
                q0_pu: 0.0,
                limiter_enabled: true,
                fsm_enabled: true,
                q0_boost: false,
                model: ModelMode::unconstrained(CurrentModel::Dynamic),
            }),
            "case2-unprotected" => Some(Scenario {
                name: name.into(),
                pre_fault: nominal_01,
                fault: GridThevenin {
                    v_th_pu: 0.5,
                    ..nominal_01
                },
                fault_time: 0.25,
                clear_time: None,
                t_end: 3.25,
                p0_pu: 0.27,
                q0_pu: 0.0,
                limiter_enabled: false,
                fsm_enabled: false,
                q0_boost: false,
                model: ModelMode::unconstrained(CurrentModel::Dynamic),
            }),
            "case2-protected" => Some(Scenario {
                name: name.into(),
                pre_fault: nominal_01,
                fault: GridThevenin {
                    v_th_pu: 0.5,
                    ..nominal_01
                },
                fault_time: 0.25,
                clear_time: None,
                t_end: 2.75,
                p0_pu: 0.27,
                q0_pu: 0.0,
                limiter_enabled: true,
                fsm_enabled: true,
                q0_boost: true,
                model: ModelMode::constrained(CurrentModel::Dynamic),
            }),
            // The clear instant lands on the cycle phase with the smallest
            // re-entry current (wrapped δ near zero, voltage rising). With
            // the default thresholds the recovery still chatters between the
            // over-current latch and the voltage release while the gain ramp
            // unwinds; the run report flags it (see the warning text for the
            // parameter changes that restore a clean recovery).
            "case3" => Some(Scenario {
                name: name.into(),
                pre_fault: nominal_52,
                fault: GridThevenin {
                    v_th_pu: 0.5,
                    ..nominal_52
                },
                fault_time: 0.25,
                clear_time: Some(2.65),
                t_end: 5.5,
                p0_pu: 0.8,
                q0_pu: 0.0,
                limiter_enabled: true,
                fsm_enabled: true,
                q0_boost: true,
                model: ModelMode::constrained(CurrentModel::Dynamic),
            }),
            _ => None,
        }
    }

    /// Plane model for one phase of the scenario.
    ///
    /// The constrained phase model carries the latched gain schedule (boosted
    /// η, μ = 0, reactive boost if enabled); the unconstrained model carries
    /// the normal gains.
    pub fn phase_env<'a>(
        &self,
        phase: Phase,
        conv: &'a ConverterParams,
        ctrl: &'a ControlParams,
        base: &'a PerUnitBase,
    ) -> (ReducedEnv<'a>, ModelMode) {
        let grid = match phase {
            Phase::PreFault => self.pre_fault,
            Phase::Fault => self.fault,
        };
        let constrained = matches!(phase, Phase::Fault)
            && self.model.mode == OperatingMode::Constrained
            && self.limiter_enabled
            && self.fsm_enabled;
        let fsm = if constrained {
            FaultFsmState {
                x_f: true,
                x_r: 1.0,
                clear_time: None,
            }
        } else {
            FaultFsmState::new()
        };
        let sp_base = self.setpoints(base);
        let gains = gain_schedule(&fsm, ctrl, sp_base, self.q0_boost, base);
        let env = ReducedEnv {
            conv,
            base,
            v_th: grid.v_th_pu * base.v_base,
            omega_g: grid.omega_g,
            net: NetworkAggregate::build(conv, ctrl, base, &grid, fsm.x_r),
            r0: base.pu_to_si(ctrl.r0_pu, PuKind::Impedance),
            i_m: base.pu_to_si(ctrl.i_m_pu, PuKind::Current),
            eta: gains.eta,
            mu: gains.mu,
            sp: Setpoints::new(sp_base.p0, gains.q0_eff),
            v_floor: 0.01 * base.v_base,
        };
        let mode = if constrained {
            ModelMode {
                mode: OperatingMode::Constrained,
                ..self.model
            }
        } else {
            ModelMode {
                mode: OperatingMode::Unconstrained,
                ..self.model
            }
        };
        (env, mode)
    }
}

/// Scenario phase selector for surfaces and equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    PreFault,
    Fault,
}

/// Reduced 4-state trajectory with the fault-management timeline.
#[derive(Debug, Clone)]
pub struct ReducedRun {
    /// Sample times.
    pub t: Vec<f64>,
    /// States `[V (SI RMS), δ (rad), I_d, I_q (SI RMS)]`.
    pub y: Vec<Vec<f64>>,
    pub fsm_timeline: Vec<(f64, FaultFsmState)>,
    pub termination: Termination,
}

impl ReducedRun {
    /// (V pu, δ, ‖i‖ pu, ‖v_poc‖ pu) at a sample, for a given grid phase.
    pub fn sample_metrics(
        &self,
        k: usize,
        grid: &GridThevenin,
        base: &PerUnitBase,
    ) -> (f64, f64, f64, f64) {
        let y = &self.y[k];
        metrics_from_state(y, grid, base)
    }

    pub fn state_at(&self, t: f64) -> Option<&Vec<f64>> {
        let idx = self.t.iter().position(|&tk| tk >= t)?;
        Some(&self.y[idx])
    }
}

pub fn metrics_from_state(
    y: &[f64],
    grid: &GridThevenin,
    base: &PerUnitBase,
) -> (f64, f64, f64, f64) {
    let v_pu = y[0] / base.v_base;
    let delta = y[1];
    let i = Phasor::new(y[2], y[3]);
    let i_pu = i.norm() / base.i_base;
    let (r_th, x_th) = thevenin_split(grid);
    let vpoc =
        Phasor::new(grid.v_th_pu * base.v_base, 0.0) + Phasor::new(r_th, x_th) * base.z_base * i;
    (v_pu, delta, i_pu, vpoc.norm() / base.v_base)
}

/// Integrates the reduced dynamic-current model through the scenario timeline
/// with mode switching driven by the fault-management state machine.
///
/// The discrete state is frozen per segment; threshold crossings are located
/// by the integrator's event machinery on the reduced quantities (‖i‖ for
/// detection, ‖v_poc‖ for release), and the latch update runs between
/// segments. During the post-release ramp the gains and the virtual-inductor
/// contribution follow x_r(t) continuously inside the unconstrained model.
pub fn simulate_reduced(
    scenario: &Scenario,
    conv: &ConverterParams,
    ctrl: &ControlParams,
    base: &PerUnitBase,
    config: &IntegratorConfig,
) -> Result<ReducedRun, AnalysisError> {
    let sp_base = scenario.setpoints(base);
    let (delta0, v0_pu, i0) = prefault_operating_point(scenario, conv, ctrl, base)?;
    let y0 = vec![v0_pu * base.v_base, delta0, i0.re, i0.im];

    let mut run = ReducedRun {
        t: vec![0.0],
        y: vec![y0.clone()],
        fsm_timeline: Vec::new(),
        termination: Termination::ReachedEnd,
    };
    let mut fsm = FaultFsmState::new();
    let mut t = 0.0;
    let mut y = y0;

    let i_thr = base.pu_to_si(ctrl.i_thresh_pu, PuKind::Current);
    let v_thr = base.pu_to_si(ctrl.v_thresh_pu, PuKind::Voltage);

    while t < scenario.t_end {
        let grid =
            if t >= scenario.fault_time && scenario.clear_time.map(|tc| t < tc).unwrap_or(true) {
                scenario.fault
            } else {
                scenario.pre_fault
            };
        let mut seg_end = scenario.t_end;
        if t < scenario.fault_time {
            seg_end = seg_end.min(scenario.fault_time);
        } else if let Some(tc) = scenario.clear_time {
            if t < tc {
                seg_end = seg_end.min(tc);
            }
        }

        // refresh the latch against the segment-start state
        if scenario.fsm_enabled {
            let (_, _, i_pu, vpoc_pu) = metrics_from_state(&y, &grid, base);
            let next = fsm_update(
                &fsm,
                std::f64::consts::SQRT_2 * i_pu * base.i_base,
                std::f64::consts::SQRT_2 * vpoc_pu * base.v_base,
                t,
                ctrl,
                base,
            );
            let next = FaultFsmState {
                x_r: next.x_r_at(t, ctrl.t_ramp),
                ..next
            };
            if next != fsm {
                fsm = next;
                run.fsm_timeline.push((t, fsm));
                continue;
            }
        }

        let fsm_seg = fsm;
        let constrained = scenario.fsm_enabled && scenario.limiter_enabled && fsm_seg.x_f;
        let scaling = scenario.model.scaling;
        let rhs = |tt: f64, yy: &[f64], dyy: &mut [f64]| -> Result<(), ControlError> {
            let x_r = if scenario.fsm_enabled {
                fsm_seg.x_r_at(tt, ctrl.t_ramp)
            } else {
                0.0
            };
            let fsm_now = FaultFsmState { x_r, ..fsm_seg };
            let gains = gain_schedule(
                &fsm_now,
                ctrl,
                sp_base,
                scenario.q0_boost && scenario.fsm_enabled,
                base,
            );
            let env = ReducedEnv {
                conv,
                base,
                v_th: grid.v_th_pu * base.v_base,
                omega_g: grid.omega_g,
                net: NetworkAggregate::build(conv, ctrl, base, &grid, x_r),
                r0: base.pu_to_si(ctrl.r0_pu, PuKind::Impedance),
                i_m: base.pu_to_si(ctrl.i_m_pu, PuKind::Current),
                eta: gains.eta,
                mu: gains.mu,
                sp: Setpoints::new(sp_base.p0, gains.q0_eff),
                v_floor: 0.01 * base.v_base,
            };
            let mode = ModelMode {
                mode: if constrained {
                    OperatingMode::Constrained
                } else {
                    OperatingMode::Unconstrained
                },
                current_model: CurrentModel::Dynamic,
                scaling,
            };
            env.rhs(mode, yy, dyy)
        };

        let mut events: Vec<EventSpec> = Vec::new();
        if scenario.fsm_enabled {
            if !fsm_seg.x_f {
                events.push(EventSpec::new(
                    move |_t: f64, yy: &[f64]| yy[2].hypot(yy[3]) - i_thr,
                    EventDirection::Rising,
                    EventAction::ModeSwitch,
                    "overcurrent",
                ));
            } else {
                let grid_ev = grid;
                let base_ev = *base;
                events.push(EventSpec::new(
                    move |_t: f64, yy: &[f64]| {
                        let (_, _, _, vpoc_pu) = metrics_from_state(yy, &grid_ev, &base_ev);
                        vpoc_pu * base_ev.v_base - v_thr
                    },
                    EventDirection::Rising,
                    EventAction::ModeSwitch,
                    "voltage-recovery",
                ));
            }
            if let Some(tc) = fsm_seg.clear_time {
                if !fsm_seg.x_f && fsm_seg.x_r_at(t, ctrl.t_ramp) > 0.0 {
                    let t_done = tc + ctrl.t_ramp;
                    events.push(EventSpec::new(
                        move |tt: f64, _yy: &[f64]| tt - t_done,
                        EventDirection::Rising,
                        EventAction::ModeSwitch,
                        "ramp-complete",
                    ));
                }
            }
        }

        let traj = integrate(rhs, &y, (t, seg_end), config, &events)?;
        for (k, tk) in traj.t.iter().enumerate().skip(1) {
            run.t.push(*tk);
            run.y.push(traj.y[k].clone());
        }
        t = traj.t_final();
        y = traj.final_state().to_vec();

        match &traj.termination {
            Termination::ReachedEnd => {}
            Termination::Event { .. } => {
                let (_, _, i_pu, vpoc_pu) = metrics_from_state(&y, &grid, base);
                let next = fsm_update(
                    &fsm,
                    std::f64::consts::SQRT_2 * i_pu * base.i_base,
                    std::f64::consts::SQRT_2 * vpoc_pu * base.v_base,
                    t,
                    ctrl,
                    base,
                );
                let next = FaultFsmState {
                    x_r: next.x_r_at(t, ctrl.t_ramp),
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
    Ok(run)
}

/// Pre-fault stable operating point (δ, V pu, I_dq) found from the
/// unconstrained quasi-static surfaces over the default domain.
pub fn prefault_operating_point(
    scenario: &Scenario,
    conv: &ConverterParams,
    ctrl: &ControlParams,
    base: &PerUnitBase,
) -> Result<(f64, f64, Phasor), AnalysisError> {
    let (env, _) = scenario.phase_env(Phase::PreFault, conv, ctrl, base);
    let plane = PlaneModel::new(env, ModelMode::unconstrained(CurrentModel::QuasiStatic));
    let surface = sample_surfaces(&plane, &PlaneDomain::default(), 128)?;
    let eqs = find_equilibria(&surface, &plane)?;
    let stable = eqs
        .iter()
        .filter(|e| e.kind == StabilityKind::Stable)
        .max_by(|a, b| a.v_pu.partial_cmp(&b.v_pu).unwrap())
        .ok_or(AnalysisError::Control(ControlError::SingularNetwork))?;
    let net = NetworkAggregate::build(conv, ctrl, base, &scenario.pre_fault, 0.0);
    let i = steady_current(
        stable.v_pu * base.v_base,
        stable.delta,
        OperatingMode::Unconstrained,
        scenario.setpoints(base),
        scenario.pre_fault.v_th_pu * base.v_base,
        &net,
        0.0,
        base.pu_to_si(ctrl.i_m_pu, PuKind::Current),
    )?;
    Ok((stable.delta, stable.v_pu, i))
}

/// Summary metrics of one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryMetrics {
    /// Fault steady state sampled just before clearing (or at the end).
    pub fault_steady_v_pu: f64,
    pub fault_steady_delta_rad: f64,
    pub fault_steady_i_pu: f64,
    pub fault_steady_vpoc_pu: f64,
    /// Peak ‖i‖ (pu) over the fault window.
    pub max_i_pu_fault: f64,
    pub pre_fault_equilibria: usize,
    pub fault_equilibria: usize,
    /// Winding period of the fault-phase limit cycle, voltage-scaled
    /// reference convention (s).
    pub limit_cycle_period_voltage_scaled_s: Option<f64>,
    /// Winding period with fixed references (s); this convention matches the
    /// published benchmark period.
    pub limit_cycle_period_fixed_ref_s: Option<f64>,
    /// Distance of the end state from the pre-fault equilibrium (max of
    /// wrapped |Δδ| rad and |ΔV| pu), when the run clears the fault.
    pub post_clear_distance: Option<f64>,
}

/// Paths and metrics produced by one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub out_dir: PathBuf,
    pub trajectory_csv: PathBuf,
    pub surface_pre_csv: PathBuf,
    pub surface_fault_csv: PathBuf,
    pub equilibria_json: PathBuf,
    pub limit_cycle_csv: Option<PathBuf>,
    pub limit_cycle_json: Option<PathBuf>,
    pub summary_json: PathBuf,
    pub plot_script: PathBuf,
    pub metrics: SummaryMetrics,
    pub warnings: Vec<String>,
}

/// Full scenario pipeline: reduced trajectory with mode switching, pre-fault
/// and fault surfaces, equilibria, limit-cycle detection when the fault phase
/// has none, and all file exports.
pub fn run_scenario(
    scenario: &Scenario,
    conv: &ConverterParams,
    ctrl: &ControlParams,
    base: &PerUnitBase,
    out_root: &Path,
    resolution: usize,
) -> Result<RunReport, Box<dyn std::error::Error>> {
    let out_dir = out_root.join(&scenario.name);
    std::fs::create_dir_all(&out_dir)?;
    let mut warnings = Vec::new();

    let integ = IntegratorConfig {
        rtol: 1e-8,
        atol: 1e-10,
        ..Default::default()
    };
    let run = simulate_reduced(scenario, conv, ctrl, base, &integ)?;
    if run.termination != Termination::ReachedEnd {
        warnings.push(format!("trajectory ended early: {:?}", run.termination));
    }

    // phase analyses
    let domain = PlaneDomain::default();
    let (env_pre, mode_pre) = scenario.phase_env(Phase::PreFault, conv, ctrl, base);
    let plane_pre = PlaneModel::new(env_pre, mode_pre);
    let surf_pre = sample_surfaces(&plane_pre, &domain, resolution)?;
    let eq_pre = find_equilibria(&surf_pre, &plane_pre)?;

    let (env_fault, mode_fault) = scenario.phase_env(Phase::Fault, conv, ctrl, base);
    let plane_fault = PlaneModel::new(env_fault, mode_fault);
    let surf_fault = sample_surfaces(&plane_fault, &domain, resolution)?;
    let eq_fault = find_equilibria(&surf_fault, &plane_fault)?;

    // limit cycle when the fault phase has no equilibrium
    let mut cycle_scaled = None;
    let mut cycle_fixed = None;
    if eq_fault.is_empty() && mode_fault.mode == OperatingMode::Constrained {
        let start = prefault_operating_point(scenario, conv, ctrl, base)?;
        for scaling in [SetpointScaling::VoltageScaled, SetpointScaling::Fixed] {
            match detect_cycle_for(scenario, conv, ctrl, base, scaling, start)? {
                CycleOutcome::Cycle(c) => {
                    if scaling == SetpointScaling::VoltageScaled {
                        cycle_scaled = Some(c);
                    } else {
                        cycle_fixed = Some(c);
                    }
                }
                other => warnings.push(format!(
                    "cycle detection ({scaling:?}): {}",
                    outcome_brief(&other)
                )),
            }
        }
    }

    // fault steady-state metrics just before clearing (or at the end)
    let t_meas = scenario.clear_time.unwrap_or(scenario.t_end) - 1e-6;
    let k_meas = run
        .t
        .iter()
        .rposition(|&tk| tk <= t_meas)
        .unwrap_or(run.t.len() - 1);
    let (v_pu, delta, i_pu, vpoc_pu) = run.sample_metrics(k_meas, &scenario.fault, base);
    let max_i = run
        .t
        .iter()
        .enumerate()
        .filter(|(_, &tk)| {
            tk >= scenario.fault_time && tk <= scenario.clear_time.unwrap_or(f64::MAX)
        })
        .map(|(k, _)| run.sample_metrics(k, &scenario.fault, base).2)
        .fold(0.0, f64::max);

    let post_clear_distance = scenario.clear_time.map(|_| {
        let pre_eq = eq_pre
            .iter()
            .filter(|e| e.kind == StabilityKind::Stable)
            .max_by(|a, b| a.v_pu.partial_cmp(&b.v_pu).unwrap());
        match pre_eq {
            Some(eq) => {
                let yf = run.y.last().unwrap();
                let dd = wrap_angle(yf[1] - eq.delta).abs();
                let dv = (yf[0] / base.v_base - eq.v_pu).abs();
                dd.max(dv)
            }
            None => f64::NAN,
        }
    });
    if let (Some(tc), Some(dist)) = (scenario.clear_time, post_clear_distance) {
        let relatches = run
            .fsm_timeline
            .iter()
            .filter(|(tk, s)| *tk > tc && s.x_f)
            .count();
        if dist > 1e-2 && relatches > 2 {
            warnings.push(format!(
                "post-clear recovery incomplete (distance {dist:.2e}, {relatches} re-latches): \
                 the over-current latch re-fires while the gain ramp unwinds, holding the \
                 operating point at the switching boundary; raising i_thresh_pu above the \
                 ramp-phase current excursions or shortening t_ramp restores a clean recovery"
            ));
        }
    }

    let metrics = SummaryMetrics {
        fault_steady_v_pu: v_pu,
        fault_steady_delta_rad: delta,
        fault_steady_i_pu: i_pu,
        fault_steady_vpoc_pu: vpoc_pu,
        max_i_pu_fault: max_i,
        pre_fault_equilibria: eq_pre.len(),
        fault_equilibria: eq_fault.len(),
        limit_cycle_period_voltage_scaled_s: cycle_scaled.as_ref().map(|c| c.period),
        limit_cycle_period_fixed_ref_s: cycle_fixed.as_ref().map(|c| c.period),
        post_clear_distance,
    };

    // exports
    let trajectory_csv = out_dir.join("trajectory.csv");
    export::write_reduced_trajectory_csv(&trajectory_csv, scenario, &run, conv, base, ctrl.t_ramp)?;
    let surface_pre_csv = out_dir.join("surface_pre.csv");
    export::write_surface_csv(&surface_pre_csv, &surf_pre)?;
    let surface_fault_csv = out_dir.join("surface_fault.csv");
    export::write_surface_csv(&surface_fault_csv, &surf_fault)?;
    let equilibria_json = out_dir.join("equilibria.json");
    export::write_equilibria_json(&equilibria_json, &eq_pre, &eq_fault)?;
    let (limit_cycle_csv, limit_cycle_json) = match (&cycle_scaled, &cycle_fixed) {
        (None, None) => (None, None),
        (s, f) => {
            let csv = out_dir.join("limit_cycle.csv");
            let json = out_dir.join("limit_cycle.json");
            export::write_limit_cycle(&csv, &json, s.as_ref(), f.as_ref())?;
            (Some(csv), Some(json))
        }
    };
    let summary_json = out_dir.join("summary.json");
    let plot_script = out_dir.join("plot.gp");
    export::write_plot_script(&plot_script, scenario, limit_cycle_csv.is_some())?;

    let report = RunReport {
        scenario: scenario.name.clone(),
        out_dir: out_dir.clone(),
        trajectory_csv,
        surface_pre_csv,
        surface_fault_csv,
        equilibria_json,
        limit_cycle_csv,
        limit_cycle_json,
        summary_json: summary_json.clone(),
        plot_script,
        metrics,
        warnings,
    };
    export::write_summary_json(&summary_json, &report)?;
    Ok(report)
}

fn outcome_brief(o: &CycleOutcome) -> String {
    match o {
        CycleOutcome::Cycle(c) => format!("cycle, period {:.6} s", c.period),
        CycleOutcome::ConvergedToEquilibrium { delta, v_pu } => {
            format!("converged to ({delta:.4} rad, {v_pu:.4} pu)")
        }
        CycleOutcome::Collapse { t, message } => format!("collapse at t = {t:.4}: {message}"),
        CycleOutcome::Inconclusive { message } => format!("inconclusive: {message}"),
    }
}

/// Limit-cycle detection on the fault-phase constrained model with the chosen
/// reference convention, using the dynamic-current trajectory model.
pub fn detect_cycle_for(
    scenario: &Scenario,
    conv: &ConverterParams,
    ctrl: &ControlParams,
    base: &PerUnitBase,
    scaling: SetpointScaling,
    start: (f64, f64, Phasor),
) -> Result<CycleOutcome, AnalysisError> {
    let (env, mode) = scenario.phase_env(Phase::Fault, conv, ctrl, base);
    let mode = ModelMode {
        current_model: CurrentModel::Dynamic,
        scaling,
        ..mode
    };
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ControlError> {
        env.rhs(mode, y, dy)
    };
    let (delta0, v0_pu, i0) = start;
    let y0 = vec![v0_pu * base.v_base, delta0, i0.re, i0.im];
    let cfg = CycleConfig::default();
    detect_limit_cycle(rhs, &y0, 1, 0, base.v_base, &cfg)
}

/// Data bundle other front-ends (CLI, acceptance tests) reuse for per-phase
/// analysis without a full scenario run.
pub struct PhaseAnalysis {
    pub surface: SurfaceGrid,
    pub equilibria: Vec<Equilibrium>,
}

pub fn analyze_phase(
    scenario: &Scenario,
    phase: Phase,
    conv: &ConverterParams,
    ctrl: &ControlParams,
    base: &PerUnitBase,
    domain: &PlaneDomain,
    resolution: usize,
) -> Result<PhaseAnalysis, AnalysisError> {
    let (env, mode) = scenario.phase_env(phase, conv, ctrl, base);
    let plane = PlaneModel::new(env, mode);
    let surface = sample_surfaces(&plane, domain, resolution)?;
    let equilibria = find_equilibria(&surface, &plane)?;
    Ok(PhaseAnalysis {
        surface,
        equilibria,
    })
}
