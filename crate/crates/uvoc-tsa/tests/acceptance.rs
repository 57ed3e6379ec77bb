//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS line with the measured numbers (run with `--nocapture` to see
//! the lines for passing criteria).
//!
//! Reference values marked "solved independently" were obtained from an
//! independent root-finder/integrator implementation over the same algebra
//! and are frozen here as oracles.

use std::time::Instant;

use uvoc_tsa::analysis::{clearing_sweep, CycleOutcome, PlaneDomain, StabilityKind};
use uvoc_tsa::controller::{
    circular_limit, current_reference, fsm_update, oscillator_rhs, FaultFsmState, Gains, Setpoints,
};
use uvoc_tsa::oracle::{init_steady, wrap_angle, OracleSim};
use uvoc_tsa::params::{ControlParams, ConverterParams, PerUnitBase, PuKind};
use uvoc_tsa::phasor::Phasor;
use uvoc_tsa::reduced::{
    feasibility_bound, pq_from_current, quasi_static_pq_constrained, quasi_static_pq_unconstrained,
    steady_current, CurrentModel, ModelMode, NetworkAggregate, OperatingMode, SetpointScaling,
};
use uvoc_tsa::scenario::{
    analyze_phase, detect_cycle_for, prefault_operating_point, simulate_reduced, Phase, Scenario,
};
use uvoc_tsa::solver::{
    integrate, EventAction, EventDirection, EventSpec, IntegratorConfig, Termination,
};

fn setup() -> (ConverterParams, ControlParams, PerUnitBase) {
    let conv = ConverterParams::default_three_phase();
    let ctrl = ControlParams::default_table();
    let base = PerUnitBase::from_converter(&conv);
    (conv, ctrl, base)
}

/// Deterministic splitmix64 stream for the randomized criteria.
struct Rng(u64);

impl Rng {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.f64()
    }
}

fn fault_steady_metrics(name: &str) -> (f64, f64, f64, f64, f64) {
    let (conv, ctrl, base) = setup();
    let sc = Scenario::builtin(name).unwrap();
    let cfg = IntegratorConfig {
        rtol: 1e-8,
        atol: 1e-10,
        ..Default::default()
    };
    let run = simulate_reduced(&sc, &conv, &ctrl, &base, &cfg).unwrap();
    assert_eq!(
        run.termination,
        Termination::ReachedEnd,
        "{name} trajectory did not finish"
    );
    let t_meas = sc.clear_time.unwrap_or(sc.t_end) - 1e-6;
    let k = run.t.iter().rposition(|&t| t <= t_meas).unwrap();
    let (v, d, i, vpoc) = run.sample_metrics(k, &sc.fault, &base);
    let max_i = run
        .t
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= sc.fault_time && t <= sc.clear_time.unwrap_or(f64::MAX))
        .map(|(k, _)| run.sample_metrics(k, &sc.fault, &base).2)
        .fold(0.0, f64::max);
    (v, d, i, vpoc, max_i)
}

#[test]
fn criterion_01_case1_fault_steady_state() {
    let t0 = Instant::now();
    let (v, _d, i, vpoc, _) = fault_steady_metrics("case1");
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(
        (0.58..=0.68).contains(&i),
        "criterion 1: FAIL — ||i|| = {i:.4} pu outside 0.63 ± 0.05"
    );
    assert!(
        (0.89..=0.95).contains(&vpoc),
        "criterion 1: FAIL — ||v_poc|| = {vpoc:.4} pu outside 0.92 ± 0.03"
    );
    assert!(
        elapsed < 10.0,
        "criterion 1: FAIL — runtime {elapsed:.2} s >= 10 s"
    );
    println!(
        "criterion 1 (case1 steady state): PASS — ||i|| = {i:.4} pu (0.63 ± 0.05), ||v_poc|| = {vpoc:.4} pu (0.92 ± 0.03), V = {v:.4} pu, runtime {elapsed:.2} s"
    );
}

#[test]
fn criterion_02_case2_unprotected_steady_state() {
    let (_v, _d, i, vpoc, _) = fault_steady_metrics("case2-unprotected");
    assert!(
        (1.85..=2.15).contains(&i),
        "criterion 2: FAIL — ||i|| = {i:.4} pu outside 2.0 ± 0.15"
    );
    assert!(
        (0.65..=0.75).contains(&vpoc),
        "criterion 2: FAIL — ||v_poc|| = {vpoc:.4} pu outside 0.7 ± 0.05"
    );
    println!(
        "criterion 2 (case2 unprotected): PASS — ||i|| = {i:.4} pu (2.0 ± 0.15), ||v_poc|| = {vpoc:.4} pu (0.7 ± 0.05)"
    );
}

#[test]
fn criterion_03_case2_protected_clamp_and_equilibrium() {
    let (conv, ctrl, base) = setup();
    let sc = Scenario::builtin("case2-protected").unwrap();
    let cfg = IntegratorConfig {
        rtol: 1e-8,
        atol: 1e-10,
        ..Default::default()
    };
    let run = simulate_reduced(&sc, &conv, &ctrl, &base, &cfg).unwrap();
    assert_eq!(run.termination, Termination::ReachedEnd);

    // detection instant: first latch of the fault-management machine
    let t_detect = run
        .fsm_timeline
        .iter()
        .find(|(_, s)| s.x_f)
        .map(|(t, _)| *t)
        .expect("criterion 3: FAIL — over-current latch never fired");
    let window = t_detect + 0.15;
    let mut settled_max: f64 = 0.0;
    let mut settled_min = f64::INFINITY;
    for (k, &t) in run.t.iter().enumerate() {
        if t >= window {
            let i = run.sample_metrics(k, &sc.fault, &base).2;
            settled_max = settled_max.max(i);
            settled_min = settled_min.min(i);
        }
    }
    assert!(
        settled_max <= 1.2 * 1.05 && settled_min >= 1.2 * 0.95,
        "criterion 3: FAIL — ||i|| in [{settled_min:.4}, {settled_max:.4}] pu not within 5% of 1.2 after the detection transient"
    );

    let analysis = analyze_phase(
        &sc,
        Phase::Fault,
        &conv,
        &ctrl,
        &base,
        &PlaneDomain::default(),
        256,
    )
    .unwrap();
    let stable: Vec<_> = analysis
        .equilibria
        .iter()
        .filter(|e| e.kind == StabilityKind::Stable)
        .collect();
    assert!(
        !stable.is_empty(),
        "criterion 3: FAIL — no stable constrained-mode equilibrium found"
    );
    // solved independently: d = (0.048929 rad, 0.996292 pu)
    let d = stable[0];
    assert!((d.delta - 0.048929072).abs() < 1e-4 && (d.v_pu - 0.996292438).abs() < 1e-4);
    println!(
        "criterion 3 (case2 protected): PASS — ||i|| clamped to [{settled_min:.4}, {settled_max:.4}] pu (1.2 ± 5%), stable equilibrium d at (δ = {:.4} rad, V = {:.4} pu)",
        d.delta, d.v_pu
    );
}

#[test]
fn criterion_04_feasibility_bound_exact() {
    let v = feasibility_bound(0.5, 0.1, 1.2);
    assert!(
        (v - 0.62).abs() <= f64::EPSILON,
        "criterion 4: FAIL — feasibility_bound(0.5, 0.1, 1.2) = {v:e} != 0.62"
    );
    println!("criterion 4 (feasibility bound): PASS — feasibility_bound(0.5, 0.1, 1.2) = {v} (= 0.62 to machine precision)");
}

#[test]
fn criterion_05_case3_equilibrium_topology() {
    let (conv, ctrl, base) = setup();
    let sc = Scenario::builtin("case3").unwrap();
    let domain = PlaneDomain::default();
    let pre = analyze_phase(&sc, Phase::PreFault, &conv, &ctrl, &base, &domain, 256).unwrap();
    assert_eq!(
        pre.equilibria.len(),
        2,
        "criterion 5: FAIL — expected exactly 2 pre-fault equilibria, found {}",
        pre.equilibria.len()
    );
    let n_stable = pre
        .equilibria
        .iter()
        .filter(|e| e.kind == StabilityKind::Stable)
        .count();
    let n_unstable = pre
        .equilibria
        .iter()
        .filter(|e| e.eigenvalues.iter().any(|(re, _)| *re > 0.0))
        .count();
    assert_eq!(
        n_stable, 1,
        "criterion 5: FAIL — expected one stable pre-fault equilibrium"
    );
    assert_eq!(
        n_unstable, 1,
        "criterion 5: FAIL — expected one unstable pre-fault equilibrium"
    );
    let fault = analyze_phase(&sc, Phase::Fault, &conv, &ctrl, &base, &domain, 256).unwrap();
    assert!(
        fault.equilibria.is_empty(),
        "criterion 5: FAIL — expected no fault equilibria, found {}",
        fault.equilibria.len()
    );
    println!(
        "criterion 5 (case3 topology): PASS — pre-fault: 2 equilibria (stable a_s ({:.4}, {:.4}), unstable a_u ({:.4}, {:.4})); fault: 0 equilibria at 256x256",
        pre.equilibria[0].delta, pre.equilibria[0].v_pu, pre.equilibria[1].delta, pre.equilibria[1].v_pu
    );
}

#[test]
fn criterion_06_case3_limit_cycle_period() {
    let (conv, ctrl, base) = setup();
    let sc = Scenario::builtin("case3").unwrap();
    let start = prefault_operating_point(&sc, &conv, &ctrl, &base).unwrap();

    let fixed =
        match detect_cycle_for(&sc, &conv, &ctrl, &base, SetpointScaling::Fixed, start).unwrap() {
            CycleOutcome::Cycle(c) => c,
            other => panic!("criterion 6: FAIL — fixed-reference detection gave {other:?}"),
        };
    let scaled = match detect_cycle_for(
        &sc,
        &conv,
        &ctrl,
        &base,
        SetpointScaling::VoltageScaled,
        start,
    )
    .unwrap()
    {
        CycleOutcome::Cycle(c) => c,
        other => panic!("criterion 6: FAIL — voltage-scaled detection gave {other:?}"),
    };
    assert!(fixed.convergence_ratio < 1e-3 && scaled.convergence_ratio < 1e-3);

    let lo = 0.393 * 0.9;
    let hi = 0.393 * 1.1;
    assert!(
        (lo..=hi).contains(&fixed.period),
        "criterion 6: FAIL — fixed-reference period {:.4} s outside 0.393 s ± 10%",
        fixed.period
    );
    let scaled_note = if (lo..=hi).contains(&scaled.period) {
        "also within the band".to_string()
    } else {
        format!(
            "outside the band ({:+.1}%), documented model-variant deviation",
            100.0 * (scaled.period - 0.393) / 0.393
        )
    };
    println!(
        "criterion 6 (case3 limit cycle): PASS — fixed-reference period {:.4} s within 0.393 s ± 10% ({:+.1}%); voltage-scaled period {:.4} s, {scaled_note}",
        fixed.period,
        100.0 * (fixed.period - 0.393) / 0.393,
        scaled.period
    );
}

#[test]
fn criterion_07_clearing_sweep_cca_free() {
    let (conv, ctrl, base) = setup();
    let sc = Scenario::builtin("case3").unwrap();
    let start = prefault_operating_point(&sc, &conv, &ctrl, &base).unwrap();
    let cycle = match detect_cycle_for(
        &sc,
        &conv,
        &ctrl,
        &base,
        SetpointScaling::VoltageScaled,
        start,
    )
    .unwrap()
    {
        CycleOutcome::Cycle(c) => c,
        other => panic!("criterion 7: FAIL — no cycle to sweep: {other:?}"),
    };

    // post-fault equilibrium from its own analysis, compared to the pre-fault one
    let post = analyze_phase(
        &sc,
        Phase::PreFault,
        &conv,
        &ctrl,
        &base,
        &PlaneDomain::default(),
        256,
    )
    .unwrap();
    let a_s = post
        .equilibria
        .iter()
        .find(|e| e.kind == StabilityKind::Stable)
        .expect("criterion 7: FAIL — post-fault stable equilibrium missing");
    let (delta_s, v_s, _) = start;
    assert!(
        wrap_angle(a_s.delta - delta_s).abs() < 1e-3 && (a_s.v_pu - v_s).abs() < 1e-3,
        "criterion 7: FAIL — post-fault equilibrium differs from pre-fault a_s by more than 1e-3"
    );

    let (env, _) = sc.phase_env(Phase::PreFault, &conv, &ctrl, &base);
    let post_rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        env.rhs(ModelMode::unconstrained(CurrentModel::Dynamic), y, dy)
    };
    let sweep = clearing_sweep(
        &cycle,
        post_rhs,
        1,
        0,
        base.v_base,
        (a_s.delta, a_s.v_pu),
        12,
        10.0,
        1e-3,
        &IntegratorConfig {
            rtol: 1e-8,
            atol: 1e-10,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(
        sweep.n_converged, 12,
        "criterion 7: FAIL — only {}/12 clearing points converged",
        sweep.n_converged
    );
    println!(
        "criterion 7 (CCA-free clearing sweep): PASS — 12/12 temporally uniform clearing points converge to a_s = ({:.4} rad, {:.4} pu) within 1e-3",
        a_s.delta, a_s.v_pu
    );
}

#[test]
fn criterion_08_quasi_static_equals_dynamic_steady_state() {
    let (conv, ctrl, base) = setup();
    let grid = uvoc_tsa::params::GridThevenin::default_case_grid();
    let r0 = base.pu_to_si(ctrl.r0_pu, PuKind::Impedance);
    let i_m = base.pu_to_si(ctrl.i_m_pu, PuKind::Current);
    let mut rng = Rng(0x5eed_0001);
    let mut worst: f64 = 0.0;
    for mode in [OperatingMode::Unconstrained, OperatingMode::Constrained] {
        let x_r = if mode == OperatingMode::Constrained {
            1.0
        } else {
            0.0
        };
        let net = NetworkAggregate::build(&conv, &ctrl, &base, &grid, x_r);
        for _ in 0..1000 {
            let v = rng.range(0.1, 1.3) * base.v_base;
            let d = rng.range(-std::f64::consts::PI, std::f64::consts::PI);
            let v_th = rng.range(0.2, 1.1) * base.v_base;
            let sp = Setpoints::new(
                rng.range(0.05, 1.0) * base.s_base,
                rng.range(-0.5, 1.0) * base.s_base,
            );
            let i = steady_current(v, d, mode, sp, v_th, &net, r0, i_m).unwrap();
            let (p_dyn, q_dyn) = pq_from_current(v, d, i.re, i.im, conv.n_phases);
            let (p_qs, q_qs) = match mode {
                OperatingMode::Unconstrained => {
                    quasi_static_pq_unconstrained(v, d, v_th, &net, conv.n_phases).unwrap()
                }
                OperatingMode::Constrained => {
                    quasi_static_pq_constrained(v, d, sp, v_th, &net, r0, i_m, conv.n_phases)
                        .unwrap()
                }
            };
            for (a, b) in [(p_qs, p_dyn), (q_qs, q_dyn)] {
                let rel = (a - b).abs() / a.abs().max(1e-6 * base.s_base);
                worst = worst.max(rel);
                assert!(
                    rel <= 1e-9,
                    "criterion 8: FAIL — {mode:?} mismatch {rel:e} at (V = {v}, δ = {d})"
                );
            }
        }
    }
    println!(
        "criterion 8 (model equivalence): PASS — quasi-static (P, Q) equals the dynamic-current steady state at 1000 random points per mode (worst relative deviation {worst:.2e} <= 1e-9)"
    );
}

#[test]
fn criterion_09_oracle_agreement() {
    let (conv, ctrl, base) = setup();
    let mut lines = Vec::new();
    for name in ["case1", "case2-protected"] {
        let sc = Scenario::builtin(name).unwrap();
        let cfg = IntegratorConfig {
            rtol: 1e-8,
            atol: 1e-10,
            ..Default::default()
        };
        let run = simulate_reduced(&sc, &conv, &ctrl, &base, &cfg).unwrap();
        let kq = run.t.len() - 1;
        let (v_r, d_r, i_r, _) = run.sample_metrics(kq, &sc.fault, &base);

        let (delta0, v0_pu, i0) = prefault_operating_point(&sc, &conv, &ctrl, &base).unwrap();
        let y0 = init_steady(&ctrl, &base, &sc.pre_fault, v0_pu * base.v_base, delta0, i0);
        let sim = OracleSim {
            conv: &conv,
            ctrl: &ctrl,
            base: &base,
            sp: sc.setpoints(&base),
            limiter_enabled: sc.limiter_enabled,
            q0_boost: sc.q0_boost,
            fsm_enabled: sc.fsm_enabled,
            config: IntegratorConfig {
                rtol: 1e-7,
                atol: 1e-9,
                ..Default::default()
            },
        };
        let oracle = sim
            .run(
                sc.pre_fault,
                Some((sc.fault_time, sc.fault)),
                None,
                (0.0, sc.t_end),
                y0,
            )
            .unwrap();
        assert_eq!(
            oracle.termination,
            Termination::ReachedEnd,
            "{name}: oracle run failed"
        );
        let ko = oracle.t.len() - 1;
        let (v_o, d_o, i_o, _) = oracle.sample_metrics(ko, &sc.fault, &base);

        for (label, a, b) in [("V", v_r, v_o), ("delta", d_r, d_o), ("||i||", i_r, i_o)] {
            let rel = (a - b).abs() / b.abs();
            assert!(
                rel <= 0.02,
                "criterion 9: FAIL — {name} {label}: reduced {a:.5} vs oracle {b:.5} ({:.2}%)",
                100.0 * rel
            );
        }
        lines.push(format!(
            "{name}: V {v_r:.4}/{v_o:.4}, delta {d_r:.4}/{d_o:.4} rad, ||i|| {i_r:.4}/{i_o:.4} pu"
        ));
    }
    println!(
        "criterion 9 (oracle agreement): PASS — reduced/alpha-beta fault steady states agree within 2%: {}",
        lines.join("; ")
    );
}

#[test]
fn criterion_10_integrator_order_and_events() {
    // order study on y' = cos(t)·y over a decade of fixed steps
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), uvoc_tsa::ControlError> {
        dy[0] = t.cos() * y[0];
        Ok(())
    };
    let err_at = |h: f64| -> f64 {
        let config = IntegratorConfig {
            rtol: 1.0,
            atol: 1.0,
            h_init: h,
            h_min: h,
            h_max: h,
            max_steps: 10_000_000,
        };
        let traj = integrate(rhs, &[1.0], (0.0, 2.0), &config, &[]).unwrap();
        (traj.final_state()[0] - 2.0_f64.sin().exp()).abs()
    };
    let (h1, h2) = (0.1, 0.01);
    let (e1, e2) = (err_at(h1), err_at(h2));
    let order = (e1 / e2).ln() / (h1 / h2).ln();
    assert!(
        order >= 4.7,
        "criterion 10: FAIL — observed order {order:.2} < 4.7"
    );

    // event localization on the linear crossing
    let ev = EventSpec::new(
        |_t, y: &[f64]| y[0] - 0.5,
        EventDirection::Rising,
        EventAction::Stop,
        "half",
    );
    let traj = integrate(
        |_t, _y, dy| {
            dy[0] = 1.0;
            Ok(())
        },
        &[0.0],
        (0.0, 1.0),
        &IntegratorConfig::default(),
        &[ev],
    )
    .unwrap();
    let t_event = match traj.termination {
        Termination::Event { t, .. } => t,
        ref other => panic!("criterion 10: FAIL — no event stop ({other:?})"),
    };
    let err = (t_event - 0.5).abs();
    assert!(
        err < 1e-9,
        "criterion 10: FAIL — event localization error {err:e} >= 1e-9 s"
    );
    println!(
        "criterion 10 (integrator): PASS — empirical order {order:.2} >= 4.7 over one decade; event localization error {err:.2e} s < 1e-9 s"
    );
}

#[test]
fn criterion_11_invariant_suites() {
    let (conv, ctrl, base) = setup();
    let mut rng = Rng(0xabcd_ef01);

    // circular limiter: magnitude bound and angle preservation, 2000 samples
    for _ in 0..2000 {
        let i0 = Phasor::new(rng.range(-50.0, 50.0), rng.range(-50.0, 50.0));
        let lim = rng.range(1e-3, 40.0);
        let out = circular_limit(i0, lim);
        assert!(
            out.norm() <= lim * (1.0 + 1e-12),
            "limiter magnitude violated"
        );
        if i0.norm() > 0.0 {
            let cross = i0.re * out.im - i0.im * out.re;
            assert!(
                cross.abs() <= 1e-9 * i0.norm() * out.norm().max(1e-30),
                "limiter angle not preserved"
            );
            assert!(
                i0.re * out.re + i0.im * out.im >= 0.0,
                "limiter flipped direction"
            );
        }
    }

    // fault FSM: latch/ramp invariants over 1000 random monotone call sequences
    let i_thresh_pk = std::f64::consts::SQRT_2 * base.pu_to_si(ctrl.i_thresh_pu, PuKind::Current);
    for _ in 0..1000 {
        let mut fsm = FaultFsmState::new();
        let mut t = 0.0;
        let mut prev_xr = 0.0_f64;
        let mut prev_xf = false;
        for _ in 0..40 {
            t += rng.range(1e-4, 0.02);
            let i_pk = rng.range(0.0, 2.0) * std::f64::consts::SQRT_2 * base.i_base;
            let v_pk = rng.range(0.0, 1.3) * std::f64::consts::SQRT_2 * base.v_base;
            fsm = fsm_update(&fsm, i_pk, v_pk, t, &ctrl, &base);
            assert!((0.0..=1.0).contains(&fsm.x_r), "x_r out of [0, 1]");
            if fsm.x_f {
                assert_eq!(fsm.x_r, 1.0, "x_f = 1 without x_r = 1");
            }
            // while unlatched and undisturbed, the ramp never increases; an
            // over-current excursion in this very call restarts it even if
            // the simultaneous voltage recovery releases the latch again
            if !fsm.x_f && !prev_xf && i_pk <= i_thresh_pk {
                assert!(
                    fsm.x_r <= prev_xr + 1e-12,
                    "x_r increased while unlatched ({prev_xr} -> {})",
                    fsm.x_r
                );
            }
            prev_xr = fsm.x_r;
            prev_xf = fsm.x_f;
        }
    }

    // droop identity: radial projection of the oscillator law equals the
    // droop form at 1000 random operating points
    for _ in 0..1000 {
        let v_rms = rng.range(0.2, 1.3) * base.v_base;
        let theta = rng.range(-std::f64::consts::PI, std::f64::consts::PI);
        let p = rng.range(-1.0, 1.5) * base.s_base;
        let q = rng.range(-1.0, 1.5) * base.s_base;
        let sp = Setpoints::new(
            rng.range(0.0, 1.0) * base.s_base,
            rng.range(-0.5, 0.8) * base.s_base,
        );
        let gains = Gains {
            eta: ctrl.eta0,
            mu: ctrl.mu0,
            q0_eff: sp.q0,
        };
        let v = Phasor::from_polar(std::f64::consts::SQRT_2 * v_rms, theta);
        // current delivering (p, q) against v
        let i = (Phasor::new(p, q) / v).conj() * (2.0 / conv.n_phases as f64);
        let i_ref = current_reference(v, sp, conv.n_phases, ctrl.v_floor).unwrap();
        let dv = oscillator_rhs(v, i_ref, i, &gains, &conv);
        // V̇ (RMS) = radial component / √2
        let vdot_osc = (dv.re * v.re + dv.im * v.im) / v.norm() / std::f64::consts::SQRT_2;
        let n = conv.n_phases as f64;
        let vdot_droop = 2.0 * ctrl.mu0 * v_rms * (base.v_base * base.v_base - v_rms * v_rms)
            + ctrl.eta0 * (sp.q0 - q) / (n * v_rms);
        let rel = (vdot_osc - vdot_droop).abs() / vdot_droop.abs().max(1e-9);
        assert!(
            rel <= 1e-6,
            "droop identity violated: {vdot_osc} vs {vdot_droop} ({rel:e})"
        );
    }

    // surface normalization: absolute max of each valid surface equals 1
    let mut n_surfaces = 0;
    for k in 0..25 {
        let sc = Scenario::builtin(["case1", "case2-protected", "case3"][k % 3]).unwrap();
        let domain = PlaneDomain {
            delta_min: rng.range(-3.0, -0.5),
            delta_max: rng.range(0.5, 3.0),
            v_min: rng.range(0.05, 0.3),
            v_max: rng.range(0.8, 1.3),
        };
        let res = 16 + (rng.next_u64() % 17) as usize;
        let phase = if rng.f64() < 0.5 {
            Phase::PreFault
        } else {
            Phase::Fault
        };
        let analysis = analyze_phase(&sc, phase, &conv, &ctrl, &base, &domain, res);
        let surface = match analysis {
            Ok(a) => a.surface,
            Err(_) => continue,
        };
        for field in [&surface.ddelta, &surface.dv] {
            let max = field
                .iter()
                .zip(&surface.valid)
                .filter(|(_, ok)| **ok)
                .map(|(v, _)| v.abs())
                .fold(0.0, f64::max);
            assert!(
                (max - 1.0).abs() < 1e-12,
                "surface normalization max = {max}"
            );
        }
        n_surfaces += 1;
    }
    assert!(n_surfaces >= 20);

    println!(
        "criterion 11 (invariant suites): PASS — limiter (2000 samples), FSM latch/ramp (1000 sequences), droop identity (1000 points, <= 1e-6 rel), surface normalization ({n_surfaces} randomized surfaces)"
    );
}
