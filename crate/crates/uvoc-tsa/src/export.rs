//! File exports: CSV tables, JSON summaries, and plot scripts.
//!
//! All floating-point output is written with 17 significant digits so that
//! re-running a command with identical inputs produces byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use crate::analysis::{ClearingSweep, Equilibrium, LimitCycle, SurfaceGrid};
use crate::controller::FaultFsmState;
use crate::oracle::OracleRun;
use crate::params::{ConverterParams, GridThevenin, PerUnitBase};
use crate::phasor::Phasor;
use crate::reduced::pq_from_current;
use crate::scenario::{metrics_from_state, ReducedRun, RunReport, Scenario};

/// 17 significant digits, locale-independent.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.16e}")
    }
}

fn writer(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Surface CSV: `delta,v,ddelta_norm,dv_norm,valid`.
pub fn write_surface_csv(path: &Path, surf: &SurfaceGrid) -> std::io::Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "delta,v,ddelta_norm,dv_norm,valid")?;
    for (iv, &v) in surf.v_axis.iter().enumerate() {
        for (id, &d) in surf.delta_axis.iter().enumerate() {
            let (dd, dv, ok) = surf.at(iv, id);
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(d),
                fmt_f64(v),
                if ok { fmt_f64(dd) } else { "nan".into() },
                if ok { fmt_f64(dv) } else { "nan".into() },
                u8::from(ok),
            )?;
        }
    }
    w.flush()
}

fn equilibrium_json(e: &Equilibrium) -> serde_json::Value {
    json!({
        "delta": e.delta,
        "v": e.v_pu,
        "kind": e.kind.to_string(),
        "eigs": [
            {"re": e.eigenvalues[0].0, "im": e.eigenvalues[0].1},
            {"re": e.eigenvalues[1].0, "im": e.eigenvalues[1].1},
        ],
        "residual_norm": e.residual_norm,
        "probe_agrees": e.probe_agrees,
        "marginal_warning": e.marginal_warning,
    })
}

/// Equilibria for both scenario phases.
pub fn write_equilibria_json(
    path: &Path,
    pre_fault: &[Equilibrium],
    fault: &[Equilibrium],
) -> std::io::Result<()> {
    let doc = json!({
        "pre_fault": pre_fault.iter().map(equilibrium_json).collect::<Vec<_>>(),
        "fault": fault.iter().map(equilibrium_json).collect::<Vec<_>>(),
    });
    let mut w = writer(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    w.flush()
}

/// Equilibria of a single analysis (CLI `equilibria`).
pub fn write_equilibria_list_json(path: &Path, eqs: &[Equilibrium]) -> std::io::Result<()> {
    let doc = json!(eqs.iter().map(equilibrium_json).collect::<Vec<_>>());
    let mut w = writer(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    w.flush()
}

struct FsmCursor<'a> {
    timeline: &'a [(f64, FaultFsmState)],
    idx: usize,
    t_ramp: f64,
}

impl<'a> FsmCursor<'a> {
    fn new(timeline: &'a [(f64, FaultFsmState)], t_ramp: f64) -> Self {
        FsmCursor {
            timeline,
            idx: 0,
            t_ramp,
        }
    }

    fn at(&mut self, t: f64) -> (bool, f64) {
        while self.idx < self.timeline.len() && self.timeline[self.idx].0 <= t {
            self.idx += 1;
        }
        if self.idx == 0 {
            (false, 0.0)
        } else {
            let state = self.timeline[self.idx - 1].1;
            (state.x_f, state.x_r_at(t, self.t_ramp))
        }
    }
}

const TRAJ_HEADER: &str = "t,v_pu,delta_rad,i_pu,vpoc_pu,p_pu,q_pu,x_f,x_r";

/// Reduced-model trajectory in the shared trajectory schema.
pub fn write_reduced_trajectory_csv(
    path: &Path,
    scenario: &Scenario,
    run: &ReducedRun,
    conv: &ConverterParams,
    base: &PerUnitBase,
    t_ramp: f64,
) -> std::io::Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{TRAJ_HEADER}")?;
    let mut cursor = FsmCursor::new(&run.fsm_timeline, t_ramp);
    for (k, &t) in run.t.iter().enumerate() {
        let grid = active_grid(scenario, t);
        let (v_pu, delta, i_pu, vpoc_pu) = metrics_from_state(&run.y[k], &grid, base);
        let y = &run.y[k];
        let (p, q) = pq_from_current(y[0], y[1], y[2], y[3], conv.n_phases);
        let (x_f, x_r) = cursor.at(t);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(v_pu),
            fmt_f64(delta),
            fmt_f64(i_pu),
            fmt_f64(vpoc_pu),
            fmt_f64(p / base.s_base),
            fmt_f64(q / base.s_base),
            u8::from(x_f),
            fmt_f64(x_r),
        )?;
    }
    w.flush()
}

/// Oracle trajectory in the same schema, for diffing against the reduced run.
pub fn write_oracle_trajectory_csv(
    path: &Path,
    scenario: &Scenario,
    run: &OracleRun,
    conv: &ConverterParams,
    base: &PerUnitBase,
    t_ramp: f64,
) -> std::io::Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{TRAJ_HEADER}")?;
    let mut cursor = FsmCursor::new(&run.fsm_timeline, t_ramp);
    let mut prev_delta = 0.0;
    for (k, &t) in run.t.iter().enumerate() {
        let grid = active_grid(scenario, t);
        let (v_pu, delta_w, i_pu, vpoc_pu) = run.sample_metrics(k, &grid, base);
        // unwrap against the previous sample for a continuous column
        let mut delta = delta_w;
        while delta - prev_delta > std::f64::consts::PI {
            delta -= 2.0 * std::f64::consts::PI;
        }
        while delta - prev_delta < -std::f64::consts::PI {
            delta += 2.0 * std::f64::consts::PI;
        }
        prev_delta = delta;
        let y = &run.y[k];
        let v = Phasor::new(y[0], y[1]);
        let i = Phasor::new(y[2], y[3]);
        // αβ quantities are peak: S = (N/2)·v·conj(i)
        let s = v * i.conj() * (conv.n_phases as f64 / 2.0);
        let (x_f, x_r) = cursor.at(t);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(v_pu),
            fmt_f64(delta),
            fmt_f64(i_pu),
            fmt_f64(vpoc_pu),
            fmt_f64(s.re / base.s_base),
            fmt_f64(s.im / base.s_base),
            u8::from(x_f),
            fmt_f64(x_r),
        )?;
    }
    w.flush()
}

pub fn active_grid(scenario: &Scenario, t: f64) -> GridThevenin {
    if t >= scenario.fault_time && scenario.clear_time.map(|tc| t < tc).unwrap_or(true) {
        scenario.fault
    } else {
        scenario.pre_fault
    }
}

/// Limit-cycle orbit CSV plus a JSON summary with the per-convention periods.
pub fn write_limit_cycle(
    csv_path: &Path,
    json_path: &Path,
    voltage_scaled: Option<&LimitCycle>,
    fixed_ref: Option<&LimitCycle>,
) -> std::io::Result<()> {
    let mut w = writer(csv_path)?;
    writeln!(w, "convention,sample,delta_mod_2pi,v_pu")?;
    for (name, cycle) in [("voltage_scaled", voltage_scaled), ("fixed_ref", fixed_ref)] {
        if let Some(c) = cycle {
            for (k, (d, v)) in c.orbit.iter().enumerate() {
                writeln!(w, "{name},{k},{},{}", fmt_f64(*d), fmt_f64(*v))?;
            }
        }
    }
    w.flush()?;

    let entry = |c: Option<&LimitCycle>| match c {
        Some(c) => json!({"period_s": c.period, "convergence_ratio": c.convergence_ratio}),
        None => json!(null),
    };
    let doc = json!({
        "voltage_scaled": entry(voltage_scaled),
        "fixed_ref": entry(fixed_ref),
    });
    let mut w = writer(json_path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    w.flush()
}

/// Single-cycle summary (CLI `limit-cycle`).
pub fn write_cycle_json(path: &Path, label: &str, cycle: &LimitCycle) -> std::io::Result<()> {
    let doc = json!({
        "convention": label,
        "period_s": cycle.period,
        "convergence_ratio": cycle.convergence_ratio,
        "orbit_samples": cycle.orbit.len(),
    });
    let mut w = writer(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    w.flush()
}

pub fn write_cycle_csv(path: &Path, cycle: &LimitCycle) -> std::io::Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "sample,delta_mod_2pi,v_pu")?;
    for (k, (d, v)) in cycle.orbit.iter().enumerate() {
        writeln!(w, "{k},{},{}", fmt_f64(*d), fmt_f64(*v))?;
    }
    w.flush()
}

/// Clearing-sweep verdicts.
pub fn write_sweep_json(path: &Path, sweep: &ClearingSweep) -> std::io::Result<()> {
    let doc = json!({
        "target": {"delta": sweep.target_delta, "v_pu": sweep.target_v_pu},
        "n_points": sweep.verdicts.len(),
        "n_converged": sweep.n_converged,
        "points": sweep.verdicts.iter().map(|v| json!({
            "index": v.point_index,
            "converged": v.converged,
            "t_converged": v.t_converged,
            "final_delta": v.final_delta,
            "final_v_pu": v.final_v_pu,
        })).collect::<Vec<_>>(),
    });
    let mut w = writer(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
    w.flush()
}

pub fn write_summary_json(path: &Path, report: &RunReport) -> std::io::Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(report)?)?;
    w.flush()
}

/// Plain-text gnuplot commands over the exported CSVs.
pub fn write_plot_script(path: &Path, scenario: &Scenario, has_cycle: bool) -> std::io::Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "# gnuplot script for scenario `{}`", scenario.name)?;
    writeln!(w, "set datafile separator ','")?;
    writeln!(w, "set key autotitle columnhead")?;
    writeln!(w, "set terminal pngcairo size 1200,800")?;
    writeln!(w)?;
    writeln!(w, "set output 'trajectory.png'")?;
    writeln!(
        w,
        "set multiplot layout 2,2 title 'scenario {}'",
        scenario.name
    )?;
    writeln!(w, "set xlabel 't [s]'")?;
    writeln!(
        w,
        "plot 'trajectory.csv' using 1:2 with lines title 'V [pu]'"
    )?;
    writeln!(
        w,
        "plot 'trajectory.csv' using 1:3 with lines title 'delta [rad]'"
    )?;
    writeln!(
        w,
        "plot 'trajectory.csv' using 1:4 with lines title '||i|| [pu]'"
    )?;
    writeln!(
        w,
        "plot 'trajectory.csv' using 1:5 with lines title '||v_poc|| [pu]'"
    )?;
    writeln!(w, "unset multiplot")?;
    writeln!(w)?;
    for phase in ["pre", "fault"] {
        writeln!(w, "set output 'surface_{phase}.png'")?;
        writeln!(w, "set xlabel 'delta [rad]'; set ylabel 'V [pu]'")?;
        writeln!(w, "set view map")?;
        writeln!(
            w,
            "splot 'surface_{phase}.csv' using 1:2:3 with pm3d title 'ddelta/dt (norm)', \\"
        )?;
        writeln!(
            w,
            "      'surface_{phase}.csv' using 1:2:4 with pm3d title 'dV/dt (norm)'"
        )?;
    }
    if has_cycle {
        writeln!(w)?;
        writeln!(w, "set output 'limit_cycle.png'")?;
        writeln!(w, "set xlabel 'delta mod 2pi [rad]'; set ylabel 'V [pu]'")?;
        writeln!(
            w,
            "plot 'limit_cycle.csv' using 3:4 with points pt 7 ps 0.3 title 'orbit'"
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert!(s.starts_with("3.1415926535897931"), "{s}");
        // round-trips exactly
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
        assert_eq!(fmt_f64(0.0), "0");
    }
}
