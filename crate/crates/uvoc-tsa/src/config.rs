//! Plain-text configuration documents.
//!
//! Line-oriented format with `[section]` headers and `key = value` entries;
//! `#` or `;` start a comment. Sections are `[converter]`, `[control]`,
//! `[grid]` and `[scenario]`; keys match the parameter field names, with
//! per-unit values suffixed `_pu`. Unknown sections or keys are rejected with
//! the offending line number, as are malformed numbers and duplicate keys.
//!
//! Parsing is total: no input may panic the parser. This module is the
//! untrusted-input surface of the toolkit and is covered by the fuzz targets.

use std::collections::BTreeMap;

use crate::error::ConfigError;
use crate::params::{ControlParams, ConverterParams, GridThevenin, PerUnitBase, PuKind};
use crate::reduced::{CurrentModel, ModelMode, OperatingMode, SetpointScaling};
use crate::scenario::Scenario;

/// Raw parsed document: section → key → (value, line).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDoc {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl ConfigDoc {
    pub fn section(&self, name: &str) -> Option<&BTreeMap<String, (String, usize)>> {
        self.sections.get(name)
    }
}

/// Parses the raw document structure without interpreting values.
pub fn parse_document(text: &str) -> Result<ConfigDoc, ConfigError> {
    let mut doc = ConfigDoc::default();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: "unterminated section header (expected `[name]`)".into(),
                });
            };
            let name = name.trim();
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("invalid section name `{name}`"),
                });
            }
            doc.sections.entry(name.to_string()).or_default();
            current = Some(name.to_string());
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("invalid key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("key `{key}` has no value"),
            });
        }
        let Some(section) = &current else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("key `{key}` appears before any [section] header"),
            });
        };
        let entries = doc.sections.get_mut(section).unwrap();
        if entries.contains_key(key) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key `{key}` in section [{section}]"),
            });
        }
        entries.insert(key.to_string(), (value.to_string(), line_no));
    }
    Ok(doc)
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(pos) => &line[..pos],
        None => line,
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub converter: ConverterParams,
    pub control: ControlParams,
    pub grid: GridThevenin,
    pub scenario: Option<Scenario>,
    pub warnings: Vec<String>,
}

struct SectionReader<'a> {
    name: &'a str,
    entries: Option<&'a BTreeMap<String, (String, usize)>>,
    consumed: Vec<String>,
}

impl<'a> SectionReader<'a> {
    fn new(doc: &'a ConfigDoc, name: &'a str) -> Self {
        SectionReader {
            name,
            entries: doc.section(name),
            consumed: Vec::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.consumed.push(key.to_string());
        self.entries
            .and_then(|m| m.get(key))
            .map(|(v, l)| (v.as_str(), *l))
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<f64>().map_err(|_| ConfigError::Parse {
                line,
                message: format!("key `{key}` in [{}]: `{v}` is not a number", self.name),
            }),
        }
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<f64>().map(Some).map_err(|_| ConfigError::Parse {
                line,
                message: format!("key `{key}` in [{}]: `{v}` is not a number", self.name),
            }),
        }
    }

    fn u32(&mut self, key: &str, default: u32) -> Result<u32, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<u32>().map_err(|_| ConfigError::Parse {
                line,
                message: format!("key `{key}` in [{}]: `{v}` is not an integer", self.name),
            }),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, line)) => match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "key `{key}` in [{}]: expected true/false, got `{v}`",
                        self.name
                    ),
                }),
            },
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key)
            .map(|(v, _)| v.to_string())
            .unwrap_or_else(|| default.to_string())
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(entries) = self.entries {
            for (key, (_, line)) in entries {
                if !self.consumed.contains(key) {
                    return Err(ConfigError::Parse {
                        line: *line,
                        message: format!("unknown key `{key}` in section [{}]", self.name),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Parses and validates a configuration document, applying the built-in
/// defaults for omitted keys.
pub fn load_params(text: &str) -> Result<LoadedConfig, ConfigError> {
    let doc = parse_document(text)?;
    for name in doc.sections.keys() {
        if !matches!(name.as_str(), "converter" | "control" | "grid" | "scenario") {
            return Err(ConfigError::Parse {
                line: 0,
                message: format!("unknown section [{name}]"),
            });
        }
    }

    let mut warnings = Vec::new();

    let mut conv_r = SectionReader::new(&doc, "converter");
    let defaults = ConverterParams::default_three_phase();
    let v0 = conv_r.f64("v0", defaults.v0)?;
    let converter = ConverterParams {
        s_rated: conv_r.f64("s_rated", defaults.s_rated)?,
        p_rated: conv_r.f64("p_rated", defaults.p_rated)?,
        v0,
        v0_peak: conv_r.f64("v0_peak", std::f64::consts::SQRT_2 * v0)?,
        omega0: conv_r.f64("omega0", defaults.omega0)?,
        n_phases: conv_r.u32("n_phases", defaults.n_phases)?,
        l1_pu: conv_r.f64("l1_pu", defaults.l1_pu)?,
        l2_pu: conv_r.f64("l2_pu", defaults.l2_pu)?,
        r1_pu: conv_r.f64("r1_pu", defaults.r1_pu)?,
        r2_pu: conv_r.f64("r2_pu", defaults.r2_pu)?,
    };
    conv_r.finish()?;
    converter.validate()?;

    let mut ctrl_r = SectionReader::new(&doc, "control");
    let dctrl = ControlParams::default_table();
    let i_m_pu = ctrl_r.f64("i_m_pu", dctrl.i_m_pu)?;
    let control = ControlParams {
        eta0: ctrl_r.f64("eta0", dctrl.eta0)?,
        mu0: ctrl_r.f64("mu0", dctrl.mu0)?,
        tau_f: ctrl_r.f64("tau_f", dctrl.tau_f)?,
        r0_pu: ctrl_r.f64("r0_pu", dctrl.r0_pu)?,
        lv0_pu: ctrl_r.f64("lv0_pu", dctrl.lv0_pu)?,
        rv0_pu: ctrl_r.f64("rv0_pu", dctrl.rv0_pu)?,
        omega_b: ctrl_r.f64("omega_b", dctrl.omega_b)?,
        i_m_pu,
        i_thresh_pu: ctrl_r.f64("i_thresh_pu", i_m_pu)?,
        v_thresh_pu: ctrl_r.f64("v_thresh_pu", dctrl.v_thresh_pu)?,
        t_ramp: ctrl_r.f64("t_ramp", dctrl.t_ramp)?,
        q0_boost_s0_pu: ctrl_r.f64("q0_boost_s0_pu", dctrl.q0_boost_s0_pu)?,
        v_floor: ctrl_r.f64("v_floor", dctrl.v_floor)?,
    };
    ctrl_r.finish()?;
    control.validate(&mut warnings)?;

    let mut grid_r = SectionReader::new(&doc, "grid");
    let dgrid = GridThevenin::default_case_grid();
    let grid = GridThevenin {
        v_th_pu: grid_r.f64("v_th_pu", dgrid.v_th_pu)?,
        omega_g: grid_r.f64("omega_g", dgrid.omega_g)?,
        z_th_mag_pu: grid_r.f64("z_th_mag_pu", dgrid.z_th_mag_pu)?,
        x_over_r: grid_r.f64("x_over_r", dgrid.x_over_r)?,
    };
    grid_r.finish()?;
    grid.validate()?;

    let scenario = if doc.section("scenario").is_some() {
        let mut s = SectionReader::new(&doc, "scenario");
        let name = s.string("name", "custom");
        let fault_v_th_pu = s.f64_opt("fault_v_th_pu")?;
        let fault_z = s.f64("fault_z_th_mag_pu", grid.z_th_mag_pu)?;
        let fault_xr = s.f64("fault_x_over_r", grid.x_over_r)?;
        let fault_time = s.f64("fault_time", 0.25)?;
        let clear_time = s.f64_opt("clear_time")?;
        let t_end = s.f64("t_end", clear_time.unwrap_or(fault_time) + 4.0)?;
        let p0_pu = s.f64("p0_pu", 0.0)?;
        let q0_pu = s.f64("q0_pu", 0.0)?;
        let limiter_enabled = s.bool("limiter_enabled", true)?;
        let fsm_enabled = s.bool("fsm_enabled", true)?;
        let q0_boost = s.bool("q0_boost", false)?;
        let mode = match s.string("model", "unconstrained").as_str() {
            "unconstrained" => OperatingMode::Unconstrained,
            "constrained" => OperatingMode::Constrained,
            other => {
                return Err(ConfigError::Parse {
                    line: 0,
                    message: format!("model must be unconstrained|constrained, got `{other}`"),
                })
            }
        };
        let current_model = match s.string("current_model", "dynamic").as_str() {
            "dynamic" => CurrentModel::Dynamic,
            "quasi_static" => CurrentModel::QuasiStatic,
            other => {
                return Err(ConfigError::Parse {
                    line: 0,
                    message: format!("current_model must be dynamic|quasi_static, got `{other}`"),
                })
            }
        };
        let scaling = match s.string("setpoint_scaling", "voltage_scaled").as_str() {
            "voltage_scaled" => SetpointScaling::VoltageScaled,
            "fixed" => SetpointScaling::Fixed,
            other => {
                return Err(ConfigError::Parse {
                    line: 0,
                    message: format!(
                        "setpoint_scaling must be voltage_scaled|fixed, got `{other}`"
                    ),
                })
            }
        };
        s.finish()?;
        let fault = GridThevenin {
            v_th_pu: fault_v_th_pu.unwrap_or(grid.v_th_pu),
            omega_g: grid.omega_g,
            z_th_mag_pu: fault_z,
            x_over_r: fault_xr,
        };
        fault.validate()?;
        let sc = Scenario {
            name,
            pre_fault: grid,
            fault,
            fault_time,
            clear_time,
            t_end,
            p0_pu,
            q0_pu,
            limiter_enabled,
            fsm_enabled,
            q0_boost,
            model: ModelMode {
                mode,
                current_model,
                scaling,
            },
        };
        sc.validate().map_err(ConfigError::Param)?;
        Some(sc)
    } else {
        None
    };

    Ok(LoadedConfig {
        converter,
        control,
        grid,
        scenario,
        warnings,
    })
}

/// Renders the resolved parameter set in SI and per-unit, for `params print`.
pub fn render_params(cfg: &LoadedConfig) -> String {
    let base = PerUnitBase::from_converter(&cfg.converter);
    let c = &cfg.converter;
    let k = &cfg.control;
    let g = &cfg.grid;
    let zb = base.z_base;
    let mut out = String::new();
    use std::fmt::Write;
    let _ = writeln!(out, "[converter]");
    let _ = writeln!(out, "  s_rated   = {} VA", c.s_rated);
    let _ = writeln!(out, "  p_rated   = {} W   (power base)", c.p_rated);
    let _ = writeln!(
        out,
        "  v0        = {} V L-N RMS (voltage base); peak {} V",
        c.v0, c.v0_peak
    );
    let _ = writeln!(out, "  omega0    = {} rad/s", c.omega0);
    let _ = writeln!(out, "  n_phases  = {}", c.n_phases);
    let _ = writeln!(
        out,
        "  l1        = {} pu = {} H",
        c.l1_pu,
        c.l1_pu * zb / c.omega0
    );
    let _ = writeln!(
        out,
        "  l2        = {} pu = {} H",
        c.l2_pu,
        c.l2_pu * zb / c.omega0
    );
    let _ = writeln!(out, "  r1        = {} pu = {} ohm", c.r1_pu, c.r1_pu * zb);
    let _ = writeln!(out, "  r2        = {} pu = {} ohm", c.r2_pu, c.r2_pu * zb);
    let _ = writeln!(out, "[base]");
    let _ = writeln!(out, "  z_base    = {} ohm", base.z_base);
    let _ = writeln!(out, "  i_base    = {} A RMS", base.i_base);
    let _ = writeln!(out, "[control]");
    let _ = writeln!(out, "  eta0      = {}", k.eta0);
    let _ = writeln!(out, "  mu0       = {}", k.mu0);
    let _ = writeln!(out, "  tau_f     = {}", k.tau_f);
    let _ = writeln!(out, "  r0        = {} pu = {} ohm", k.r0_pu, k.r0_pu * zb);
    let _ = writeln!(
        out,
        "  lv0       = {} pu = {} H",
        k.lv0_pu,
        k.lv0_pu * zb / c.omega0
    );
    let _ = writeln!(out, "  rv0       = {} pu = {} ohm", k.rv0_pu, k.rv0_pu * zb);
    let _ = writeln!(out, "  omega_b   = {} rad/s", k.omega_b);
    let _ = writeln!(
        out,
        "  i_m       = {} pu = {} A RMS",
        k.i_m_pu,
        base.pu_to_si(k.i_m_pu, PuKind::Current)
    );
    let _ = writeln!(
        out,
        "  i_thresh  = {} pu = {} A RMS",
        k.i_thresh_pu,
        base.pu_to_si(k.i_thresh_pu, PuKind::Current)
    );
    let _ = writeln!(
        out,
        "  v_thresh  = {} pu = {} V RMS",
        k.v_thresh_pu,
        base.pu_to_si(k.v_thresh_pu, PuKind::Voltage)
    );
    let _ = writeln!(out, "  t_ramp    = {} s", k.t_ramp);
    let _ = writeln!(
        out,
        "  q0_boost_s0 = {} pu = {} VA",
        k.q0_boost_s0_pu,
        base.pu_to_si(k.q0_boost_s0_pu, PuKind::Power)
    );
    let _ = writeln!(out, "[grid]");
    let _ = writeln!(
        out,
        "  v_th      = {} pu = {} V RMS",
        g.v_th_pu,
        base.pu_to_si(g.v_th_pu, PuKind::Voltage)
    );
    let _ = writeln!(out, "  omega_g   = {} rad/s", g.omega_g);
    let (r_th, x_th) = crate::params::thevenin_split(g);
    let _ = writeln!(
        out,
        "  z_th      = {} pu = {} ohm (r {} pu, x {} pu; SCR {})",
        g.z_th_mag_pu,
        g.z_th_mag_pu * zb,
        r_th,
        x_th,
        g.scr()
    );
    let _ = writeln!(out, "  x_over_r  = {}", g.x_over_r);
    if let Some(sc) = &cfg.scenario {
        let _ = writeln!(out, "[scenario]");
        let _ = writeln!(out, "  name       = {}", sc.name);
        let _ = writeln!(
            out,
            "  p0         = {} pu = {} W",
            sc.p0_pu,
            base.pu_to_si(sc.p0_pu, PuKind::Power)
        );
        let _ = writeln!(
            out,
            "  q0         = {} pu = {} var",
            sc.q0_pu,
            base.pu_to_si(sc.q0_pu, PuKind::Power)
        );
        let _ = writeln!(
            out,
            "  fault      = {} pu behind {} pu at t = {} s",
            sc.fault.v_th_pu, sc.fault.z_th_mag_pu, sc.fault_time
        );
        match sc.clear_time {
            Some(tc) => {
                let _ = writeln!(out, "  clear      = {tc} s");
            }
            None => {
                let _ = writeln!(out, "  clear      = none");
            }
        }
        let _ = writeln!(out, "  t_end      = {} s", sc.t_end);
        let _ = writeln!(
            out,
            "  toggles    = limiter {} fsm {} q0_boost {}",
            sc.limiter_enabled, sc.fsm_enabled, sc.q0_boost
        );
    }
    for w in &cfg.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
