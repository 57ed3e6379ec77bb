//! Physical and control parameter sets with per-unit/SI conversion.
//!
//! All downstream computation is carried out in SI units; per-unit is an I/O
//! convention. Base quantities follow the rated real power and nominal L-N RMS
//! voltage: `s_base = p_rated`, `v_base = v0`, `z_base = N·v0²/s_base`,
//! `i_base = s_base/(N·v0)`. Parameter sets are immutable after validation and
//! freely shareable across threads.

use crate::error::ParamError;

/// Voltage source converter ratings and filter passives.
#[derive(Debug, Clone, PartialEq)]
pub struct ConverterParams {
    /// Rated apparent power (VA).
    pub s_rated: f64,
    /// Rated real power (W); also the per-unit power base.
    pub p_rated: f64,
    /// Nominal L-N RMS voltage (V); also the per-unit voltage base.
    pub v0: f64,
    /// Nominal L-N peak voltage (V), exactly √2·v0.
    pub v0_peak: f64,
    /// Nominal angular frequency (rad/s).
    pub omega0: f64,
    /// Phase count, 1 or 3.
    pub n_phases: u32,
    /// Converter-side filter inductance (pu reactance at omega0).
    pub l1_pu: f64,
    /// Network-side filter inductance (pu reactance at omega0).
    pub l2_pu: f64,
    /// Converter-side parasitic resistance (pu).
    pub r1_pu: f64,
    /// Network-side parasitic resistance (pu).
    pub r2_pu: f64,
}

/// uVOC controller gains, virtual impedance and fault-management settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    /// Base synchronization gain η₀ (SI: V·A⁻¹·s⁻¹ acting on peak quantities).
    pub eta0: f64,
    /// Base magnitude-correction gain μ₀ (SI: V⁻²·s⁻¹).
    pub mu0: f64,
    /// Gain-boost divisor: η = η₀(1 + x_r/τ_f).
    pub tau_f: f64,
    /// Active resistance on the current error (pu).
    pub r0_pu: f64,
    /// Virtual inductor parameter, pu reactance at omega0.
    pub lv0_pu: f64,
    /// Virtual resistance parameter (pu).
    pub rv0_pu: f64,
    /// Virtual-impedance filter bandwidth (rad/s).
    pub omega_b: f64,
    /// Maximum allowed current (pu, RMS).
    pub i_m_pu: f64,
    /// Over-current detection threshold Î_T (pu, RMS; compared as peak).
    pub i_thresh_pu: f64,
    /// Under-voltage release threshold V̂_T (pu).
    pub v_thresh_pu: f64,
    /// x_r ramp-down duration t_F (s).
    pub t_ramp: f64,
    /// Apparent-power target S₀ used by the reactive boost Q₀ = √(S₀²−P₀²) (pu).
    pub q0_boost_s0_pu: f64,
    /// Degenerate-voltage floor for the current-reference division (V, peak).
    pub v_floor: f64,
}

/// Thevenin equivalent of the grid seen from the point of coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridThevenin {
    /// Source L-N RMS magnitude (pu).
    pub v_th_pu: f64,
    /// Grid angular frequency (rad/s).
    pub omega_g: f64,
    /// Impedance magnitude (pu).
    pub z_th_mag_pu: f64,
    /// Reactance-to-resistance ratio.
    pub x_over_r: f64,
}

/// Per-unit base quantities derived from the converter ratings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnitBase {
    /// Power base (W) = p_rated.
    pub s_base: f64,
    /// Voltage base (V, L-N RMS) = v0.
    pub v_base: f64,
    /// Impedance base (Ω) = N·v0²/s_base.
    pub z_base: f64,
    /// Current base (A RMS) = s_base/(N·v0).
    pub i_base: f64,
}

/// Quantity kind for per-unit conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PuKind {
    Voltage,
    Current,
    Impedance,
    Power,
}

impl PerUnitBase {
    pub fn from_converter(cp: &ConverterParams) -> Self {
        let s_base = cp.p_rated;
        let v_base = cp.v0;
        let n = cp.n_phases as f64;
        PerUnitBase {
            s_base,
            v_base,
            z_base: n * v_base * v_base / s_base,
            i_base: s_base / (n * v_base),
        }
    }

    fn base_for(&self, kind: PuKind) -> f64 {
        match kind {
            PuKind::Voltage => self.v_base,
            PuKind::Current => self.i_base,
            PuKind::Impedance => self.z_base,
            PuKind::Power => self.s_base,
        }
    }

    /// per-unit → SI.
    pub fn pu_to_si(&self, value: f64, kind: PuKind) -> f64 {
        value * self.base_for(kind)
    }

    /// SI → per-unit. Exact inverse of [`Self::pu_to_si`].
    pub fn si_to_pu(&self, value: f64, kind: PuKind) -> f64 {
        value / self.base_for(kind)
    }
}

/// Splits a Thevenin impedance magnitude into (r, x) satisfying
/// `x/r = x_over_r` and `r² + x² = z²`. Returns per-unit values.
pub fn thevenin_split(grid: &GridThevenin) -> (f64, f64) {
    let r = grid.z_th_mag_pu / (1.0 + grid.x_over_r * grid.x_over_r).sqrt();
    (r, r * grid.x_over_r)
}

impl ConverterParams {
    /// Table I defaults for the three-phase system. The converter-side
    /// inductor is two interleaved 0.04 pu sub-phase inductors in parallel.
    pub fn default_three_phase() -> Self {
        let v0 = 120.0;
        ConverterParams {
            s_rated: 9000.0,
            p_rated: 7500.0,
            v0,
            v0_peak: std::f64::consts::SQRT_2 * v0,
            omega0: 2.0 * std::f64::consts::PI * 60.0,
            n_phases: 3,
            l1_pu: 0.02,
            l2_pu: 0.005,
            r1_pu: 0.0,
            r2_pu: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let check_pos = |name: &str, v: f64| -> Result<(), ParamError> {
            if !v.is_finite() || v <= 0.0 {
                return Err(ParamError::Invalid {
                    field: name.to_string(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
            Ok(())
        };
        check_pos("s_rated", self.s_rated)?;
        check_pos("p_rated", self.p_rated)?;
        check_pos("v0", self.v0)?;
        check_pos("omega0", self.omega0)?;
        if self.p_rated > self.s_rated {
            return Err(ParamError::Invalid {
                field: "p_rated".into(),
                reason: format!(
                    "p_rated ({}) must not exceed s_rated ({})",
                    self.p_rated, self.s_rated
                ),
            });
        }
        if (self.v0_peak - std::f64::consts::SQRT_2 * self.v0).abs() > 1e-9 * self.v0 {
            return Err(ParamError::Invalid {
                field: "v0_peak".into(),
                reason: format!(
                    "must equal sqrt(2)*v0 = {}",
                    std::f64::consts::SQRT_2 * self.v0
                ),
            });
        }
        if self.n_phases != 1 && self.n_phases != 3 {
            return Err(ParamError::Invalid {
                field: "n_phases".into(),
                reason: format!("must be 1 or 3, got {}", self.n_phases),
            });
        }
        for (name, v) in [
            ("l1_pu", self.l1_pu),
            ("l2_pu", self.l2_pu),
            ("r1_pu", self.r1_pu),
            ("r2_pu", self.r2_pu),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ParamError::Invalid {
                    field: name.into(),
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }
}

impl ControlParams {
    /// Table II defaults plus the fault-management thresholds the tables omit
    /// (Î_T = I_m, V̂_T = 0.9 pu, t_F = 50 ms).
    pub fn default_table() -> Self {
        ControlParams {
            eta0: 19.95,
            mu0: 7.1e-4,
            tau_f: 0.11,
            r0_pu: 0.43,
            lv0_pu: 0.29,
            rv0_pu: 0.04,
            omega_b: 2.0 * std::f64::consts::PI * 600.0,
            i_m_pu: 1.2,
            i_thresh_pu: 1.2,
            v_thresh_pu: 0.9,
            t_ramp: 0.05,
            q0_boost_s0_pu: 1.2,
            v_floor: 1e-6,
        }
    }

    /// Validates invariants. Non-fatal oddities are appended to `warnings`.
    pub fn validate(&self, warnings: &mut Vec<String>) -> Result<(), ParamError> {
        for (name, v) in [
            ("eta0", self.eta0),
            ("mu0", self.mu0),
            ("tau_f", self.tau_f),
            ("i_m_pu", self.i_m_pu),
            ("omega_b", self.omega_b),
            ("t_ramp", self.t_ramp),
            ("q0_boost_s0_pu", self.q0_boost_s0_pu),
            ("v_floor", self.v_floor),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(ParamError::Invalid {
                    field: name.into(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        for (name, v) in [
            ("r0_pu", self.r0_pu),
            ("lv0_pu", self.lv0_pu),
            ("rv0_pu", self.rv0_pu),
            ("i_thresh_pu", self.i_thresh_pu),
            ("v_thresh_pu", self.v_thresh_pu),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ParamError::Invalid {
                    field: name.into(),
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        if self.i_thresh_pu > self.i_m_pu {
            warnings.push(format!(
                "i_thresh_pu ({}) exceeds i_m_pu ({}): over-current detection will trigger only above the limiter level",
                self.i_thresh_pu, self.i_m_pu
            ));
        }
        Ok(())
    }
}

impl GridThevenin {
    /// Stiff-ish nominal grid: 1.0 pu source at 60 Hz behind 0.52 pu, X/R 20.
    pub fn default_case_grid() -> Self {
        GridThevenin {
            v_th_pu: 1.0,
            omega_g: 2.0 * std::f64::consts::PI * 60.0,
            z_th_mag_pu: 0.52,
            x_over_r: 20.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !self.z_th_mag_pu.is_finite() || self.z_th_mag_pu < 0.0 {
            return Err(ParamError::Invalid {
                field: "z_th_mag_pu".into(),
                reason: format!("must be non-negative, got {}", self.z_th_mag_pu),
            });
        }
        if !self.x_over_r.is_finite() || self.x_over_r <= 0.0 {
            return Err(ParamError::Invalid {
                field: "x_over_r".into(),
                reason: format!("must be positive, got {}", self.x_over_r),
            });
        }
        if !self.v_th_pu.is_finite() || self.v_th_pu < 0.0 {
            return Err(ParamError::Invalid {
                field: "v_th_pu".into(),
                reason: format!("must be non-negative, got {}", self.v_th_pu),
            });
        }
        if !self.omega_g.is_finite() || self.omega_g <= 0.0 {
            return Err(ParamError::Invalid {
                field: "omega_g".into(),
                reason: format!("must be positive, got {}", self.omega_g),
            });
        }
        Ok(())
    }

    /// Short-circuit ratio = 1/z_th.
    pub fn scr(&self) -> f64 {
        1.0 / self.z_th_mag_pu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> PerUnitBase {
        PerUnitBase::from_converter(&ConverterParams::default_three_phase())
    }

    #[test]
    fn default_bases() {
        let b = base();
        assert_eq!(b.pu_to_si(1.0, PuKind::Impedance), 5.76);
        assert!((b.pu_to_si(1.0, PuKind::Current) - 20.833333333333332).abs() < 1e-12);
        assert_eq!(b.pu_to_si(0.0, PuKind::Power), 0.0);
        // z_base * i_base = v_base
        assert!((b.z_base * b.i_base - b.v_base).abs() < 1e-9);
    }

    #[test]
    fn thevenin_split_examples() {
        let g = GridThevenin {
            z_th_mag_pu: 0.52,
            x_over_r: 20.0,
            ..GridThevenin::default_case_grid()
        };
        let (r, x) = thevenin_split(&g);
        // independently: r = 0.52/sqrt(401), x = 20 r
        assert!((r - 0.02596756081082396).abs() < 1e-12);
        assert!((x - 0.5193512162164792).abs() < 1e-12);
        let g2 = GridThevenin {
            z_th_mag_pu: 0.1,
            ..g
        };
        let (r2, x2) = thevenin_split(&g2);
        assert!((r2 - 0.004993761694389223).abs() < 1e-12);
        assert!((x2 - 0.09987523388778446).abs() < 1e-12);
        let g3 = GridThevenin {
            z_th_mag_pu: 0.0,
            ..g
        };
        assert_eq!(thevenin_split(&g3), (0.0, 0.0));
    }

    #[test]
    fn scr_case_one() {
        let g = GridThevenin::default_case_grid();
        assert!((g.scr() - 1.923).abs() < 0.01);
    }

    #[test]
    fn i_thresh_above_limit_warns() {
        let mut cp = ControlParams::default_table();
        cp.i_thresh_pu = 1.5;
        let mut w = Vec::new();
        cp.validate(&mut w).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn negative_i_m_rejected() {
        let mut cp = ControlParams::default_table();
        cp.i_m_pu = -1.0;
        let mut w = Vec::new();
        let err = cp.validate(&mut w).unwrap_err();
        assert!(err.to_string().contains("i_m_pu"));
    }
}
