//! Adaptation laws for navigation acceleration.
//!
//! The adaptive law corrects the measured longitudinal and rotational
//! accelerations with two PID terms: one pulling each channel toward a zero
//! setpoint, and one driven by the (normalized) phasic EDA level of the
//! previous tick, weighted per channel by `beta`:
//!
//! ```text
//! a_l' = a_l + pid_l(0 - a_l) + beta_l * pid_f(-f_prev)
//! a_r' = a_r + pid_r(0 - a_r) + beta_r * pid_f(-f_prev)
//! ```
//!
//! `pid_f` has a single state shared by both rows. Each PID is discretized
//! with a rectangle-rule integral (clamped) and a backward-difference
//! derivative.

use crate::error::{invalid, Error, Result};
use crate::scalar::{clamp, Scalar};

/// Memory of one discrete PID term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState<T> {
    integral: T,
    previous_error: T,
    integral_clamp: T,
}

impl<T: Scalar> PidState<T> {
    pub fn new(integral_clamp: T) -> Result<Self> {
        if !(integral_clamp.is_finite() && integral_clamp > T::zero()) {
            return Err(invalid("integral clamp must be positive and finite"));
        }
        Ok(Self {
            integral: T::zero(),
            previous_error: T::zero(),
            integral_clamp,
        })
    }

    pub fn integral(&self) -> T {
        self.integral
    }

    pub fn previous_error(&self) -> T {
        self.previous_error
    }

    pub fn reset(&mut self) {
        self.integral = T::zero();
        self.previous_error = T::zero();
    }
}

/// One tick of `K_P*e + K_I*I + K_D*(e - e_prev)/dt`, where `I` is updated to
/// `clamp(I + e*dt)` before use.
pub fn pid_step<T: Scalar>(state: &mut PidState<T>, e: T, kp: T, ki: T, kd: T, dt: T) -> Result<T> {
    if !e.is_finite() {
        return Err(Error::NonFinite {
            what: "pid error",
            index: 0,
        });
    }
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(invalid("dt must be positive"));
    }
    let bound = state.integral_clamp;
    state.integral = clamp(state.integral + e * dt, -bound, bound);
    let d = (e - state.previous_error) / dt;
    state.previous_error = e;
    Ok(kp * e + ki * state.integral + kd * d)
}

/// The eleven adaptation coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains<T> {
    pub k_pl: T,
    pub k_il: T,
    pub k_dl: T,
    pub k_pr: T,
    pub k_ir: T,
    pub k_dr: T,
    pub k_pf: T,
    pub k_if: T,
    pub k_df: T,
    pub beta_l: T,
    pub beta_r: T,
}

impl<T: Scalar> PidGains<T> {
    /// Canonical key order, used by the gains file and the trial history.
    pub const KEYS: [&'static str; 11] = [
        "K_Pl", "K_Il", "K_Dl", "K_Pr", "K_Ir", "K_Dr", "K_Pf", "K_If", "K_Df", "beta_l", "beta_r",
    ];

    /// Identity controller.
    pub fn zero() -> Self {
        Self::from_array([T::zero(); 11])
    }

    /// Coefficients reported as optimal for the human-subject study.
    pub fn reference() -> Self {
        Self::from_array(
            [
                0.0113, 0.0065, 0.0137, 0.0098, 0.0012, 0.0011, 0.0730, 0.2283, 0.3724, 0.0017, 0.0012,
            ]
            .map(T::lit),
        )
    }

    pub fn from_array(v: [T; 11]) -> Self {
        let [k_pl, k_il, k_dl, k_pr, k_ir, k_dr, k_pf, k_if, k_df, beta_l, beta_r] = v;
        Self {
            k_pl,
            k_il,
            k_dl,
            k_pr,
            k_ir,
            k_dr,
            k_pf,
            k_if,
            k_df,
            beta_l,
            beta_r,
        }
    }

    pub fn to_array(&self) -> [T; 11] {
        [
            self.k_pl, self.k_il, self.k_dl, self.k_pr, self.k_ir, self.k_dr, self.k_pf, self.k_if,
            self.k_df, self.beta_l, self.beta_r,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in Self::KEYS.iter().zip(self.to_array()) {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(invalid(format!("gain {key} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Exchanges the longitudinal and rotational coefficients.
    pub fn swapped_channels(&self) -> Self {
        Self {
            k_pl: self.k_pr,
            k_il: self.k_ir,
            k_dl: self.k_dr,
            k_pr: self.k_pl,
            k_ir: self.k_il,
            k_dr: self.k_dl,
            beta_l: self.beta_r,
            beta_r: self.beta_l,
            ..*self
        }
    }

    /// `key = value` lines in canonical order.
    pub fn to_text(&self) -> String {
        Self::KEYS
            .iter()
            .zip(self.to_array())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Parses the `key = value` format. Exactly the eleven keys must appear,
    /// each once; blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut values: [Option<T>; 11] = [None; 11];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let slot = Self::KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::Parse(format!("line {}: unknown gain `{key}`", lineno + 1)))?;
            if values[slot].is_some() {
                return Err(Error::Parse(format!("duplicate gain `{key}`")));
            }
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("gain `{key}`: {e}")))?;
            values[slot] = Some(T::lit(v));
        }
        let mut out = [T::zero(); 11];
        for (i, v) in values.iter().enumerate() {
            out[i] = v.ok_or_else(|| Error::Parse(format!("missing gain `{}`", Self::KEYS[i])))?;
        }
        let gains = Self::from_array(out);
        gains.validate()?;
        Ok(gains)
    }
}

/// Inputs for one control tick. The expected accelerations are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlFrame<T> {
    /// Measured longitudinal acceleration, m/s².
    pub a_l: T,
    /// Measured rotational acceleration, rad/s².
    pub a_r: T,
    /// Normalized phasic EDA at the previous tick.
    pub f_prev: T,
    pub dt: T,
}

impl<T: Scalar> ControlFrame<T> {
    fn validate(&self) -> Result<()> {
        if let Some(index) = [self.a_l, self.a_r, self.f_prev].iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "control frame",
                index,
            });
        }
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(invalid("frame dt must be positive"));
        }
        Ok(())
    }
}

/// Anti-windup bound and output saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLimits<T> {
    pub integral_clamp: T,
    pub max_longitudinal: T,
    pub max_rotational: T,
}

impl<T: Scalar> Default for ControlLimits<T> {
    fn default() -> Self {
        Self {
            integral_clamp: T::lit(10.0),
            max_longitudinal: T::lit(5.0),
            max_rotational: T::lit(3.0),
        }
    }
}

impl<T: Scalar> ControlLimits<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("integral_clamp", self.integral_clamp),
            ("max_longitudinal", self.max_longitudinal),
            ("max_rotational", self.max_rotational),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(invalid(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Stateful bi-channel adaptive controller.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveController<T> {
    gains: PidGains<T>,
    limits: ControlLimits<T>,
    longitudinal: PidState<T>,
    rotational: PidState<T>,
    phasic: PidState<T>,
}

impl<T: Scalar> AdaptiveController<T> {
    pub fn new(gains: PidGains<T>, limits: ControlLimits<T>) -> Result<Self> {
        gains.validate()?;
        limits.validate()?;
        let state = PidState::new(limits.integral_clamp)?;
        Ok(Self {
            gains,
            limits,
            longitudinal: state,
            rotational: state,
            phasic: state,
        })
    }

    pub fn gains(&self) -> &PidGains<T> {
        &self.gains
    }

    pub fn limits(&self) -> &ControlLimits<T> {
        &self.limits
    }

    /// Longitudinal, rotational and phasic PID states, in that order.
    pub fn states(&self) -> [&PidState<T>; 3] {
        [&self.longitudinal, &self.rotational, &self.phasic]
    }

    pub fn reset(&mut self) {
        self.longitudinal.reset();
        self.rotational.reset();
        self.phasic.reset();
    }

    /// Returns the adapted `(a_l, a_r)` for this tick.
    pub fn adapt_step(&mut self, frame: &ControlFrame<T>) -> Result<(T, T)> {
        frame.validate()?;
        let g = &self.gains;
        let dt = frame.dt;
        let corr_l = pid_step(&mut self.longitudinal, -frame.a_l, g.k_pl, g.k_il, g.k_dl, dt)?;
        let corr_r = pid_step(&mut self.rotational, -frame.a_r, g.k_pr, g.k_ir, g.k_dr, dt)?;
        let corr_f = pid_step(&mut self.phasic, -frame.f_prev, g.k_pf, g.k_if, g.k_df, dt)?;
        let a_l = frame.a_l + corr_l + g.beta_l * corr_f;
        let a_r = frame.a_r + corr_r + g.beta_r * corr_f;
        let (ml, mr) = (self.limits.max_longitudinal, self.limits.max_rotational);
        Ok((clamp(a_l, -ml, ml), clamp(a_r, -mr, mr)))
    }
}

/// Linear EDA-slope law used as a baseline: `a_prev - 0.5 * dEDA/dt`.
pub fn plouzeau_step<T: Scalar>(a_prev: T, d_eda: T) -> Result<T> {
    if !(a_prev.is_finite() && d_eda.is_finite()) {
        return Err(Error::NonFinite {
            what: "plouzeau input",
            index: usize::from(a_prev.is_finite()),
        });
    }
    Ok(a_prev - T::lit(0.5) * d_eda)
}
