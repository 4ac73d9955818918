use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 3 deg/s.
pub const DEFAULT_YAW_GATE: f64 = 3.0 * std::f64::consts::PI / 180.0;

/// Names of the individual correction gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainName {
    /// Every wheel rate from its own encoder.
    KWheel,
    KAxVx,
    KAyVy,
    KWyWy,
    KWzWz,
    /// Sign-gated mass law on the `a_x` residual.
    KAxDm,
    KDwxDjxx,
    KDwyDjyy,
    KDwzDjzz,
}

impl GainName {
    pub const ALL: [GainName; 9] = [
        GainName::KWheel,
        GainName::KAxVx,
        GainName::KAyVy,
        GainName::KWyWy,
        GainName::KWzWz,
        GainName::KAxDm,
        GainName::KDwxDjxx,
        GainName::KDwyDjyy,
        GainName::KDwzDjzz,
    ];

    /// Gains tuned for joint mass and sideslip estimation.
    pub const TIL_THETA: [GainName; 6] = [
        GainName::KWheel,
        GainName::KAxVx,
        GainName::KAyVy,
        GainName::KWyWy,
        GainName::KWzWz,
        GainName::KAxDm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GainName::KWheel => "k_wheel",
            GainName::KAxVx => "k_ax_vx",
            GainName::KAyVy => "k_ay_vy",
            GainName::KWyWy => "k_wy_wy",
            GainName::KWzWz => "k_wz_wz",
            GainName::KAxDm => "k_ax_dm",
            GainName::KDwxDjxx => "k_dwx_djxx",
            GainName::KDwyDjyy => "k_dwy_djyy",
            GainName::KDwzDjzz => "k_dwz_djzz",
        }
    }
}

impl fmt::Display for GainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GainName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GainName::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown gain '{s}'")))
    }
}

/// Stream that supplies the sign and the cornering gate of the inertia laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignSource {
    /// Differentiated sensor rates.
    Measured,
    /// The twin's a-priori rates, free of sensor noise.
    #[default]
    Twin,
    /// Sum of both streams.
    Blend,
}

/// Form of the mass law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassLaw {
    /// Residual times the sign of the measured acceleration.
    #[default]
    Signed,
    /// Plain linear feedback of the residual, for comparison only.
    Unsigned,
}

/// Sparse correction gains and the yaw-rate gate.
///
/// Parameter gains are negative for a correct estimator: a heavier or
/// stiffer-to-rotate real vehicle produces a residual of the opposite sign
/// to the exciting signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSet {
    pub k_wheel: f64,
    pub k_ax_vx: f64,
    pub k_ay_vy: f64,
    pub k_wy_wy: f64,
    pub k_wz_wz: f64,
    pub k_ax_dm: f64,
    pub k_dwx_djxx: f64,
    pub k_dwy_djyy: f64,
    pub k_dwz_djzz: f64,
    /// Yaw-rate gate, rad/s.
    pub yaw_gate: f64,
    pub inertia_sign: SignSource,
    pub mass_law: MassLaw,
}

impl Default for GainSet {
    fn default() -> Self {
        Self::zero()
    }
}

impl GainSet {
    /// Open loop: nothing is corrected.
    pub fn zero() -> Self {
        Self {
            k_wheel: 0.0,
            k_ax_vx: 0.0,
            k_ay_vy: 0.0,
            k_wy_wy: 0.0,
            k_wz_wz: 0.0,
            k_ax_dm: 0.0,
            k_dwx_djxx: 0.0,
            k_dwy_djyy: 0.0,
            k_dwz_djzz: 0.0,
            yaw_gate: DEFAULT_YAW_GATE,
            inertia_sign: SignSource::Twin,
            mass_law: MassLaw::Signed,
        }
    }

    /// Hand-tuned gains for the simulated scenarios: wheel-rate tracking plus
    /// every parameter law, no other state feedback.
    pub fn recommended() -> Self {
        Self {
            k_wheel: 0.05,
            k_ax_dm: -1.0,
            k_dwx_djxx: -0.75,
            k_dwy_djyy: -20.0,
            k_dwz_djzz: -8.0,
            ..Self::zero()
        }
    }

    pub fn get(&self, name: GainName) -> f64 {
        match name {
            GainName::KWheel => self.k_wheel,
            GainName::KAxVx => self.k_ax_vx,
            GainName::KAyVy => self.k_ay_vy,
            GainName::KWyWy => self.k_wy_wy,
            GainName::KWzWz => self.k_wz_wz,
            GainName::KAxDm => self.k_ax_dm,
            GainName::KDwxDjxx => self.k_dwx_djxx,
            GainName::KDwyDjyy => self.k_dwy_djyy,
            GainName::KDwzDjzz => self.k_dwz_djzz,
        }
    }

    pub fn set(&mut self, name: GainName, value: f64) {
        let slot = match name {
            GainName::KWheel => &mut self.k_wheel,
            GainName::KAxVx => &mut self.k_ax_vx,
            GainName::KAyVy => &mut self.k_ay_vy,
            GainName::KWyWy => &mut self.k_wy_wy,
            GainName::KWzWz => &mut self.k_wz_wz,
            GainName::KAxDm => &mut self.k_ax_dm,
            GainName::KDwxDjxx => &mut self.k_dwx_djxx,
            GainName::KDwyDjyy => &mut self.k_dwy_djyy,
            GainName::KDwzDjzz => &mut self.k_dwz_djzz,
        };
        *slot = value;
    }

    pub fn with(mut self, name: GainName, value: f64) -> Self {
        self.set(name, value);
        self
    }

    /// Multiply every gain (not the gate) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = *self;
        for g in GainName::ALL {
            out.set(g, self.get(g) * factor);
        }
        out
    }

    pub fn validate(&self, bounds: &GainBounds) -> Result<()> {
        if !(self.yaw_gate > 0.0 && self.yaw_gate.is_finite()) {
            return Err(Error::InvalidParams(format!("yaw gate {} must be positive", self.yaw_gate)));
        }
        for g in GainName::ALL {
            let v = self.get(g);
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{g} is not finite")));
            }
            let (lo, hi) = bounds.get(g);
            if v < lo || v > hi {
                return Err(Error::InvalidParams(format!("{g} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Per-gain `[lower, upper]` box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GainBounds(pub BTreeMap<GainName, (f64, f64)>);

impl Default for GainBounds {
    fn default() -> Self {
        use GainName::*;
        Self(BTreeMap::from([
            (KWheel, (0.0, 1.5)),
            (KAxVx, (-0.1, 0.1)),
            (KAyVy, (-0.1, 0.1)),
            (KWyWy, (0.2, 1.5)),
            (KWzWz, (0.2, 1.5)),
            (KAxDm, (-20.0, 0.0)),
            (KDwxDjxx, (-50.0, 0.0)),
            (KDwyDjyy, (-50.0, 0.0)),
            (KDwzDjzz, (-50.0, 0.0)),
        ]))
    }
}

impl GainBounds {
    /// Missing entries are unbounded.
    pub fn get(&self, name: GainName) -> (f64, f64) {
        self.0.get(&name).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
    }

    pub fn set(&mut self, name: GainName, lo: f64, hi: f64) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("bounds for {name} must satisfy lower < upper")));
        }
        self.0.insert(name, (lo, hi));
        Ok(())
    }

    /// Every gain at zero, allowed by any box that contains zero.
    pub fn unbounded() -> Self {
        Self(BTreeMap::new())
    }
}
