//! Digital-twin vehicle simulator.
//!
//! Estimators only see the [`Simulator`] trait: step, readout, additive
//! injection into a fixed subset of correctable states, and parameter
//! deviations. The equations in [`model`] stay behind it.

pub mod model;
pub mod tire;

use serde::{Deserialize, Serialize};

pub use model::{DriverInput, MeasurementVec, StateBounds, TwinConfig, TwinState};
pub use tire::{MagicFormula, PacejkaCoeffs};

use crate::error::{Error, Result};
use crate::rigid_body::VehicleParams;

/// Deviations of the estimated parameters from the twin's nominal set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamDeviation {
    pub mass: f64,
    pub jxx: f64,
    pub jyy: f64,
    pub jzz: f64,
}

impl ParamDeviation {
    pub fn apply(&self, nominal: &VehicleParams) -> Result<VehicleParams> {
        if ![self.mass, self.jxx, self.jyy, self.jzz].iter().all(|v| v.is_finite()) {
            return Err(Error::NonPhysical("parameter deviation is not finite".into()));
        }
        let p = VehicleParams {
            mass: nominal.mass + self.mass,
            jxx: nominal.jxx + self.jxx,
            jyy: nominal.jyy + self.jyy,
            jzz: nominal.jzz + self.jzz,
            ..*nominal
        };
        p.validate()?;
        Ok(p)
    }

    /// Deviation that turns `nominal` into `actual` on the estimated axes.
    pub fn between(nominal: &VehicleParams, actual: &VehicleParams) -> Self {
        Self {
            mass: actual.mass - nominal.mass,
            jxx: actual.jxx - nominal.jxx,
            jyy: actual.jyy - nominal.jyy,
            jzz: actual.jzz - nominal.jzz,
        }
    }
}

/// Additive increment on the correctable states. Zero fields are no-ops.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateCorrection {
    pub vx: f64,
    pub vy: f64,
    pub wy: f64,
    pub wz: f64,
    pub wheel: [f64; 4],
}

impl StateCorrection {
    pub fn is_zero(&self) -> bool {
        self.vx == 0.0
            && self.vy == 0.0
            && self.wy == 0.0
            && self.wz == 0.0
            && self.wheel.iter().all(|w| *w == 0.0)
    }
}

/// Black-box contract between an estimator and its plant replica.
pub trait Simulator {
    /// Advance one sample (a-priori prediction).
    fn step(&mut self, input: &DriverInput, dt: f64) -> Result<()>;

    /// Sensor outputs at the current state.
    fn readout(&self, input: &DriverInput) -> MeasurementVec;

    /// Add a correction to the correctable states.
    fn inject(&mut self, correction: &StateCorrection) -> Result<()>;

    /// Use `nominal + deviation` from now on.
    fn set_params(&mut self, deviation: &ParamDeviation) -> Result<()>;

    fn nominal_params(&self) -> VehicleParams;

    fn effective_params(&self) -> VehicleParams;

    /// Longitudinal and lateral CM velocity, enough to recover sideslip.
    fn planar_velocity(&self) -> (f64, f64);
}

/// The in-repo twin: [`model`] equations plus owned state and parameters.
#[derive(Debug, Clone)]
pub struct Twin {
    state: TwinState,
    nominal: VehicleParams,
    effective: VehicleParams,
    config: TwinConfig,
    time: f64,
}

impl Twin {
    pub fn new(nominal: VehicleParams, config: TwinConfig, initial: TwinState) -> Result<Self> {
        nominal.validate()?;
        config.validate()?;
        if nominal.mass - 4.0 * config.unsprung_mass <= 0.0 {
            return Err(Error::NonPhysical("sprung mass would be non-positive".into()));
        }
        Ok(Self { state: initial, nominal, effective: nominal, config, time: 0.0 })
    }

    pub fn state(&self) -> &TwinState {
        &self.state
    }

    pub fn config(&self) -> &TwinConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

impl Simulator for Twin {
    fn step(&mut self, input: &DriverInput, dt: f64) -> Result<()> {
        input.validate(&self.config)?;
        self.state = model::step(&self.state, input, &self.effective, &self.config, dt).map_err(
            |e| match e {
                Error::Diverged { reason, .. } => Error::Diverged { time: self.time + dt, reason },
                other => other,
            },
        )?;
        self.time += dt;
        Ok(())
    }

    fn readout(&self, input: &DriverInput) -> MeasurementVec {
        model::readout(&self.state, &self.effective, &self.config, input)
    }

    fn inject(&mut self, c: &StateCorrection) -> Result<()> {
        if c.is_zero() {
            return Ok(());
        }
        let mut next = self.state;
        next.vx += c.vx;
        next.vy += c.vy;
        next.wy += c.wy;
        next.wz += c.wz;
        for (w, dw) in next.wheel_rate.iter_mut().zip(c.wheel) {
            *w += dw;
        }
        if next.wheel_rate.iter().any(|w| *w < 0.0) && self.state.wheel_rate.iter().all(|w| *w >= 0.0) {
            return Err(Error::InvalidCorrection("wheel rate driven negative".into()));
        }
        next.check_bounds(&self.effective, &self.config).map_err(Error::InvalidCorrection)?;
        self.state = next;
        Ok(())
    }

    fn set_params(&mut self, deviation: &ParamDeviation) -> Result<()> {
        let p = deviation.apply(&self.nominal)?;
        if p.mass - 4.0 * self.config.unsprung_mass <= 0.0 {
            return Err(Error::NonPhysical("sprung mass would be non-positive".into()));
        }
        self.effective = p;
        Ok(())
    }

    fn nominal_params(&self) -> VehicleParams {
        self.nominal
    }

    fn effective_params(&self) -> VehicleParams {
        self.effective
    }

    fn planar_velocity(&self) -> (f64, f64) {
        (self.state.vx, self.state.vy)
    }
}

#[cfg(test)]
mod tests;
