use std::f64::consts::PI;

use crate::error::Result;
use crate::twin::{MeasurementVec, ParamDeviation, Simulator, StateCorrection};

use super::gains::{GainSet, MassLaw, SignSource};

/// Cut-off of the low-pass applied after differentiating angular rates, Hz.
pub const DIFF_CUTOFF_HZ: f64 = 1.5;
/// Same for the pitch axis, whose road-driven excitation sits higher.
pub const PITCH_DIFF_CUTOFF_HZ: f64 = 5.0;
/// Cut-off of the low-pass on the longitudinal acceleration fed to the
/// mass law, Hz.
pub const AX_CUTOFF_HZ: f64 = 0.5;

/// First-order low-pass with unit DC gain; starts at the first sample.
#[derive(Debug, Clone)]
pub struct LowPass {
    alpha: f64,
    state: Option<f64>,
}

impl LowPass {
    pub fn new(dt: f64, cutoff_hz: f64) -> Self {
        let tau = 1.0 / (2.0 * PI * cutoff_hz);
        Self { alpha: dt / (dt + tau), state: None }
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let y = match self.state {
            Some(s) => s + self.alpha * (x - s),
            None => x,
        };
        self.state = Some(y);
        y
    }
}

/// Twin plus parameter deviations with constant fictitious dynamics.
#[derive(Debug, Clone)]
pub struct AugmentedState<S> {
    pub twin: S,
    pub delta: ParamDeviation,
}

impl<S: Simulator> AugmentedState<S> {
    pub fn new(twin: S, delta: ParamDeviation) -> Result<Self> {
        let mut aug = Self { twin, delta };
        aug.push_params()?;
        Ok(aug)
    }

    /// Hand the current deviations to the twin.
    pub fn push_params(&mut self) -> Result<()> {
        self.twin.set_params(&self.delta)
    }
}

/// Residuals at one sample, in measurement order, plus angular
/// accelerations of both streams.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Innovation {
    pub measured: MeasurementVec,
    pub predicted: MeasurementVec,
    /// `measured - predicted`.
    pub residual: MeasurementVec,
    /// Measured angular acceleration about x, y, z.
    pub dw_measured: [f64; 3],
    /// A-priori angular acceleration of the twin.
    pub dw_predicted: [f64; 3],
    /// Low-passed longitudinal acceleration, measured and predicted.
    pub ax_lp: [f64; 2],
}

impl Innovation {
    pub fn new(measured: MeasurementVec, predicted: MeasurementVec, dw_measured: [f64; 3], dw_predicted: [f64; 3]) -> Self {
        Self {
            measured,
            predicted,
            residual: measured.sub(&predicted),
            dw_measured,
            dw_predicted,
            ax_lp: [measured.ax, predicted.ax],
        }
    }

    pub fn with_ax_lp(self, measured: f64, predicted: f64) -> Self {
        Self { ax_lp: [measured, predicted], ..self }
    }

    pub fn dw_residual(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.dw_measured[i] - self.dw_predicted[i])
    }
}

/// Backward difference followed by a first-order low-pass, run on the
/// measured rates and on the twin's a-priori rates with identical filters.
#[derive(Debug, Clone)]
pub struct RateDifferentiator {
    dt: f64,
    alpha: [f64; 3],
    prev_measured: Option<[f64; 3]>,
    measured: [f64; 3],
    predicted: [f64; 3],
}

impl RateDifferentiator {
    pub fn new(dt: f64, cutoff_hz: f64) -> Self {
        Self::per_axis(dt, [cutoff_hz; 3])
    }

    /// Separate cut-offs for the x, y and z rates.
    pub fn per_axis(dt: f64, cutoff_hz: [f64; 3]) -> Self {
        let alpha = cutoff_hz.map(|hz| dt / (dt + 1.0 / (2.0 * PI * hz)));
        Self { dt, alpha, prev_measured: None, measured: [0.0; 3], predicted: [0.0; 3] }
    }

    /// `w_meas` is the measured rate at `k`, `w_prior` the twin rate after
    /// the prediction step and `w_post_prev` the corrected twin rate at
    /// `k - 1`. The twin difference therefore excludes injections.
    pub fn update(&mut self, w_meas: [f64; 3], w_prior: [f64; 3], w_post_prev: Option<[f64; 3]>) -> ([f64; 3], [f64; 3]) {
        let raw_m = match self.prev_measured {
            Some(p) => std::array::from_fn(|i| (w_meas[i] - p[i]) / self.dt),
            None => [0.0; 3],
        };
        let raw_p = match w_post_prev {
            Some(p) => std::array::from_fn(|i| (w_prior[i] - p[i]) / self.dt),
            None => [0.0; 3],
        };
        for i in 0..3 {
            self.measured[i] += self.alpha[i] * (raw_m[i] - self.measured[i]);
            self.predicted[i] += self.alpha[i] * (raw_p[i] - self.predicted[i]);
        }
        self.prev_measured = Some(w_meas);
        (self.measured, self.predicted)
    }
}

/// Linear sparse state correction `gain x residual` on matched channels.
pub fn state_correction(innov: &Innovation, gains: &GainSet) -> StateCorrection {
    let r = &innov.residual;
    StateCorrection {
        vx: gains.k_ax_vx * r.ax,
        vy: gains.k_ay_vy * r.ay,
        wy: gains.k_wy_wy * r.wy,
        wz: gains.k_wz_wz * r.wz,
        wheel: r.wheel.map(|w| gains.k_wheel * w),
    }
}

pub fn correct_states<S: Simulator>(aug: &mut AugmentedState<S>, innov: &Innovation, gains: &GainSet) -> Result<StateCorrection> {
    let c = state_correction(innov, gains);
    aug.twin.inject(&c)?;
    Ok(c)
}

/// Switching factor of the mass law: zero while cornering, otherwise the
/// sign of the measured longitudinal acceleration (zero counts as positive).
pub fn mass_switch(ax: f64, wz: f64, yaw_gate: f64) -> f64 {
    if wz.abs() > yaw_gate {
        0.0
    } else if ax >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn mass_increment(innov: &Innovation, gains: &GainSet) -> f64 {
    let [ax_m, ax_p] = innov.ax_lp;
    let mut eps = mass_switch(ax_m, innov.measured.wz, gains.yaw_gate);
    if eps == 0.0 {
        return 0.0;
    }
    if gains.mass_law == MassLaw::Unsigned {
        eps = 1.0;
    }
    gains.k_ax_dm * eps * (ax_m - ax_p)
}

pub fn correct_mass<S>(aug: &mut AugmentedState<S>, innov: &Innovation, gains: &GainSet) -> f64 {
    let d = mass_increment(innov, gains);
    aug.delta.mass += d;
    d
}

/// Sign with `sgn(0) = 0`.
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn inertia_increment(gain: f64, innov: &Innovation, axis: usize, source: SignSource) -> f64 {
    let excitation = match source {
        SignSource::Measured => innov.dw_measured[axis],
        SignSource::Twin => innov.dw_predicted[axis],
        SignSource::Blend => innov.dw_measured[axis] + innov.dw_predicted[axis],
    };
    gain * innov.dw_residual()[axis] * sgn(excitation)
}

/// Yaw rate that opens the cornering gate of the roll/yaw stage.
pub fn gate_yaw_rate(innov: &Innovation, source: SignSource) -> f64 {
    match source {
        SignSource::Measured => innov.measured.wz,
        SignSource::Twin => innov.predicted.wz,
        SignSource::Blend => 0.5 * (innov.measured.wz + innov.predicted.wz),
    }
}

/// Increments of `(dJxx, dJzz)`.
pub fn roll_yaw_increments(innov: &Innovation, gains: &GainSet) -> (f64, f64) {
    (
        inertia_increment(gains.k_dwx_djxx, innov, 0, gains.inertia_sign),
        inertia_increment(gains.k_dwz_djzz, innov, 2, gains.inertia_sign),
    )
}

pub fn correct_roll_yaw_inertia<S>(aug: &mut AugmentedState<S>, innov: &Innovation, gains: &GainSet) -> (f64, f64) {
    let (dx, dz) = roll_yaw_increments(innov, gains);
    aug.delta.jxx += dx;
    aug.delta.jzz += dz;
    (dx, dz)
}

pub fn pitch_increment(innov: &Innovation, gains: &GainSet) -> f64 {
    inertia_increment(gains.k_dwy_djyy, innov, 1, gains.inertia_sign)
}

pub fn correct_pitch_inertia<S>(aug: &mut AugmentedState<S>, innov: &Innovation, gains: &GainSet) -> f64 {
    let d = pitch_increment(innov, gains);
    aug.delta.jyy += d;
    d
}
