//! Twin-in-the-loop estimator.
//!
//! Each sample the twin predicts, the innovation drives a sparse linear
//! correction of its planar states, and the active stage applies one of
//! the sign-gated parameter laws. Deviations are pushed back to the twin
//! every sample. Only the [`Simulator`] contract is used here.

pub mod gains;
pub mod laws;

use serde::{Deserialize, Serialize};

pub use gains::{GainBounds, GainName, GainSet, MassLaw, SignSource, DEFAULT_YAW_GATE};
pub use laws::{
    correct_mass, correct_pitch_inertia, correct_roll_yaw_inertia, correct_states, gate_yaw_rate, mass_switch,
    AugmentedState, Innovation, LowPass, RateDifferentiator, AX_CUTOFF_HZ, DIFF_CUTOFF_HZ, PITCH_DIFF_CUTOFF_HZ,
};

use crate::error::{Error, Result};
use crate::scenario::metrics;
use crate::scenario::Experiment;
use crate::twin::{DriverInput, MeasurementVec, ParamDeviation, Simulator, Twin, TwinState};

/// Estimated parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Mass,
    Jxx,
    Jyy,
    Jzz,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Mass, Param::Jxx, Param::Jyy, Param::Jzz];

    pub fn of(self, d: &ParamDeviation) -> f64 {
        match self {
            Param::Mass => d.mass,
            Param::Jxx => d.jxx,
            Param::Jyy => d.jyy,
            Param::Jzz => d.jzz,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Mass => "mass",
            Param::Jxx => "jxx",
            Param::Jyy => "jyy",
            Param::Jzz => "jzz",
        }
    }
}

/// Which parameter law runs during a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    Mass,
    PitchInertia,
    RollYawInertia,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::Mass => "mass",
            StageKind::PitchInertia => "pitch-inertia",
            StageKind::RollYawInertia => "roll-yaw-inertia",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub kind: StageKind,
    /// Stage length, s. The last stage may be infinite.
    pub duration: f64,
    /// Correct only while the yaw rate is above the gate.
    #[serde(default)]
    pub cornering_only: bool,
}

/// Stages run back to back on time thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSchedule {
    pub stage: Vec<Stage>,
}

impl Default for StageSchedule {
    /// Mass on straight driving, then pitch inertia, then roll and yaw
    /// inertia while cornering.
    fn default() -> Self {
        Self {
            stage: vec![
                Stage { kind: StageKind::Mass, duration: 60.0, cornering_only: false },
                Stage { kind: StageKind::PitchInertia, duration: 40.0, cornering_only: false },
                Stage { kind: StageKind::RollYawInertia, duration: 30.0, cornering_only: true },
            ],
        }
    }
}

impl StageSchedule {
    /// A single stage for the whole run.
    pub fn only(kind: StageKind) -> Self {
        Self { stage: vec![Stage { kind, duration: f64::INFINITY, cornering_only: false }] }
    }

    /// No parameter corrections at all.
    pub fn none() -> Self {
        Self { stage: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage.iter().any(|s| !(s.duration > 0.0)) {
            return Err(Error::Config("stage durations must be positive".into()));
        }
        Ok(())
    }

    pub fn active(&self, t: f64) -> Option<&Stage> {
        let mut end = 0.0;
        for s in &self.stage {
            end += s.duration;
            if t < end {
                return Some(s);
            }
        }
        None
    }
}

/// One line of the estimator log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLog {
    pub time: f64,
    pub stage: Option<StageKind>,
    pub delta: ParamDeviation,
    pub vx: f64,
    pub vy: f64,
    pub residual: MeasurementVec,
}

impl SampleLog {
    pub fn sideslip(&self) -> f64 {
        self.vy.atan2(self.vx.abs().max(1e-6))
    }
}

/// Closed-loop estimator around any [`Simulator`].
#[derive(Debug, Clone)]
pub struct Estimator<S> {
    aug: AugmentedState<S>,
    gains: GainSet,
    schedule: StageSchedule,
    diff: RateDifferentiator,
    ax_filters: [LowPass; 2],
    dt: f64,
    k: usize,
    post_rates: Option<[f64; 3]>,
}

impl<S: Simulator> Estimator<S> {
    pub fn new(twin: S, initial: ParamDeviation, gains: GainSet, schedule: StageSchedule, dt: f64) -> Result<Self> {
        schedule.validate()?;
        if !(gains.yaw_gate > 0.0) {
            return Err(Error::InvalidParams("yaw gate must be positive".into()));
        }
        Ok(Self {
            aug: AugmentedState::new(twin, initial)?,
            gains,
            schedule,
            diff: RateDifferentiator::per_axis(dt, [DIFF_CUTOFF_HZ, PITCH_DIFF_CUTOFF_HZ, DIFF_CUTOFF_HZ]),
            ax_filters: [LowPass::new(dt, AX_CUTOFF_HZ), LowPass::new(dt, AX_CUTOFF_HZ)],
            dt,
            k: 0,
            post_rates: None,
        })
    }

    /// Override the cut-off of the longitudinal-acceleration low-pass.
    pub fn with_ax_cutoff(mut self, hz: f64) -> Self {
        self.ax_filters = [LowPass::new(self.dt, hz), LowPass::new(self.dt, hz)];
        self
    }

    /// Override the cut-offs of the angular-acceleration low-pass, per axis.
    pub fn with_diff_cutoffs(mut self, hz: [f64; 3]) -> Self {
        self.diff = RateDifferentiator::per_axis(self.dt, hz);
        self
    }

    pub fn state(&self) -> &AugmentedState<S> {
        &self.aug
    }

    /// Process sample `k`: innovation, corrections, parameter push, then the
    /// prediction to `k + 1`.
    pub fn update(&mut self, u: &DriverInput, y: &MeasurementVec) -> Result<SampleLog> {
        let time = self.k as f64 * self.dt;
        let pred = self.aug.twin.readout(u);
        let prior = [pred.wx, pred.wy, pred.wz];
        let (dw_m, dw_p) = self.diff.update([y.wx, y.wy, y.wz], prior, self.post_rates);
        let ax_m = self.ax_filters[0].update(y.ax);
        let ax_p = self.ax_filters[1].update(pred.ax);
        let innov = Innovation::new(*y, pred, dw_m, dw_p).with_ax_lp(ax_m, ax_p);

        let c = correct_states(&mut self.aug, &innov, &self.gains).map_err(|e| diverged(time, e))?;
        self.post_rates = Some([prior[0], prior[1] + c.wy, prior[2] + c.wz]);

        let stage = self.schedule.active(time).copied();
        let before = self.aug.delta;
        if let Some(s) = stage {
            match s.kind {
                StageKind::Mass => {
                    correct_mass(&mut self.aug, &innov, &self.gains);
                }
                StageKind::PitchInertia => {
                    correct_pitch_inertia(&mut self.aug, &innov, &self.gains);
                }
                StageKind::RollYawInertia => {
                    let wz = gate_yaw_rate(&innov, self.gains.inertia_sign);
                    if !s.cornering_only || wz.abs() > self.gains.yaw_gate {
                        correct_roll_yaw_inertia(&mut self.aug, &innov, &self.gains);
                    }
                }
            }
        }
        if self.aug.delta != before {
            self.aug.push_params().map_err(|e| diverged(time, e))?;
        }

        let (vx, vy) = self.aug.twin.planar_velocity();
        let log = SampleLog { time, stage: stage.map(|s| s.kind), delta: self.aug.delta, vx, vy, residual: innov.residual };
        self.aug.twin.step(u, self.dt)?;
        self.k += 1;
        Ok(log)
    }
}

fn diverged(time: f64, e: Error) -> Error {
    match e {
        Error::Diverged { .. } => e,
        other => Error::Diverged { time, reason: other.to_string() },
    }
}

/// Full estimator trajectory and the truth it is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRun {
    pub fs: f64,
    pub logs: Vec<SampleLog>,
    pub truth_delta: ParamDeviation,
    pub initial_delta: ParamDeviation,
}

impl EstimationRun {
    pub fn series(&self, p: Param) -> Vec<f64> {
        self.logs.iter().map(|l| p.of(&l.delta)).collect()
    }

    pub fn sideslip(&self) -> Vec<f64> {
        self.logs.iter().map(SampleLog::sideslip).collect()
    }

    pub fn final_delta(&self) -> ParamDeviation {
        self.logs.last().map(|l| l.delta).unwrap_or(self.initial_delta)
    }

    /// Final-window RMS error of `p`.
    pub fn rms(&self, p: Param) -> f64 {
        let truth = vec![p.of(&self.truth_delta); self.logs.len()];
        metrics::rms_last_window(&truth, &self.series(p), self.fs, metrics::RMS_WINDOW)
    }

    /// Final-window RMS error as a percentage of the true deviation.
    pub fn rms_percent(&self, p: Param) -> f64 {
        100.0 * self.rms(p) / p.of(&self.truth_delta).abs()
    }
}

/// Nominal twin of the estimator for this experiment, started rolling at
/// the speed read from the first wheel-encoder sample.
pub fn estimator_twin(exp: &Experiment) -> Result<Twin> {
    let cfg = exp.config();
    let twin_cfg = cfg.twin;
    let v0 = exp
        .observations
        .measurements
        .first()
        .map(|y| twin_cfg.wheel_radius * y.wheel.iter().sum::<f64>() / 4.0)
        .unwrap_or_else(|| cfg.initial_speed());
    Twin::new(cfg.estimator_params()?, twin_cfg, TwinState::rolling(v0, &twin_cfg))
}

/// Run the estimator over a whole experiment.
pub fn run_estimation(exp: &Experiment, gains: &GainSet, schedule: &StageSchedule, initial: ParamDeviation) -> Result<EstimationRun> {
    let twin = estimator_twin(exp)?;
    let truth_delta = ParamDeviation::between(&twin.nominal_params(), &exp.truth.params);
    let obs = &exp.observations;
    let mut est = Estimator::new(twin, initial, *gains, schedule.clone(), obs.dt)?;
    let mut logs = Vec::with_capacity(obs.len());
    for (u, y) in obs.inputs.iter().zip(&obs.measurements) {
        logs.push(est.update(u, y)?);
    }
    Ok(EstimationRun { fs: obs.fs(), logs, truth_delta, initial_delta: initial })
}
