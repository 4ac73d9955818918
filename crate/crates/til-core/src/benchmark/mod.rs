//! Planar double-track observer used as the reference method.
//!
//! States `v_x`, `v_y`, `w_z` and `dM` with explicit Euler integration.
//! Tire slips are computed from the measured wheel rates, so no wheel
//! dynamics or torques are modelled. Corrections use the same sparse law
//! as the twin-in-the-loop estimator.

pub mod fit;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::{mass_switch, EstimationRun, LowPass, SampleLog, AX_CUTOFF_HZ, DEFAULT_YAW_GATE};
use crate::rigid_body::VehicleParams;
use crate::scenario::Experiment;
use crate::twin::model::GRAVITY;
use crate::twin::{MeasurementVec, PacejkaCoeffs, ParamDeviation};

/// Floor of the slip-ratio denominator, m/s.
pub const SLIP_FLOOR: f64 = 0.5;

const FITTED_TIRES: &str = include_str!("../../data/bench_tires.toml");

/// Tire coefficients identified against the twin's steady-state curves.
pub fn fitted_tires() -> PacejkaCoeffs {
    toml::from_str(FITTED_TIRES).expect("bundled tire fit is valid")
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BenchState {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
    pub dm: f64,
}

impl BenchState {
    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.wz.is_finite() && self.dm.is_finite()
    }
}

/// Steering-wheel angle and measured wheel rates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BenchInput {
    pub steering: f64,
    pub wheel: [f64; 4],
}

/// Gains of the benchmark: `[K_ax-vx, K_wz-wz, K_ax-dM, K_ay-vy]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchGains {
    pub k_ax_vx: f64,
    pub k_wz_wz: f64,
    pub k_ax_dm: f64,
    pub k_ay_vy: f64,
    pub yaw_gate: f64,
}

impl Default for BenchGains {
    fn default() -> Self {
        Self { k_ax_vx: 0.0, k_wz_wz: 0.0, k_ax_dm: 0.0, k_ay_vy: 0.0, yaw_gate: DEFAULT_YAW_GATE }
    }
}

impl BenchGains {
    pub fn from_theta(theta: &[f64]) -> Self {
        Self { k_ax_vx: theta[0], k_wz_wz: theta[1], k_ax_dm: theta[2], k_ay_vy: theta[3], ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalLoads {
    pub fz: [f64; 4],
    /// A wheel load went negative and was clamped to zero.
    pub saturated: bool,
}

/// Quasi-static wheel loads from measured CM accelerations.
pub fn estimate_normal_loads(ax: f64, ay: f64, p: &VehicleParams) -> NormalLoads {
    let m = p.mass;
    let (wb, h, t) = (p.wheelbase, p.cm_height(), p.track);
    let (share_f, share_r) = (p.lr() / wb, p.lf() / wb);
    let long = m * ax * h / wb;
    let front = m * GRAVITY * share_f - long;
    let rear = m * GRAVITY * share_r + long;
    let lat = m * ay * h / t;
    let mut fz = [
        0.5 * front - share_f * lat,
        0.5 * front + share_f * lat,
        0.5 * rear - share_r * lat,
        0.5 * rear + share_r * lat,
    ];
    let mut saturated = false;
    for f in fz.iter_mut() {
        if *f < 0.0 {
            *f = 0.0;
            saturated = true;
        }
    }
    NormalLoads { fz, saturated }
}

/// The planar model with its nominal parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchModel {
    pub params: VehicleParams,
    pub tires: PacejkaCoeffs,
    pub wheel_radius: f64,
    pub steering_ratio: f64,
}

/// Slip ratio and slip angle at each wheel.
pub fn wheel_slips(s: &BenchState, u: &BenchInput, model: &BenchModel) -> ([f64; 4], [f64; 4]) {
    let p = &model.params;
    let (lf, lr, half) = (p.lf(), p.lr(), 0.5 * p.track);
    let x = [lf, lf, -lr, -lr];
    let y = [half, -half, half, -half];
    let delta = u.steering / model.steering_ratio;
    let (sd, cd) = delta.sin_cos();
    let mut lambda = [0.0; 4];
    let mut alpha = [0.0; 4];
    for i in 0..4 {
        let vx = s.vx - s.wz * y[i];
        let vy = s.vy + s.wz * x[i];
        let (vl, vt) = if i < 2 { (vx * cd + vy * sd, -vx * sd + vy * cd) } else { (vx, vy) };
        let rw = model.wheel_radius * u.wheel[i];
        lambda[i] = (rw - vl) / rw.max(vl).max(SLIP_FLOOR);
        alpha[i] = vt.atan2(vl.abs().max(SLIP_FLOOR));
    }
    (lambda, alpha)
}

/// Body-frame force sums and yaw moment.
pub fn forces(s: &BenchState, u: &BenchInput, fz: &[f64; 4], model: &BenchModel) -> (f64, f64, f64) {
    let p = &model.params;
    let (lf, lr, half) = (p.lf(), p.lr(), 0.5 * p.track);
    let x = [lf, lf, -lr, -lr];
    let y = [half, -half, half, -half];
    let delta = u.steering / model.steering_ratio;
    let (sd, cd) = delta.sin_cos();
    let (lambda, alpha) = wheel_slips(s, u, model);
    let (mut fx_t, mut fy_t, mut mz) = (0.0, 0.0, 0.0);
    for i in 0..4 {
        let fx = model.tires.longitudinal.force(fz[i], lambda[i]);
        let fy = -model.tires.lateral.force(fz[i], alpha[i]);
        let (fxb, fyb) = if i < 2 { (fx * cd - fy * sd, fx * sd + fy * cd) } else { (fx, fy) };
        fx_t += fxb;
        fy_t += fyb;
        mz += x[i] * fyb - y[i] * fxb;
    }
    (fx_t, fy_t, mz)
}

/// Outputs `[a_x, a_y, w_z]`: specific forces and yaw rate.
pub fn bench_outputs(s: &BenchState, u: &BenchInput, fz: &[f64; 4], model: &BenchModel) -> [f64; 3] {
    let m = model.params.mass + s.dm;
    let (fx, fy, _) = forces(s, u, fz, model);
    [fx / m, fy / m, s.wz]
}

/// Explicit Euler prediction; `dM` is held.
pub fn bench_predict(s: &BenchState, u: &BenchInput, fz: &[f64; 4], model: &BenchModel, ts: f64) -> BenchState {
    let m = model.params.mass + s.dm;
    let (fx, fy, mz) = forces(s, u, fz, model);
    BenchState {
        vx: s.vx + ts * (fx / m + s.vy * s.wz),
        vy: s.vy + ts * (fy / m - s.vx * s.wz),
        wz: s.wz + ts * mz / model.params.jzz,
        dm: s.dm,
    }
}

/// Correction of the benchmark states from the `(a_x, a_y, w_z)` residual.
/// `ax_lp` holds the low-passed measured and predicted `a_x` used by the
/// mass law, as in the twin-in-the-loop estimator.
pub fn bench_correct(s: &BenchState, y: &MeasurementVec, predicted: &[f64; 3], ax_lp: [f64; 2], g: &BenchGains) -> BenchState {
    let r = [y.ax - predicted[0], y.ay - predicted[1], y.wz - predicted[2]];
    BenchState {
        vx: s.vx + g.k_ax_vx * r[0],
        vy: s.vy + g.k_ay_vy * r[1],
        wz: s.wz + g.k_wz_wz * r[2],
        dm: s.dm + g.k_ax_dm * mass_switch(ax_lp[0], y.wz, g.yaw_gate) * (ax_lp[0] - ax_lp[1]),
    }
}

/// Sequential benchmark observer.
#[derive(Debug, Clone)]
pub struct BenchObserver<'a> {
    pub model: &'a BenchModel,
    pub gains: BenchGains,
    pub state: BenchState,
    ts: f64,
    ax_filters: [LowPass; 2],
}

impl<'a> BenchObserver<'a> {
    pub fn new(model: &'a BenchModel, gains: BenchGains, state: BenchState, ts: f64) -> Self {
        Self { model, gains, state, ts, ax_filters: [LowPass::new(ts, AX_CUTOFF_HZ), LowPass::new(ts, AX_CUTOFF_HZ)] }
    }

    /// One sample: loads from the measured accelerations, outputs,
    /// correction, then the Euler step. Returns the corrected state and
    /// whether a load saturated.
    pub fn update(&mut self, u: &BenchInput, y: &MeasurementVec) -> Result<(BenchState, bool)> {
        let (s, model) = (&self.state, self.model);
        let eff = VehicleParams { mass: model.params.mass + s.dm, ..model.params };
        if !(eff.mass > 0.0) {
            return Err(Error::NonPhysical(format!("benchmark mass {} <= 0", eff.mass)));
        }
        let loads = estimate_normal_loads(y.ax, y.ay, &eff);
        let pred = bench_outputs(s, u, &loads.fz, model);
        let ax_lp = [self.ax_filters[0].update(y.ax), self.ax_filters[1].update(pred[0])];
        let post = bench_correct(s, y, &pred, ax_lp, &self.gains);
        let next = bench_predict(&post, u, &loads.fz, model, self.ts);
        if !next.is_finite() || next.vx.abs() > 150.0 || next.wz.abs() > 10.0 {
            return Err(Error::Diverged { time: f64::NAN, reason: "benchmark state out of bounds".into() });
        }
        self.state = next;
        Ok((post, loads.saturated))
    }
}

/// One unfiltered sample step, mainly for tests: the mass law sees the raw
/// `a_x`. Returns the corrected state at `k`, the next prediction and
/// whether a load saturated.
pub fn bench_step(
    s: &BenchState,
    u: &BenchInput,
    y: &MeasurementVec,
    model: &BenchModel,
    gains: &BenchGains,
    ts: f64,
) -> Result<(BenchState, BenchState, bool)> {
    let eff = VehicleParams { mass: model.params.mass + s.dm, ..model.params };
    if !(eff.mass > 0.0) {
        return Err(Error::NonPhysical(format!("benchmark mass {} <= 0", eff.mass)));
    }
    let loads = estimate_normal_loads(y.ax, y.ay, &eff);
    let pred = bench_outputs(s, u, &loads.fz, model);
    let post = bench_correct(s, y, &pred, [y.ax, pred[0]], gains);
    let next = bench_predict(&post, u, &loads.fz, model, ts);
    if !next.is_finite() || next.vx.abs() > 150.0 || next.wz.abs() > 10.0 {
        return Err(Error::Diverged { time: f64::NAN, reason: "benchmark state out of bounds".into() });
    }
    Ok((post, next, loads.saturated))
}

/// Benchmark trajectory in the same format as the twin-in-the-loop run.
pub fn run_benchmark(exp: &Experiment, model: &BenchModel, gains: &BenchGains, initial_dm: f64) -> Result<(EstimationRun, usize)> {
    let obs = &exp.observations;
    let ts = obs.dt;
    let v0 = obs
        .measurements
        .first()
        .map(|y| model.wheel_radius * y.wheel.iter().sum::<f64>() / 4.0)
        .unwrap_or_else(|| exp.config().initial_speed());
    let mut obsv = BenchObserver::new(model, *gains, BenchState { vx: v0, dm: initial_dm, ..Default::default() }, ts);
    let mut logs = Vec::with_capacity(obs.len());
    let mut saturations = 0;
    for (k, (u, y)) in obs.inputs.iter().zip(&obs.measurements).enumerate() {
        let bu = BenchInput { steering: u.steering, wheel: y.wheel };
        let (post, sat) = obsv.update(&bu, y).map_err(|e| match e {
            Error::Diverged { reason, .. } => Error::Diverged { time: k as f64 * ts, reason },
            other => other,
        })?;
        saturations += sat as usize;
        logs.push(SampleLog {
            time: k as f64 * ts,
            stage: None,
            delta: ParamDeviation { mass: post.dm, ..Default::default() },
            vx: post.vx,
            vy: post.vy,
            residual: MeasurementVec::default(),
        });
    }
    let truth_delta = ParamDeviation::between(&model.params, &exp.truth.params);
    let run = EstimationRun {
        fs: obs.fs(),
        logs,
        truth_delta,
        initial_delta: ParamDeviation { mass: initial_dm, ..Default::default() },
    };
    Ok((run, saturations))
}

impl BenchModel {
    /// Benchmark built from the estimator's nominal parameters.
    pub fn for_experiment(exp: &Experiment) -> Result<Self> {
        let cfg = exp.config();
        Ok(Self {
            params: cfg.estimator_params()?,
            tires: fitted_tires(),
            wheel_radius: cfg.twin.wheel_radius,
            steering_ratio: cfg.twin.steering_ratio,
        })
    }
}
