//! Double-track vehicle with sprung-body roll/pitch/heave, four unsprung
//! masses, wheel spin and first-order (relaxation-length) tire slip.
//!
//! Vertical quantities are deviations from the static equilibrium of the
//! current parameter set, so the all-zero state at rest is an exact fixed
//! point.

use serde::{Deserialize, Serialize};

use super::tire::{MagicFormula, PacejkaCoeffs};
use crate::error::{Error, Result};
use crate::rigid_body::VehicleParams;

pub const GRAVITY: f64 = 9.81;

/// Wheel order used everywhere: front-left, front-right, rear-left, rear-right.
pub const FL: usize = 0;
pub const FR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;

/// Physical bounds past which a step is reported as divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StateBounds {
    pub max_speed: f64,
    pub max_attitude: f64,
    pub max_yaw_rate: f64,
    pub max_wheel_rate: f64,
    pub suspension_travel: f64,
}

impl Default for StateBounds {
    fn default() -> Self {
        Self {
            max_speed: 150.0,
            max_attitude: 1.0,
            max_yaw_rate: 10.0,
            max_wheel_rate: 600.0,
            suspension_travel: 0.25,
        }
    }
}

/// Everything about the twin that is not a lumped rigid-body parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwinConfig {
    pub wheel_radius: f64,
    pub wheel_inertia: f64,
    pub unsprung_mass: f64,
    pub spring_front: f64,
    pub spring_rear: f64,
    pub damper_front: f64,
    pub damper_rear: f64,
    /// Anti-roll bar stiffness, N m/rad of body roll.
    pub anti_roll_front: f64,
    pub anti_roll_rear: f64,
    pub roll_center_height: f64,
    pub tire_vertical_stiffness: f64,
    pub relaxation_long: f64,
    pub relaxation_lat: f64,
    pub steering_ratio: f64,
    pub steering_lock: f64,
    pub air_density: f64,
    pub drag_area: f64,
    pub rolling_resistance: f64,
    /// Fraction of brake torque on the front axle; traction goes to the rear.
    pub brake_front_share: f64,
    pub tires: PacejkaCoeffs,
    /// Relative drop of the friction peak per unit relative load increase.
    pub load_sensitivity: f64,
    pub reference_load: f64,
    /// Wheel speed (rad/s) below which brake and rolling torques fade out.
    pub spin_smoothing: f64,
    /// RK4 substeps per call to [`step`].
    pub substeps: u32,
    /// Scales aerodynamic drag; 1 for the nominal model.
    pub drag_scale: f64,
    /// Scales tire slip stiffness (the `B` coefficients); 1 for the nominal model.
    pub tire_stiffness_scale: f64,
    pub bounds: StateBounds,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            wheel_radius: 0.36,
            wheel_inertia: 1.8,
            unsprung_mass: 45.0,
            spring_front: 42_000.0,
            spring_rear: 46_000.0,
            damper_front: 3_800.0,
            damper_rear: 3_800.0,
            anti_roll_front: 100_000.0,
            anti_roll_rear: 60_000.0,
            roll_center_height: 0.10,
            tire_vertical_stiffness: 280_000.0,
            relaxation_long: 0.25,
            relaxation_lat: 0.55,
            steering_ratio: 15.0,
            steering_lock: 9.0,
            air_density: 1.2,
            drag_area: 0.9,
            rolling_resistance: 0.012,
            brake_front_share: 0.6,
            tires: PacejkaCoeffs {
                longitudinal: MagicFormula::new(12.0, 1.65, 1.0, 0.0),
                lateral: MagicFormula::new(9.0, 1.45, 0.95, 0.2),
            },
            load_sensitivity: 0.08,
            reference_load: 5500.0,
            spin_smoothing: 1.0,
            substeps: 2,
            drag_scale: 1.0,
            tire_stiffness_scale: 1.0,
            bounds: StateBounds::default(),
        }
    }
}

impl TwinConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.wheel_radius,
            self.wheel_inertia,
            self.unsprung_mass,
            self.spring_front,
            self.spring_rear,
            self.tire_vertical_stiffness,
            self.relaxation_long,
            self.relaxation_lat,
            self.steering_ratio,
            self.reference_load,
            self.spin_smoothing,
            self.drag_scale,
            self.tire_stiffness_scale,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParams("twin constants must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.brake_front_share) {
            return Err(Error::InvalidParams("brake_front_share must lie in [0, 1]".into()));
        }
        if !self.tires.is_valid() {
            return Err(Error::InvalidParams("tire coefficients out of range".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParams("substeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Driver commands and road heights at one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DriverInput {
    /// Steering-wheel angle, rad.
    pub steering: f64,
    /// Total traction torque at the rear axle, N m.
    pub traction_torque: f64,
    /// Total brake torque, N m.
    pub brake_torque: f64,
    pub road_front: f64,
    pub road_rear: f64,
}

impl DriverInput {
    pub fn validate(&self, cfg: &TwinConfig) -> Result<()> {
        if self.traction_torque < 0.0 || self.brake_torque < 0.0 {
            return Err(Error::InvalidParams("torque demands must be non-negative".into()));
        }
        if self.steering.abs() > cfg.steering_lock {
            return Err(Error::InvalidParams(format!(
                "steering {} rad beyond lock {}",
                self.steering, cfg.steering_lock
            )));
        }
        Ok(())
    }
}

/// Sensor outputs in their fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementVec {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub wheel: [f64; 4],
}

impl MeasurementVec {
    pub const LEN: usize = 10;
    pub const NAMES: [&'static str; 10] =
        ["ax", "ay", "az", "wx", "wy", "wz", "w_fl", "w_fr", "w_rl", "w_rr"];

    pub fn to_array(&self) -> [f64; 10] {
        let w = self.wheel;
        [self.ax, self.ay, self.az, self.wx, self.wy, self.wz, w[0], w[1], w[2], w[3]]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        Self { ax: a[0], ay: a[1], az: a[2], wx: a[3], wy: a[4], wz: a[5], wheel: [a[6], a[7], a[8], a[9]] }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }
}

/// Internal states of the twin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinState {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub roll: f64,
    pub pitch: f64,
    pub heave: f64,
    pub wheel_rate: [f64; 4],
    /// Unsprung-mass vertical displacement from equilibrium.
    pub wheel_heave: [f64; 4],
    pub wheel_heave_rate: [f64; 4],
    /// Transient longitudinal slip.
    pub long_slip: [f64; 4],
    /// Transient lateral slip (tangent of the slip angle).
    pub lat_slip: [f64; 4],
}

pub const STATE_LEN: usize = 29;

impl TwinState {
    /// Steady straight-line rolling at speed `v`.
    pub fn rolling(v: f64, cfg: &TwinConfig) -> Self {
        Self { vx: v, wheel_rate: [v / cfg.wheel_radius; 4], ..Default::default() }
    }

    pub fn to_array(&self) -> [f64; STATE_LEN] {
        let mut a = [0.0; STATE_LEN];
        a[..9].copy_from_slice(&[
            self.vx, self.vy, self.vz, self.wx, self.wy, self.wz, self.roll, self.pitch, self.heave,
        ]);
        a[9..13].copy_from_slice(&self.wheel_rate);
        a[13..17].copy_from_slice(&self.wheel_heave);
        a[17..21].copy_from_slice(&self.wheel_heave_rate);
        a[21..25].copy_from_slice(&self.long_slip);
        a[25..29].copy_from_slice(&self.lat_slip);
        a
    }

    pub fn from_array(a: &[f64; STATE_LEN]) -> Self {
        let four = |o: usize| [a[o], a[o + 1], a[o + 2], a[o + 3]];
        Self {
            vx: a[0],
            vy: a[1],
            vz: a[2],
            wx: a[3],
            wy: a[4],
            wz: a[5],
            roll: a[6],
            pitch: a[7],
            heave: a[8],
            wheel_rate: four(9),
            wheel_heave: four(13),
            wheel_heave_rate: four(17),
            long_slip: four(21),
            lat_slip: four(25),
        }
    }

    /// Suspension compression at each corner given the CM geometry.
    pub fn suspension_deflection(&self, params: &VehicleParams) -> [f64; 4] {
        let corners = Corners::new(params);
        std::array::from_fn(|i| {
            self.wheel_heave[i]
                - (self.heave - corners.x[i] * self.pitch + corners.y[i] * self.roll)
        })
    }

    /// Sideslip angle of the CM velocity.
    pub fn sideslip(&self) -> f64 {
        self.vy.atan2(self.vx.abs().max(1e-6))
    }

    pub fn check_bounds(&self, params: &VehicleParams, cfg: &TwinConfig) -> std::result::Result<(), String> {
        let b = &cfg.bounds;
        let arr = self.to_array();
        if let Some(i) = arr.iter().position(|v| !v.is_finite()) {
            return Err(format!("state component {i} is not finite"));
        }
        if self.vx.abs() > b.max_speed || self.vy.abs() > b.max_speed {
            return Err(format!("speed ({:.1}, {:.1}) m/s out of bounds", self.vx, self.vy));
        }
        if self.roll.abs() > b.max_attitude || self.pitch.abs() > b.max_attitude {
            return Err(format!("attitude roll {:.3} pitch {:.3} rad", self.roll, self.pitch));
        }
        if self.wz.abs() > b.max_yaw_rate {
            return Err(format!("yaw rate {:.2} rad/s", self.wz));
        }
        if self.wheel_rate.iter().any(|w| w.abs() > b.max_wheel_rate) {
            return Err("wheel spin rate out of bounds".into());
        }
        if self.suspension_deflection(params).iter().any(|d| d.abs() > b.suspension_travel) {
            return Err("suspension travel exceeded".into());
        }
        Ok(())
    }
}

/// Corner positions relative to the CM.
#[derive(Debug, Clone, Copy)]
struct Corners {
    x: [f64; 4],
    y: [f64; 4],
}

impl Corners {
    fn new(p: &VehicleParams) -> Self {
        let (lf, lr) = (p.lf(), p.lr());
        let half = 0.5 * p.track;
        let dy = p.cm[1];
        Self { x: [lf, lf, -lr, -lr], y: [half - dy, -half - dy, half - dy, -half - dy] }
    }
}

/// Anti-roll bar forces on the sprung mass, one bar per axle.
fn anti_roll_forces(deflection: &[f64; 4], p: &VehicleParams, cfg: &TwinConfig) -> [f64; 4] {
    let t2 = p.track * p.track;
    let front = cfg.anti_roll_front / t2 * (deflection[FL] - deflection[FR]);
    let rear = cfg.anti_roll_rear / t2 * (deflection[RL] - deflection[RR]);
    [front, -front, rear, -rear]
}

/// Static tire loads: axle split by CM position, side split by lateral offset.
pub fn static_wheel_loads(p: &VehicleParams) -> [f64; 4] {
    let w = p.mass * GRAVITY;
    let front = w * p.lr() / p.wheelbase;
    let rear = w * p.lf() / p.wheelbase;
    let left = (0.5 * p.track + p.cm[1]) / p.track;
    [front * left, front * (1.0 - left), rear * left, rear * (1.0 - left)]
}

/// Tire curve at vertical load `fz`, including load sensitivity and the
/// stiffness scale.
#[inline]
pub fn load_scaled(mf: &MagicFormula, fz: f64, cfg: &TwinConfig) -> MagicFormula {
    let dfz = (fz - cfg.reference_load) / cfg.reference_load;
    MagicFormula {
        b: mf.b * cfg.tire_stiffness_scale,
        d: (mf.d * (1.0 - cfg.load_sensitivity * dfz)).max(0.1 * mf.d),
        ..*mf
    }
}

/// Quantities computed alongside the state derivative.
#[derive(Debug, Clone, Copy, Default)]
pub struct Auxiliary {
    /// Planar specific forces (sum of forces over mass).
    pub ax: f64,
    pub ay: f64,
    /// Sprung-mass vertical acceleration.
    pub az: f64,
    pub fz: [f64; 4],
    pub fx_tire: [f64; 4],
    pub fy_tire: [f64; 4],
}

/// Continuous-time right-hand side.
pub fn derivatives(
    s: &TwinState,
    u: &DriverInput,
    p: &VehicleParams,
    cfg: &TwinConfig,
) -> (TwinState, Auxiliary) {
    let corners = Corners::new(p);
    let m = p.mass;
    let mu = cfg.unsprung_mass;
    let ms = m - 4.0 * mu;
    let h = p.cm_height();
    let r = cfg.wheel_radius;
    let delta = u.steering / cfg.steering_ratio;
    let (sd, cd) = delta.sin_cos();
    let fz0 = static_wheel_loads(p);

    let spring = [cfg.spring_front, cfg.spring_front, cfg.spring_rear, cfg.spring_rear];
    let damper = [cfg.damper_front, cfg.damper_front, cfg.damper_rear, cfg.damper_rear];
    let road = [u.road_front, u.road_front, u.road_rear, u.road_rear];

    let mut d = TwinState::default();
    let mut aux = Auxiliary::default();

    let mut fx_body = 0.0;
    let mut fy_body = 0.0;
    let mut mz = 0.0;
    let mut susp_heave = 0.0;
    let mut susp_roll = 0.0;
    let mut susp_pitch = 0.0;

    let brake = [
        0.5 * cfg.brake_front_share * u.brake_torque,
        0.5 * cfg.brake_front_share * u.brake_torque,
        0.5 * (1.0 - cfg.brake_front_share) * u.brake_torque,
        0.5 * (1.0 - cfg.brake_front_share) * u.brake_torque,
    ];
    let drive = [0.0, 0.0, 0.5 * u.traction_torque, 0.5 * u.traction_torque];

    let deflection = s.suspension_deflection(p);
    let arb = anti_roll_forces(&deflection, p, cfg);

    for i in 0..4 {
        let (xi, yi) = (corners.x[i], corners.y[i]);

        // vertical
        let zb_rate = s.vz - xi * s.wy + yi * s.wx;
        let dfs = spring[i] * deflection[i]
            + damper[i] * (s.wheel_heave_rate[i] - zb_rate)
            + arb[i];
        let fz = (fz0[i] + cfg.tire_vertical_stiffness * (road[i] - s.wheel_heave[i])).max(0.0);
        let dft = fz - fz0[i];
        d.wheel_heave[i] = s.wheel_heave_rate[i];
        d.wheel_heave_rate[i] = (dft - dfs) / mu;
        susp_heave += dfs;
        susp_roll += yi * dfs;
        susp_pitch -= xi * dfs;

        // contact-patch velocity in the wheel frame
        let vwx = s.vx - s.wz * yi;
        let vwy = s.vy + s.wz * xi;
        let (vl, vt) = if i < 2 { (vwx * cd + vwy * sd, -vwx * sd + vwy * cd) } else { (vwx, vwy) };

        let kappa = s.long_slip[i];
        let alpha = s.lat_slip[i];
        d.long_slip[i] = ((r * s.wheel_rate[i] - vl) - vl.abs() * kappa) / cfg.relaxation_long;
        d.lat_slip[i] = (vt - vl.abs() * alpha) / cfg.relaxation_lat;

        let fx = load_scaled(&cfg.tires.longitudinal, fz, cfg).force(fz, kappa);
        let fy = -load_scaled(&cfg.tires.lateral, fz, cfg).force(fz, alpha.atan());
        aux.fz[i] = fz;
        aux.fx_tire[i] = fx;
        aux.fy_tire[i] = fy;

        let (fxb, fyb) = if i < 2 { (fx * cd - fy * sd, fx * sd + fy * cd) } else { (fx, fy) };
        fx_body += fxb;
        fy_body += fyb;
        mz += xi * fyb - yi * fxb;

        let spin = (s.wheel_rate[i] / cfg.spin_smoothing).tanh();
        let resist = brake[i] * spin + r * cfg.rolling_resistance * fz * spin;
        d.wheel_rate[i] = (drive[i] - resist - r * fx) / cfg.wheel_inertia;
    }

    let drag = 0.5 * cfg.air_density * cfg.drag_area * cfg.drag_scale * s.vx * s.vx.abs();
    aux.ax = (fx_body - drag) / m;
    aux.ay = fy_body / m;

    d.vx = aux.ax + s.wz * s.vy;
    d.vy = aux.ay - s.wz * s.vx;
    d.wz = mz / p.jzz;

    // Lateral force acts on the body at the roll centre, longitudinal force
    // at the ground. Gravity destabilises a tilted body.
    let roll_arm = h - cfg.roll_center_height;
    d.wx = (susp_roll + roll_arm * fy_body + ms * GRAVITY * roll_arm * s.roll) / p.jxx;
    d.wy = (susp_pitch - h * fx_body + ms * GRAVITY * h * s.pitch) / p.jyy;
    d.vz = susp_heave / ms;
    aux.az = d.vz;

    d.roll = s.wx;
    d.pitch = s.wy;
    d.heave = s.vz;

    (d, aux)
}

fn axpy(y: &[f64; STATE_LEN], a: f64, x: &[f64; STATE_LEN]) -> [f64; STATE_LEN] {
    std::array::from_fn(|i| y[i] + a * x[i])
}

/// One fixed-step RK4 update over `h` with the input held constant.
fn rk4(s: &TwinState, u: &DriverInput, p: &VehicleParams, cfg: &TwinConfig, h: f64) -> TwinState {
    let y = s.to_array();
    let f = |a: &[f64; STATE_LEN]| derivatives(&TwinState::from_array(a), u, p, cfg).0.to_array();
    let k1 = f(&y);
    let k2 = f(&axpy(&y, 0.5 * h, &k1));
    let k3 = f(&axpy(&y, 0.5 * h, &k2));
    let k4 = f(&axpy(&y, h, &k3));
    let next: [f64; STATE_LEN] =
        std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    TwinState::from_array(&next)
}

/// Advance the model by one sample of length `dt`.
pub fn step(
    state: &TwinState,
    input: &DriverInput,
    params: &VehicleParams,
    cfg: &TwinConfig,
    dt: f64,
) -> Result<TwinState> {
    if !(dt > 0.0 && dt <= 0.01 + 1e-12) {
        return Err(Error::InvalidParams(format!("dt = {dt} outside (0, 0.01] s")));
    }
    let h = dt / cfg.substeps as f64;
    let mut s = *state;
    for _ in 0..cfg.substeps {
        s = rk4(&s, input, params, cfg, h);
    }
    s.check_bounds(params, cfg)
        .map_err(|reason| Error::Diverged { time: f64::NAN, reason })?;
    Ok(s)
}

/// Sensor model: IMU at the CM (specific force, so tilt leaks gravity into
/// the horizontal channels) and wheel encoders.
pub fn readout(
    state: &TwinState,
    params: &VehicleParams,
    cfg: &TwinConfig,
    input: &DriverInput,
) -> MeasurementVec {
    let (_, aux) = derivatives(state, input, params, cfg);
    MeasurementVec {
        ax: aux.ax - GRAVITY * state.pitch.sin(),
        ay: aux.ay + GRAVITY * state.roll.sin(),
        az: aux.az + GRAVITY * state.roll.cos() * state.pitch.cos(),
        wx: state.wx,
        wy: state.wy,
        wz: state.wz,
        wheel: state.wheel_rate,
    }
}

/// Kinetic plus elastic energy, minus the destabilising gravity term of
/// the tilted sprung mass. Tire slip states store no energy in this sum.
pub fn mechanical_energy(s: &TwinState, p: &VehicleParams, cfg: &TwinConfig) -> f64 {
    let ms = p.mass - 4.0 * cfg.unsprung_mass;
    let roll_arm = p.cm_height() - cfg.roll_center_height;
    let h = p.cm_height();
    let mut e = 0.5 * p.mass * (s.vx * s.vx + s.vy * s.vy)
        + 0.5 * ms * s.vz * s.vz
        + 0.5 * (p.jxx * s.wx * s.wx + p.jyy * s.wy * s.wy + p.jzz * s.wz * s.wz)
        - 0.5 * ms * GRAVITY * (roll_arm * s.roll * s.roll + h * s.pitch * s.pitch);
    let defl = s.suspension_deflection(p);
    let t2 = p.track * p.track;
    e += 0.5 * cfg.anti_roll_front / t2 * (defl[FL] - defl[FR]).powi(2)
        + 0.5 * cfg.anti_roll_rear / t2 * (defl[RL] - defl[RR]).powi(2);
    let spring = [cfg.spring_front, cfg.spring_front, cfg.spring_rear, cfg.spring_rear];
    for i in 0..4 {
        e += 0.5 * cfg.wheel_inertia * s.wheel_rate[i] * s.wheel_rate[i]
            + 0.5 * cfg.unsprung_mass * s.wheel_heave_rate[i] * s.wheel_heave_rate[i]
            + 0.5 * spring[i] * defl[i].powi(2)
            + 0.5 * cfg.tire_vertical_stiffness * s.wheel_heave[i] * s.wheel_heave[i];
    }
    e
}
