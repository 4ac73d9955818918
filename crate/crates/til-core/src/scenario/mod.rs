//! Reproducible experiments: maneuvers, road, noise, the truth run of the
//! loaded vehicle, and the data the estimators are allowed to see.

pub mod maneuver;
pub mod metrics;
pub mod noise;
pub mod road;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use maneuver::{gen_inputs, DriverCommand, Longitudinal, ScenarioKind};
pub use noise::{apply_measurement_noise, NoiseSettings};
pub use road::{corrupt_road, gen_road_profile, RoadProfile};

use crate::error::{Error, Result};
use crate::rigid_body::{perturbed_params, LoadConfig, NamedLoad, VehicleParams};
use crate::twin::model::{self, GRAVITY};
use crate::twin::{DriverInput, MeasurementVec, TwinConfig, TwinState};

const STREAM_MANEUVER: u64 = 1;
const STREAM_ROAD: u64 = 2;
const STREAM_MEASUREMENT_NOISE: u64 = 3;
const STREAM_ROAD_NOISE: u64 = 4;

/// Independent random stream `stream` of experiment `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadSettings {
    /// Random-walk intensity, m/sqrt(s). Defaults by maneuver kind.
    pub sigma_z: Option<f64>,
}

/// The "real" vehicle: nominal chassis plus loads and unmodelled extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSettings {
    pub load: Vec<NamedLoad>,
    /// Aerodynamic drag multiplier the estimators do not know about.
    pub drag_scale: f64,
    /// Tire slip-stiffness multiplier the estimators do not know about.
    pub tire_stiffness_scale: f64,
}

impl Default for TruthSettings {
    fn default() -> Self {
        Self { load: LoadConfig::default_passengers().loads, drag_scale: 1.0, tire_stiffness_scale: 1.0 }
    }
}

impl TruthSettings {
    pub fn loads(&self) -> LoadConfig {
        LoadConfig { loads: self.load.clone() }
    }

    pub fn has_mismatch(&self) -> bool {
        self.drag_scale != 1.0 || self.tire_stiffness_scale != 1.0
    }
}

/// Which truth quantities the estimator's twin starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorKnowledge {
    pub mass: bool,
    pub cm: bool,
    pub jxx: bool,
    pub jyy: bool,
    pub jzz: bool,
}

impl Default for PriorKnowledge {
    fn default() -> Self {
        Self { mass: false, cm: true, jxx: false, jyy: false, jzz: false }
    }
}

impl PriorKnowledge {
    /// Nominal parameters with the known fields replaced by truth.
    pub fn apply(&self, nominal: &VehicleParams, truth: &VehicleParams) -> VehicleParams {
        let pick = |known: bool, t: f64, n: f64| if known { t } else { n };
        VehicleParams {
            mass: pick(self.mass, truth.mass, nominal.mass),
            cm: if self.cm { truth.cm } else { nominal.cm },
            jxx: pick(self.jxx, truth.jxx, nominal.jxx),
            jyy: pick(self.jyy, truth.jyy, nominal.jyy),
            jzz: pick(self.jzz, truth.jzz, nominal.jzz),
            ..*nominal
        }
    }
}

/// Scenario configuration as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Duration, s.
    pub duration: f64,
    /// Sampling rate, Hz.
    pub fs: f64,
    pub seed: u64,
    pub initial_speed: Option<f64>,
    pub road: RoadSettings,
    pub noise: NoiseSettings,
    pub truth: TruthSettings,
    pub prior: PriorKnowledge,
    /// Nominal (unloaded) vehicle.
    pub vehicle: VehicleParams,
    pub twin: TwinConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Urban,
            duration: 150.0,
            fs: 100.0,
            seed: 1,
            initial_speed: None,
            road: RoadSettings::default(),
            noise: NoiseSettings::default(),
            truth: TruthSettings::default(),
            prior: PriorKnowledge::default(),
            vehicle: VehicleParams::default(),
            twin: TwinConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, duration: f64) -> Self {
        Self { kind, duration, ..Self::default() }
    }

    /// Defaults for `kind`, including its default duration.
    pub fn preset(kind: ScenarioKind) -> Self {
        Self::new(kind, kind.default_duration())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs >= 100.0 && self.fs.is_finite()) {
            return Err(Error::Config(format!("fs = {} Hz; need at least 100 Hz", self.fs)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration = {} s", self.duration)));
        }
        let n = self.duration * self.fs;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::Config("duration * fs must be an integer".into()));
        }
        if let Some(v) = self.initial_speed {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config("initial_speed must be positive".into()));
            }
        }
        if let Some(s) = self.road.sigma_z {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config("road.sigma_z must be >= 0".into()));
            }
        }
        if !(self.truth.drag_scale > 0.0 && self.truth.tire_stiffness_scale > 0.0) {
            return Err(Error::Config("truth scales must be positive".into()));
        }
        self.noise.validate()?;
        self.vehicle.validate()?;
        self.twin.validate()?;
        self.truth.loads().validate()?;
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn sigma_z(&self) -> f64 {
        self.road.sigma_z.unwrap_or(match self.kind {
            ScenarioKind::ConstantSpeedRoughRoad => road::DEFAULT_SIGMA_Z,
            _ => 0.0,
        })
    }

    pub fn initial_speed(&self) -> f64 {
        self.initial_speed.unwrap_or(self.kind.initial_speed())
    }

    /// Loaded vehicle driven in the truth run.
    pub fn truth_params(&self) -> Result<VehicleParams> {
        perturbed_params(&self.vehicle, &self.truth.loads())
    }

    /// Parameters of the truth twin including the unmodelled extras.
    pub fn truth_twin_config(&self) -> TwinConfig {
        TwinConfig {
            drag_scale: self.twin.drag_scale * self.truth.drag_scale,
            tire_stiffness_scale: self.twin.tire_stiffness_scale * self.truth.tire_stiffness_scale,
            ..self.twin
        }
    }

    /// Nominal parameters handed to the estimators.
    pub fn estimator_params(&self) -> Result<VehicleParams> {
        let p = self.prior.apply(&self.vehicle, &self.truth_params()?);
        p.validate()?;
        Ok(p)
    }
}

/// Generated driver commands and road for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub commands: Vec<DriverCommand>,
    pub road: RoadProfile,
}

impl Scenario {
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let n = config.samples();
        let commands =
            gen_inputs(config.kind, config.duration, config.fs, &mut rng_stream(config.seed, STREAM_MANEUVER));
        let road = gen_road_profile(n, config.dt(), config.sigma_z(), &mut rng_stream(config.seed, STREAM_ROAD))?;
        Ok(Self { config: config.clone(), commands, road })
    }
}

/// PI speed controller with acceleration feed-forward.
#[derive(Debug, Clone, Default)]
struct SpeedController {
    integral: f64,
}

impl SpeedController {
    const KP: f64 = 1.5;
    const KI: f64 = 0.4;
    const MAX_TRACTION: f64 = 7000.0;
    const MAX_BRAKE: f64 = 16000.0;

    /// Returns (traction torque, brake torque).
    fn torques(&mut self, cmd: &Longitudinal, vx: f64, p: &VehicleParams, cfg: &TwinConfig, dt: f64) -> (f64, f64) {
        let Longitudinal::Track { speed, accel } = *cmd else {
            return (0.0, 0.0);
        };
        let err = speed - vx;
        self.integral = (self.integral + err * dt).clamp(-5.0, 5.0);
        let resist = 0.5 * cfg.air_density * cfg.drag_area * vx * vx.abs()
            + cfg.rolling_resistance * p.mass * GRAVITY;
        let force = p.mass * (accel + Self::KP * err + Self::KI * self.integral) + resist;
        let torque = force * cfg.wheel_radius;
        if torque >= 0.0 {
            (torque.min(Self::MAX_TRACTION), 0.0)
        } else {
            (0.0, (-torque).min(Self::MAX_BRAKE))
        }
    }
}

/// Trajectory of the loaded vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRun {
    pub dt: f64,
    pub params: VehicleParams,
    /// Applied inputs with the true road.
    pub inputs: Vec<DriverInput>,
    /// State at each sample, before the sample's input is applied.
    pub states: Vec<TwinState>,
    pub measurements: Vec<MeasurementVec>,
}

impl TruthRun {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sideslip(&self) -> Vec<f64> {
        self.states.iter().map(TwinState::sideslip).collect()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Drive the loaded vehicle through the scenario.
pub fn simulate_truth(scn: &Scenario) -> Result<TruthRun> {
    let cfg = &scn.config;
    let params = cfg.truth_params()?;
    let twin_cfg = cfg.truth_twin_config();
    let dt = cfg.dt();
    let n = scn.commands.len();
    let mut state = TwinState::rolling(cfg.initial_speed(), &twin_cfg);
    let mut driver = SpeedController::default();
    let mut run = TruthRun {
        dt,
        params,
        inputs: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        measurements: Vec::with_capacity(n),
    };
    for (k, cmd) in scn.commands.iter().enumerate() {
        let (traction, brake) = driver.torques(&cmd.longitudinal, state.vx, &params, &twin_cfg, dt);
        let input = DriverInput {
            steering: cmd.steering.clamp(-twin_cfg.steering_lock, twin_cfg.steering_lock),
            traction_torque: traction,
            brake_torque: brake,
            road_front: scn.road.front[k],
            road_rear: scn.road.rear(k, params.wheelbase, state.vx),
        };
        run.states.push(state);
        run.measurements.push(model::readout(&state, &params, &twin_cfg, &input));
        run.inputs.push(input);
        state = model::step(&state, &input, &params, &twin_cfg, dt).map_err(|e| match e {
            Error::Diverged { reason, .. } => Error::Diverged { time: (k + 1) as f64 * dt, reason },
            other => other,
        })?;
    }
    Ok(run)
}

/// What an estimator receives: applied commands, the noisy road and noisy
/// sensor readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub dt: f64,
    pub inputs: Vec<DriverInput>,
    pub measurements: Vec<MeasurementVec>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn fs(&self) -> f64 {
        1.0 / self.dt
    }
}

/// Corrupt the truth run into estimator inputs.
pub fn observe(scn: &Scenario, truth: &TruthRun) -> Result<Observations> {
    let cfg = &scn.config;
    let measurements = apply_measurement_noise(
        &truth.measurements,
        &cfg.noise,
        &mut rng_stream(cfg.seed, STREAM_MEASUREMENT_NOISE),
    )?;
    let road = corrupt_road(&scn.road, cfg.noise.road_eps, &mut rng_stream(cfg.seed, STREAM_ROAD_NOISE))?;
    let radius = cfg.twin.wheel_radius;
    let wheelbase = cfg.vehicle.wheelbase;
    let inputs = truth
        .inputs
        .iter()
        .zip(&measurements)
        .enumerate()
        .map(|(k, (u, y))| {
            // rear delay from the front wheel encoders
            let v = 0.5 * radius * (y.wheel[0] + y.wheel[1]);
            DriverInput { road_front: road.front[k], road_rear: road.rear(k, wheelbase, v), ..*u }
        })
        .collect();
    Ok(Observations { dt: truth.dt, inputs, measurements })
}

/// Scenario, truth run and observations in one place.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub truth: TruthRun,
    pub observations: Observations,
}

impl Experiment {
    pub fn run(config: &ScenarioConfig) -> Result<Self> {
        let scenario = Scenario::generate(config)?;
        let truth = simulate_truth(&scenario)?;
        let observations = observe(&scenario, &truth)?;
        Ok(Self { scenario, truth, observations })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.scenario.config
    }
}
