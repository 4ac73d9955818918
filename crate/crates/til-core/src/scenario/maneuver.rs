use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Maneuver families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Urban,
    SweptSteer,
    ConstantSpeedRoughRoad,
    CircuitLike,
    LaneChangeBraking,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Urban,
        ScenarioKind::SweptSteer,
        ScenarioKind::ConstantSpeedRoughRoad,
        ScenarioKind::CircuitLike,
        ScenarioKind::LaneChangeBraking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Urban => "urban",
            ScenarioKind::SweptSteer => "swept-steer",
            ScenarioKind::ConstantSpeedRoughRoad => "constant-speed-rough-road",
            ScenarioKind::CircuitLike => "circuit-like",
            ScenarioKind::LaneChangeBraking => "lane-change-braking",
        }
    }

    /// Default experiment length, s.
    pub fn default_duration(self) -> f64 {
        match self {
            ScenarioKind::Urban => 150.0,
            ScenarioKind::SweptSteer => 180.0,
            ScenarioKind::ConstantSpeedRoughRoad => 30.0,
            ScenarioKind::CircuitLike => 120.0,
            ScenarioKind::LaneChangeBraking => 90.0,
        }
    }

    /// Speed at `t = 0`, m/s.
    pub fn initial_speed(self) -> f64 {
        match self {
            ScenarioKind::Urban => 6.0,
            ScenarioKind::SweptSteer => 20.0,
            ScenarioKind::ConstantSpeedRoughRoad => 15.0,
            ScenarioKind::CircuitLike => 15.0,
            ScenarioKind::LaneChangeBraking => 22.0,
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Longitudinal part of a driver command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Longitudinal {
    /// Follow a reference speed with the given feed-forward acceleration.
    Track { speed: f64, accel: f64 },
    /// No torque at all.
    Coast,
}

/// What the driver wants at one sample. The truth run turns this into
/// torques with a speed controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverCommand {
    /// Steering-wheel angle, rad.
    pub steering: f64,
    pub longitudinal: Longitudinal,
}

/// Amplitude of the swept-steer hand-wheel sine, rad.
pub const SWEEP_AMPLITUDE: f64 = 0.5;
/// Final frequency of the swept-steer chirp, Hz.
pub const SWEEP_END_HZ: f64 = 4.0;

fn sample_count(duration: f64, fs: f64) -> usize {
    if duration <= 0.0 {
        0
    } else {
        (duration * fs).round() as usize
    }
}

/// Reference-speed builder working sample by sample.
struct Builder {
    dt: f64,
    n: usize,
    speed: f64,
    out: Vec<DriverCommand>,
}

impl Builder {
    fn new(n: usize, fs: f64, speed: f64) -> Self {
        Self { dt: 1.0 / fs, n, speed, out: Vec::with_capacity(n) }
    }

    fn full(&self) -> bool {
        self.out.len() >= self.n
    }

    fn push(&mut self, steering: f64, longitudinal: Longitudinal) {
        if !self.full() {
            self.out.push(DriverCommand { steering, longitudinal });
        }
    }

    /// Ramp the reference speed to `target` at `|accel|`.
    fn ramp(&mut self, target: f64, accel: f64) {
        let a = accel.abs() * (target - self.speed).signum();
        let steps = ((target - self.speed).abs() / (accel.abs() * self.dt)).ceil() as usize;
        for _ in 0..steps {
            self.speed += a * self.dt;
            self.push(0.0, Longitudinal::Track { speed: self.speed, accel: a });
        }
        self.speed = target;
    }

    /// Hold the current speed while steering with `steer(t)`.
    fn hold(&mut self, duration: f64, steer: impl Fn(f64) -> f64) {
        let steps = (duration / self.dt).round() as usize;
        for k in 0..steps {
            let t = k as f64 * self.dt;
            self.push(steer(t), Longitudinal::Track { speed: self.speed, accel: 0.0 });
        }
    }

    fn coast(&mut self, duration: f64) {
        let steps = (duration / self.dt).round() as usize;
        for _ in 0..steps {
            self.push(0.0, Longitudinal::Coast);
        }
    }
}

/// Raised-cosine pulse of the given length: 0 at both ends, 1 in the middle.
fn bump(t: f64, len: f64) -> f64 {
    if (0.0..=len).contains(&t) {
        0.5 * (1.0 - (2.0 * PI * t / len).cos())
    } else {
        0.0
    }
}

/// Driver command stream for a maneuver.
pub fn gen_inputs(kind: ScenarioKind, duration: f64, fs: f64, rng: &mut ChaCha8Rng) -> Vec<DriverCommand> {
    let n = sample_count(duration, fs);
    let mut b = Builder::new(n, fs, kind.initial_speed());
    match kind {
        ScenarioKind::Urban => {
            while !b.full() {
                let v_hi = rng.random_range(12.0..17.0);
                b.ramp(v_hi, rng.random_range(1.6..2.6));
                b.coast(rng.random_range(0.3..0.8));
                let v_lo = rng.random_range(4.0..7.0);
                b.ramp(v_lo, rng.random_range(2.0..3.2));
                if rng.random_bool(0.4) {
                    let amp = rng.random_range(1.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    let len = rng.random_range(3.0..4.5);
                    b.hold(len, |t| amp * bump(t, len));
                } else {
                    b.hold(rng.random_range(0.3..0.8), |_| 0.0);
                }
            }
        }
        ScenarioKind::SweptSteer => {
            let rate = SWEEP_END_HZ / duration.max(f64::MIN_POSITIVE);
            let speed = b.speed;
            for k in 0..n {
                let t = k as f64 / fs;
                let steering = SWEEP_AMPLITUDE * (PI * rate * t * t).sin();
                b.push(steering, Longitudinal::Track { speed, accel: 0.0 });
            }
        }
        ScenarioKind::ConstantSpeedRoughRoad => {
            b.hold(duration, |_| 0.0);
        }
        ScenarioKind::CircuitLike => {
            while !b.full() {
                b.ramp(rng.random_range(24.0..30.0), rng.random_range(1.5..2.5));
                b.ramp(rng.random_range(11.0..15.0), rng.random_range(4.0..6.0));
                let amp = rng.random_range(0.8..1.6) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let len = rng.random_range(4.0..7.0);
                b.hold(len, |t| amp * bump(t, len));
            }
        }
        ScenarioKind::LaneChangeBraking => {
            while !b.full() {
                b.hold(rng.random_range(1.0..2.0), |_| 0.0);
                // double lane change: one full steering sine period
                let amp = rng.random_range(0.3..0.5);
                let len = rng.random_range(2.5..3.5);
                b.hold(len, |t| amp * (2.0 * PI * t / len).sin());
                b.hold(rng.random_range(0.5..1.5), |_| 0.0);
                b.ramp(rng.random_range(9.0..12.0), rng.random_range(3.5..5.0));
                b.ramp(rng.random_range(20.0..24.0), rng.random_range(1.8..2.6));
            }
        }
    }
    b.out.truncate(n);
    b.out
}
