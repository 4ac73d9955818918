use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

/// Default road roughness, m/sqrt(s).
pub const DEFAULT_SIGMA_Z: f64 = 0.01;

/// Sampled front-wheel road height.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoadProfile {
    pub dt: f64,
    pub front: Vec<f64>,
}

impl RoadProfile {
    pub fn flat(n: usize, dt: f64) -> Self {
        Self { dt, front: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.front.len()
    }

    pub fn is_empty(&self) -> bool {
        self.front.is_empty()
    }

    /// Front height `delay` seconds before sample `k`, linearly
    /// interpolated; the profile is held at its first value before `t = 0`.
    pub fn delayed(&self, k: usize, delay: f64) -> f64 {
        if self.front.is_empty() {
            return 0.0;
        }
        let pos = k as f64 - delay.max(0.0) / self.dt;
        if pos <= 0.0 {
            return self.front[0];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let a = self.front[i.min(self.front.len() - 1)];
        let b = self.front[(i + 1).min(self.front.len() - 1)];
        a + frac * (b - a)
    }

    /// Rear height at sample `k` for a car of wheelbase `wb` moving at `speed`.
    pub fn rear(&self, k: usize, wheelbase: f64, speed: f64) -> f64 {
        let v = speed.abs().max(0.5);
        self.delayed(k, wheelbase / v)
    }
}

/// Random-walk road, `z_k = z_{k-1} + sigma_z sqrt(dt) xi_k` with
/// standard normal `xi`, so that `Var z(t) = sigma_z^2 t`.
pub fn gen_road_profile(n: usize, dt: f64, sigma_z: f64, rng: &mut ChaCha8Rng) -> Result<RoadProfile> {
    if !(sigma_z >= 0.0 && sigma_z.is_finite()) {
        return Err(Error::Config(format!("road sigma_z must be >= 0, got {sigma_z}")));
    }
    let mut front = Vec::with_capacity(n);
    let mut z = 0.0;
    let step = sigma_z * dt.sqrt();
    for _ in 0..n {
        front.push(z);
        let xi: f64 = StandardNormal.sample(rng);
        z += step * xi;
    }
    Ok(RoadProfile { dt, front })
}

/// Multiplicative corruption `z * u`, `u ~ U(1 - eps, 1 + eps)`.
pub fn corrupt_road(profile: &RoadProfile, eps: f64, rng: &mut ChaCha8Rng) -> Result<RoadProfile> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::Noise(format!("road noise half-width {eps} outside [0, 0.5]")));
    }
    if eps == 0.0 {
        return Ok(profile.clone());
    }
    let u = Uniform::new_inclusive(1.0 - eps, 1.0 + eps).map_err(|e| Error::Noise(e.to_string()))?;
    let front = profile.front.iter().map(|z| z * rng.sample(u)).collect();
    Ok(RoadProfile { dt: profile.dt, front })
}
