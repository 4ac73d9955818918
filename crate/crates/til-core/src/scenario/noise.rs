use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::twin::MeasurementVec;

/// Channels perturbed when the configuration does not say otherwise.
pub const DEFAULT_NOISY_CHANNELS: [&str; 4] = ["ax", "wx", "wy", "wz"];

/// Measurement and road-noise settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    /// Target signal-to-noise power ratio on every noisy channel.
    pub snr: Option<f64>,
    /// Explicit standard deviations by channel name.
    pub sigma: BTreeMap<String, f64>,
    /// Channels that receive noise in snr mode.
    pub channels: Vec<String>,
    /// Half-width of the multiplicative road noise.
    pub road_eps: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            snr: None,
            sigma: BTreeMap::new(),
            channels: DEFAULT_NOISY_CHANNELS.iter().map(|s| s.to_string()).collect(),
            road_eps: 0.0,
        }
    }
}

fn channel_index(name: &str) -> Result<usize> {
    MeasurementVec::NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::Noise(format!("unknown measurement channel '{name}'")))
}

fn rms(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

impl NoiseSettings {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_snr(snr: f64) -> Self {
        Self { snr: Some(snr), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(snr) = self.snr {
            if !(snr > 0.0 && snr.is_finite()) {
                return Err(Error::Noise(format!("snr must be positive, got {snr}")));
            }
            if !self.sigma.is_empty() {
                return Err(Error::Noise("give either snr or sigma, not both".into()));
            }
        }
        for (name, s) in &self.sigma {
            channel_index(name)?;
            if !(*s >= 0.0 && s.is_finite()) {
                return Err(Error::Noise(format!("sigma for {name} must be >= 0")));
            }
        }
        for name in &self.channels {
            channel_index(name)?;
        }
        if !(0.0..=0.5).contains(&self.road_eps) {
            return Err(Error::Noise(format!("road_eps {} outside [0, 0.5]", self.road_eps)));
        }
        Ok(())
    }

    /// Per-channel noise standard deviation for this clean trace.
    pub fn sigmas(&self, clean: &[MeasurementVec]) -> Result<[f64; MeasurementVec::LEN]> {
        self.validate()?;
        let mut out = [0.0; MeasurementVec::LEN];
        if let Some(snr) = self.snr {
            for name in &self.channels {
                let i = channel_index(name)?;
                let power = rms(clean.iter().map(|y| y.to_array()[i]));
                if power == 0.0 && !clean.is_empty() {
                    return Err(Error::Noise(format!(
                        "channel {name} carries no signal; snr is undefined, give sigma instead"
                    )));
                }
                out[i] = power / snr.sqrt();
            }
        } else {
            for (name, s) in &self.sigma {
                out[channel_index(name)?] = *s;
            }
        }
        Ok(out)
    }
}

/// Add white Gaussian noise. Channels with zero sigma pass through
/// bit-exact.
pub fn apply_measurement_noise(
    clean: &[MeasurementVec],
    settings: &NoiseSettings,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<MeasurementVec>> {
    let sigma = settings.sigmas(clean)?;
    Ok(clean
        .iter()
        .map(|y| {
            let mut a = y.to_array();
            for (v, s) in a.iter_mut().zip(sigma) {
                if s > 0.0 {
                    let xi: f64 = StandardNormal.sample(rng);
                    *v += s * xi;
                }
            }
            MeasurementVec::from_array(a)
        })
        .collect())
}
