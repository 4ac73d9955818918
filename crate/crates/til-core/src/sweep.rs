//! Sensitivity sweeps: one estimation per axis value and repetition seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::observer::{run_estimation, GainSet, Param, StageSchedule};
use crate::scenario::{Experiment, ScenarioConfig};
use crate::twin::ParamDeviation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Measurement signal-to-noise ratio.
    Snr,
    /// Half-width of the multiplicative road noise.
    RoadEps,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::RoadEps => "road_eps",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Snr => {
                cfg.noise.snr = Some(value);
                cfg.noise.sigma.clear();
            }
            SweepAxis::RoadEps => cfg.noise.road_eps = value,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Ascending axis values.
    pub values: Vec<f64>,
    /// Repetitions per value; repetition `r` uses seed `base.seed + r`.
    #[serde(default = "one")]
    pub repetitions: usize,
    pub param: Param,
}

fn one() -> usize {
    1
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep values must be strictly ascending".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("sweep repetitions must be positive".into()));
        }
        Ok(())
    }
}

/// One cell of a sweep. `rms_percent` is `None` when the run diverged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub rms_percent: Option<f64>,
}

/// Run every `(value, repetition)` pair, rows ordered by value then seed.
pub fn run_sweep(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    gains: &GainSet,
    schedule: &StageSchedule,
    initial: ParamDeviation,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.repetitions as u64).map(move |r| (v, base.seed + r)))
        .collect();
    let out = exec.map(&jobs, |&(value, seed)| -> Result<SweepRow> {
        let mut cfg = spec.axis.apply(base, value);
        cfg.seed = seed;
        let exp = Experiment::run(&cfg)?;
        let rms_percent = match run_estimation(&exp, gains, schedule, initial) {
            Ok(run) => Some(run.rms_percent(spec.param)),
            Err(Error::Diverged { .. } | Error::NonPhysical(_) | Error::InvalidCorrection(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(SweepRow { value, seed, rms_percent })
    });
    out.into_iter().collect()
}

/// Mean rms% per axis value over the finite repetitions.
pub fn mean_by_value(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows {
        let Some(p) = r.rms_percent else { continue };
        match out.last_mut() {
            Some(last) if last.0 == r.value => {
                last.1 += p;
                last.2 += 1;
            }
            _ => out.push((r.value, p, 1)),
        }
    }
    out.into_iter().map(|(v, s, n)| (v, s / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::StageKind;
    use crate::scenario::ScenarioKind;

    fn spec(values: Vec<f64>, repetitions: usize) -> SweepSpec {
        SweepSpec { axis: SweepAxis::Snr, values, repetitions, param: Param::Mass }
    }

    #[test]
    fn row_count_is_values_times_repetitions() {
        let base = ScenarioConfig::new(ScenarioKind::Urban, 5.0);
        let g = GainSet::recommended();
        let s = StageSchedule::only(StageKind::Mass);
        let rows = run_sweep(&base, &spec(vec![5.0, 10.0, 20.0], 5), &g, &s, ParamDeviation::default(), Execution::default())
            .unwrap();
        assert_eq!(rows.len(), 15);
        assert_eq!(rows[4].seed, base.seed + 4);
        assert!(rows.windows(2).all(|w| w[0].value <= w[1].value));
        let one = run_sweep(&base, &spec(vec![10.0], 1), &g, &s, ParamDeviation::default(), Execution::Sequential).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], rows[5]);
    }

    #[test]
    fn unsorted_values_are_rejected() {
        assert!(spec(vec![10.0, 5.0], 1).validate().is_err());
        assert!(spec(vec![], 1).validate().is_err());
        assert!(spec(vec![1.0], 0).validate().is_err());
    }

    #[test]
    fn axis_overrides_only_its_field() {
        let mut base = ScenarioConfig::default();
        base.noise.road_eps = 0.05;
        let c = SweepAxis::Snr.apply(&base, 7.5);
        assert_eq!(c.noise.snr, Some(7.5));
        assert_eq!(c.noise.road_eps, 0.05);
        let c = SweepAxis::RoadEps.apply(&base, 0.2);
        assert_eq!(c.noise.road_eps, 0.2);
        assert_eq!(c.noise.snr, None);
    }

    #[test]
    fn means_skip_diverged_rows() {
        let rows = [
            SweepRow { value: 1.0, seed: 1, rms_percent: Some(2.0) },
            SweepRow { value: 1.0, seed: 2, rms_percent: None },
            SweepRow { value: 1.0, seed: 3, rms_percent: Some(4.0) },
            SweepRow { value: 2.0, seed: 1, rms_percent: Some(1.0) },
        ];
        assert_eq!(mean_by_value(&rows), vec![(1.0, 3.0), (2.0, 1.0)]);
    }
}
