//! Rollout objectives: sideslip over the whole test plus mass over the
//! final seconds, scored from truth.

use crate::benchmark::{run_benchmark, BenchGains, BenchModel};
use crate::error::Result;
use crate::observer::{run_estimation, EstimationRun, GainBounds, GainName, GainSet, Param, StageSchedule};
use crate::twin::ParamDeviation;
use crate::scenario::metrics::{rms, rms_last_window, til_cost, K_BETA, MASS_HORIZON};
use crate::scenario::Experiment;

use super::Evaluation;

/// Order of the benchmark gain vector.
pub const BENCH_THETA: [GainName; 4] = [GainName::KAxVx, GainName::KWzWz, GainName::KAxDm, GainName::KAyVy];

/// Score a finished run against the experiment's truth.
pub fn score(run: &EstimationRun, exp: &Experiment) -> Evaluation {
    let beta = exp.truth.sideslip();
    let beta_hat = run.sideslip();
    let dm_hat = run.series(Param::Mass);
    let dm = vec![run.truth_delta.mass; dm_hat.len()];
    let j = til_cost(&beta, &beta_hat, &dm, &dm_hat, run.fs);
    let n = beta.len().min(beta_hat.len());
    let beta_err: Vec<f64> = beta[..n].iter().zip(&beta_hat[..n]).map(|(a, b)| a - b).collect();
    let mut e = Evaluation::finite(j);
    e.components = vec![
        ("beta_rms".into(), rms(&beta_err)),
        ("beta_term".into(), K_BETA.sqrt() * rms(&beta_err)),
        ("mass_rms".into(), rms_last_window(&dm, &dm_hat, run.fs, MASS_HORIZON)),
    ];
    e
}

fn evaluate(run: Result<EstimationRun>, exp: &Experiment) -> Evaluation {
    match run {
        Ok(r) => score(&r, exp),
        Err(_) => Evaluation::diverged(),
    }
}

/// Cost of the twin-in-the-loop observer with `gains`.
pub fn til_objective(gains: &GainSet, exp: &Experiment, schedule: &StageSchedule, initial: ParamDeviation) -> Evaluation {
    evaluate(run_estimation(exp, gains, schedule, initial), exp)
}

/// Cost of the benchmark observer with `gains`.
pub fn bench_objective(gains: &BenchGains, exp: &Experiment, model: &BenchModel, initial_dm: f64) -> Evaluation {
    evaluate(run_benchmark(exp, model, gains, initial_dm).map(|(r, _)| r), exp)
}

/// Twin-in-the-loop tuning problem: the gains in `names` vary, the rest
/// stay at `base`.
#[derive(Debug, Clone)]
pub struct TilProblem<'a> {
    pub exp: &'a Experiment,
    pub base: GainSet,
    pub names: Vec<GainName>,
    pub schedule: StageSchedule,
    pub initial: ParamDeviation,
}

impl<'a> TilProblem<'a> {
    /// Joint mass and sideslip tuning over the six planar gains.
    pub fn mass_and_sideslip(exp: &'a Experiment, initial_dm: f64) -> Self {
        Self {
            exp,
            base: GainSet::zero(),
            names: GainName::TIL_THETA.to_vec(),
            schedule: StageSchedule::only(crate::observer::StageKind::Mass),
            initial: ParamDeviation { mass: initial_dm, ..Default::default() },
        }
    }

    pub fn gains(&self, theta: &[f64]) -> GainSet {
        self.names.iter().zip(theta).fold(self.base, |g, (n, v)| g.with(*n, *v))
    }

    pub fn bounds(&self, b: &GainBounds) -> Vec<(f64, f64)> {
        self.names.iter().map(|n| b.get(*n)).collect()
    }

    pub fn evaluate(&self, theta: &[f64]) -> Evaluation {
        til_objective(&self.gains(theta), self.exp, &self.schedule, self.initial)
    }
}

/// Benchmark tuning problem over `[K_ax-vx, K_wz-wz, K_ax-dM, K_ay-vy]`.
#[derive(Debug, Clone)]
pub struct BenchProblem<'a> {
    pub exp: &'a Experiment,
    pub model: BenchModel,
    pub initial_dm: f64,
}

impl<'a> BenchProblem<'a> {
    pub fn new(exp: &'a Experiment, initial_dm: f64) -> Result<Self> {
        Ok(Self { exp, model: BenchModel::for_experiment(exp)?, initial_dm })
    }

    pub fn bounds(b: &GainBounds) -> Vec<(f64, f64)> {
        BENCH_THETA.iter().map(|n| b.get(*n)).collect()
    }

    pub fn evaluate(&self, theta: &[f64]) -> Evaluation {
        bench_objective(&BenchGains::from_theta(theta), self.exp, &self.model, self.initial_dm)
    }
}
