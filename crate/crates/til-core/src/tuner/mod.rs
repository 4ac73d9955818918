//! Bayesian optimization of observer gains.
//!
//! A seed phase evaluates random points (concurrently when allowed), then
//! each iteration refits a GP surrogate, minimises an acquisition function
//! over the box and evaluates the proposal. Diverged rollouts are scored
//! with an adaptive penalty so the surrogate stays well conditioned.

pub mod gp;
pub mod objective;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec::Execution;
pub use gp::{Gp, Hyper};
pub use objective::{bench_objective, til_objective, BenchProblem, TilProblem, BENCH_THETA};

/// Penalty factor on the worst finite objective seen so far.
pub const PENALTY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Acquisition {
    ExpectedImprovement,
    /// `mean - kappa * std`.
    LowerConfidenceBound { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum HyperStrategy {
    MaxLikelihood { restarts: usize },
    /// Isotropic lengthscale on the unit box.
    Fixed { lengthscale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Total objective evaluations.
    pub iterations: usize,
    pub n_seed: usize,
    pub bounds: Vec<(f64, f64)>,
    pub acquisition: Acquisition,
    pub hyper: HyperStrategy,
    pub seed: u64,
    /// Sobol candidates screened per acquisition step.
    pub candidates: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            iterations: 120,
            n_seed: 20,
            bounds: Vec::new(),
            acquisition: Acquisition::ExpectedImprovement,
            hyper: HyperStrategy::MaxLikelihood { restarts: 3 },
            seed: 1,
            candidates: 1000,
            execution: Execution::default(),
        }
    }
}

impl BoConfig {
    pub fn new(bounds: Vec<(f64, f64)>, iterations: usize, n_seed: usize, seed: u64) -> Self {
        Self { bounds, iterations, n_seed, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::Config("tuner needs at least one dimension".into()));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("bounds of dimension {i} must be finite with lower < upper")));
            }
        }
        if self.n_seed < 2 || self.n_seed > self.iterations {
            return Err(Error::Config(format!(
                "need 2 <= n_seed <= iterations, got n_seed {} and iterations {}",
                self.n_seed, self.iterations
            )));
        }
        if self.candidates == 0 {
            return Err(Error::Config("candidates must be positive".into()));
        }
        if let Acquisition::LowerConfidenceBound { kappa } = self.acquisition {
            if !(kappa >= 0.0 && kappa.is_finite()) {
                return Err(Error::Config("kappa must be non-negative".into()));
            }
        }
        match self.hyper {
            HyperStrategy::MaxLikelihood { restarts: 0 } => Err(Error::Config("at least one restart".into())),
            HyperStrategy::Fixed { lengthscale } if !(lengthscale > 0.0) => {
                Err(Error::Config("lengthscale must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    fn scale_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.bounds).map(|(x, (lo, hi))| lo + x.clamp(0.0, 1.0) * (hi - lo)).collect()
    }
}

/// Outcome of one rollout. `value == None` marks divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: Option<f64>,
    /// Named cost components, e.g. sideslip and mass RMS.
    pub components: Vec<(String, f64)>,
}

impl Evaluation {
    pub fn finite(value: f64) -> Self {
        Self { value: Some(value).filter(|v| v.is_finite()), components: Vec::new() }
    }

    pub fn diverged() -> Self {
        Self { value: None, components: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub theta: Vec<f64>,
    /// Objective used by the surrogate: the rollout value or the penalty.
    pub value: f64,
    pub diverged: bool,
    pub components: Vec<(String, f64)>,
    /// Best finite objective up to and including this evaluation.
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoResult {
    pub best_evaluated: Vec<f64>,
    pub best_value: f64,
    /// Minimiser of the final surrogate mean over the box.
    pub best_predicted: Vec<f64>,
    pub predicted_value: f64,
    pub history: Vec<EvalRecord>,
}

fn penalty(worst: f64) -> f64 {
    if worst > 0.0 {
        PENALTY_FACTOR * worst
    } else {
        worst.abs() * PENALTY_FACTOR + 1.0
    }
}

struct Tracker {
    history: Vec<EvalRecord>,
    worst: f64,
    best: f64,
}

impl Tracker {
    fn push(&mut self, theta: Vec<f64>, e: Evaluation) {
        let (value, diverged) = match e.value {
            Some(v) => {
                self.worst = self.worst.max(v);
                self.best = self.best.min(v);
                (v, false)
            }
            None => (penalty(self.worst), true),
        };
        self.history.push(EvalRecord { theta, value, diverged, components: e.components, incumbent: self.best });
    }
}

/// Minimise `objective` over `config.bounds`.
pub fn bo_minimize<F>(objective: F, config: &BoConfig) -> Result<BoResult>
where
    F: Fn(&[f64]) -> Evaluation + Sync + Send,
{
    config.validate()?;
    let dim = config.bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seed_units: Vec<Vec<f64>> =
        (0..config.n_seed).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let seed_thetas: Vec<Vec<f64>> = seed_units.iter().map(|u| config.scale_unit(u)).collect();
    let seed_evals = config.execution.map(&seed_thetas, |t| objective(t));

    let finite: Vec<f64> = seed_evals.iter().filter_map(|e| e.value).collect();
    if finite.is_empty() {
        return Err(Error::AllSeedsDiverged(config.n_seed));
    }
    let mut tr = Tracker {
        history: Vec::with_capacity(config.iterations),
        worst: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        best: f64::INFINITY,
    };
    let mut units = Vec::with_capacity(config.iterations);
    for ((u, t), e) in seed_units.into_iter().zip(seed_thetas).zip(seed_evals) {
        units.push(u);
        tr.push(t, e);
    }

    while tr.history.len() < config.iterations {
        let ys: Vec<f64> = tr.history.iter().map(|r| r.value).collect();
        let gp = fit_surrogate(units.clone(), &ys, &config.hyper, &mut rng)?;
        let sobol_seed: u32 = rng.random();
        let best = tr.best;
        let next = minimize_on_box(dim, config.candidates, sobol_seed, |u| acquisition(&gp, u, best, config.acquisition))?;
        let theta = config.scale_unit(&next);
        let e = objective(&theta);
        units.push(next);
        tr.push(theta, e);
    }

    let ys: Vec<f64> = tr.history.iter().map(|r| r.value).collect();
    let gp = fit_surrogate(units, &ys, &config.hyper, &mut rng)?;
    let sobol_seed: u32 = rng.random();
    let pred_unit = minimize_on_box(dim, config.candidates, sobol_seed, |u| gp.predict(u).0)?;
    let predicted_value = gp.predict(&pred_unit).0;

    let best = tr
        .history
        .iter()
        .filter(|r| !r.diverged)
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one finite evaluation");
    Ok(BoResult {
        best_evaluated: best.theta.clone(),
        best_value: best.value,
        best_predicted: config.scale_unit(&pred_unit),
        predicted_value,
        history: tr.history,
    })
}

fn fit_surrogate(x: Vec<Vec<f64>>, y: &[f64], strategy: &HyperStrategy, rng: &mut ChaCha8Rng) -> Result<Gp> {
    match *strategy {
        HyperStrategy::MaxLikelihood { restarts } => Gp::fit(x, y, restarts, rng),
        HyperStrategy::Fixed { lengthscale } => {
            let d = x.first().map_or(0, Vec::len);
            Gp::with_hyper(x, y, Hyper::isotropic(d, lengthscale))
        }
    }
}

/// Value to minimise at unit point `u`.
pub fn acquisition(gp: &Gp, u: &[f64], best: f64, kind: Acquisition) -> f64 {
    let (mean, std) = gp.predict(u);
    match kind {
        Acquisition::ExpectedImprovement => -expected_improvement(best - mean, std),
        Acquisition::LowerConfidenceBound { kappa } => mean - kappa * std,
    }
}

/// `E[max(best - f, 0)]` for `f ~ N(mean, std^2)`, with `improvement = best - mean`.
pub fn expected_improvement(improvement: f64, std: f64) -> f64 {
    if std <= 1e-12 {
        return improvement.max(0.0);
    }
    let n = Normal::standard();
    let z = improvement / std;
    improvement * n.cdf(z) + std * n.pdf(z)
}

const LOCAL_STARTS: usize = 5;

/// Screen `candidates` Sobol points, then polish the best few with
/// Nelder-Mead on the clamped box.
fn minimize_on_box<F: Fn(&[f64]) -> f64>(dim: usize, candidates: usize, seed: u32, f: F) -> Result<Vec<f64>> {
    let clamp = |x: &[f64]| x.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<f64>>();
    let mut scored: Vec<(f64, Vec<f64>)> = (0..candidates as u32)
        .map(|i| {
            let u: Vec<f64> = (0..dim as u32).map(|d| sobol_burley::sample(i, d, seed) as f64).collect();
            (f(&u), u)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored[0].clone();
    for (_, start) in scored.iter().take(LOCAL_STARTS) {
        let cost = BoxCost { f: &f, clamp: &clamp };
        let (p, _) = gp::local_search(cost, start, 0.05, 100)?;
        let p = clamp(&p);
        let v = f(&p);
        if v < best.0 {
            best = (v, p);
        }
    }
    Ok(best.1)
}

struct BoxCost<'a, F, C> {
    f: &'a F,
    clamp: &'a C,
}

impl<F, C> argmin::core::CostFunction for BoxCost<'_, F, C>
where
    F: Fn(&[f64]) -> f64,
    C: Fn(&[f64]) -> Vec<f64>,
{
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let v = (self.f)(&(self.clamp)(p));
        Ok(if v.is_finite() { v } else { f64::MAX })
    }
}
