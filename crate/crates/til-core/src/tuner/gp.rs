//! Gaussian-process surrogate on the unit box.
//!
//! Squared-exponential kernel with one lengthscale per input, standardized
//! targets and a fixed small nugget, so the posterior mean interpolates the
//! data. Hyperparameters maximise the log marginal likelihood.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};

const NUGGET: f64 = 1e-10;
const LOG_LENGTH: (f64, f64) = (-6.0, 3.0);
const LOG_SIGNAL: (f64, f64) = (-6.0, 4.0);

/// Kernel hyperparameters in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyper {
    pub lengthscales: Vec<f64>,
    pub signal_var: f64,
}

impl Hyper {
    pub fn isotropic(dim: usize, lengthscale: f64) -> Self {
        Self { lengthscales: vec![lengthscale; dim], signal_var: 1.0 }
    }

    fn to_log(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| l.ln()).chain(std::iter::once(self.signal_var.ln())).collect()
    }

    fn from_log(p: &[f64]) -> Self {
        let d = p.len() - 1;
        Self { lengthscales: p[..d].iter().map(|v| v.exp()).collect(), signal_var: p[d].exp() }
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a.iter().zip(b).zip(&self.lengthscales).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
        self.signal_var * (-0.5 * r2).exp()
    }
}

/// Fitted surrogate.
#[derive(Debug, Clone)]
pub struct Gp {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    hyper: Hyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn gram(x: &[Vec<f64>], h: &Hyper) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| h.kernel(&x[i], &x[j]))
}

/// Cholesky of `k + jitter I`, raising the jitter until it succeeds.
fn robust_cholesky(k: DMatrix<f64>, scale: f64) -> Option<Cholesky<f64, Dyn>> {
    let n = k.nrows();
    let mut jitter = NUGGET * scale;
    for _ in 0..8 {
        let m = &k + DMatrix::identity(n, n) * jitter;
        if let Some(c) = Cholesky::new(m) {
            return Some(c);
        }
        jitter *= 100.0;
    }
    None
}

fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var.sqrt() > 1e-12 * (1.0 + mean.abs()) { var.sqrt() } else { 1.0 };
    (y.iter().map(|v| (v - mean) / scale).collect(), mean, scale)
}

/// Negative log marginal likelihood of standardized targets.
fn nlml(x: &[Vec<f64>], y: &DVector<f64>, h: &Hyper) -> f64 {
    let Some(chol) = robust_cholesky(gram(x, h), h.signal_var) else {
        return f64::INFINITY;
    };
    let alpha = chol.solve(y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    0.5 * y.dot(&alpha) + 0.5 * log_det + 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

struct Likelihood<'a> {
    x: &'a [Vec<f64>],
    y: &'a DVector<f64>,
}

impl CostFunction for Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let d = p.len() - 1;
        let inside = p[..d].iter().all(|v| (LOG_LENGTH.0..=LOG_LENGTH.1).contains(v))
            && (LOG_SIGNAL.0..=LOG_SIGNAL.1).contains(&p[d]);
        if !inside {
            return Ok(1e12);
        }
        let v = nlml(self.x, self.y, &Hyper::from_log(p));
        Ok(if v.is_finite() { v } else { 1e12 })
    }
}

fn simplex_around(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    std::iter::once(x0.to_vec())
        .chain((0..x0.len()).map(|i| {
            let mut v = x0.to_vec();
            v[i] += step;
            v
        }))
        .collect()
}

/// Nelder-Mead from an axis-aligned simplex of edge `step` around `x0`.
pub fn local_search<C>(cost: C, x0: &[f64], step: f64, iters: u64) -> Result<(Vec<f64>, f64)>
where
    C: CostFunction<Param = Vec<f64>, Output = f64>,
{
    let solver = NelderMead::new(simplex_around(x0, step))
        .with_sd_tolerance(1e-9)
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(iters))
        .run()
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let best = res.state.best_param.clone().ok_or_else(|| Error::Optimizer("empty simplex".into()))?;
    Ok((best, res.state.best_cost))
}

impl Gp {
    /// Fit with the given hyperparameters. `x` must lie in the unit box.
    pub fn with_hyper(x: Vec<Vec<f64>>, y: &[f64], hyper: Hyper) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Optimizer("surrogate needs matching, non-empty data".into()));
        }
        let (ys, y_mean, y_scale) = standardize(y);
        let yv = DVector::from_vec(ys);
        let chol = robust_cholesky(gram(&x, &hyper), hyper.signal_var)
            .ok_or_else(|| Error::Optimizer("kernel matrix is not positive definite".into()))?;
        let alpha = chol.solve(&yv);
        Ok(Self { x, y_mean, y_scale, hyper, chol, alpha })
    }

    /// Fit by maximum marginal likelihood from a default start plus
    /// `restarts - 1` random ones.
    pub fn fit<R: Rng>(x: Vec<Vec<f64>>, y: &[f64], restarts: usize, rng: &mut R) -> Result<Self> {
        let dim = x.first().map_or(0, Vec::len);
        let (ys, _, _) = standardize(y);
        let yv = DVector::from_vec(ys);
        let mut starts = vec![Hyper::isotropic(dim, 0.3).to_log()];
        for _ in 1..restarts.max(1) {
            let mut p: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..0.7)).collect();
            p.push(rng.random_range(-1.0..1.0));
            starts.push(p);
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in &starts {
            let (p, c) = local_search(Likelihood { x: &x, y: &yv }, s, 0.5, 300)?;
            if best.as_ref().is_none_or(|(_, bc)| c < *bc) {
                best = Some((p, c));
            }
        }
        let hyper = best.map(|(p, _)| Hyper::from_log(&p)).unwrap_or_else(|| Hyper::isotropic(dim, 0.3));
        Self::with_hyper(x, y, hyper)
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Posterior mean and standard deviation, in the units of the data.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| self.hyper.kernel(xi, q)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.solve(&k);
        let var = (self.hyper.signal_var - k.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}
