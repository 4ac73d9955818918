//! Least-squares identification of the benchmark's magic-formula
//! coefficients from steady-state sweeps of the twin's tires.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};
use crate::rigid_body::VehicleParams;
use crate::twin::model::{load_scaled, static_wheel_loads};
use crate::twin::{MagicFormula, PacejkaCoeffs, TwinConfig};

/// One steady-state point: vertical load, slip and resulting force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TirePoint {
    pub fz: f64,
    pub slip: f64,
    pub force: f64,
}

/// Longitudinal and lateral sweeps over slip at loads spanning the
/// static wheel loads +-40 %.
pub fn twin_sweeps(p: &VehicleParams, cfg: &TwinConfig) -> (Vec<TirePoint>, Vec<TirePoint>) {
    let fz0 = static_wheel_loads(p);
    let lo = fz0.iter().copied().fold(f64::INFINITY, f64::min) * 0.6;
    let hi = fz0.iter().copied().fold(0.0, f64::max) * 1.4;
    let loads: Vec<f64> = (0..7).map(|i| lo + (hi - lo) * i as f64 / 6.0).collect();
    let mut long = Vec::new();
    let mut lat = Vec::new();
    for &fz in &loads {
        for j in -40..=40 {
            let kappa = 0.3 * j as f64 / 40.0;
            long.push(TirePoint { fz, slip: kappa, force: load_scaled(&cfg.tires.longitudinal, fz, cfg).force(fz, kappa) });
            let alpha = 0.25 * j as f64 / 40.0;
            // the twin's lateral state is tan(alpha)
            let f = load_scaled(&cfg.tires.lateral, fz, cfg).force(fz, alpha.tan().atan());
            lat.push(TirePoint { fz, slip: alpha, force: f });
        }
    }
    (long, lat)
}

struct Residual<'a> {
    points: &'a [TirePoint],
}

impl CostFunction for Residual<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let mf = MagicFormula::new(x[0], x[1], x[2], x[3]);
        if !mf.is_valid() {
            return Ok(f64::INFINITY);
        }
        Ok(self.points.iter().map(|pt| (mf.force(pt.fz, pt.slip) - pt.force).powi(2)).sum::<f64>()
            / self.points.len() as f64)
    }
}

/// Fit `(B, C, D, E)` from `start`.
pub fn fit_magic_formula(points: &[TirePoint], start: MagicFormula) -> Result<MagicFormula> {
    let x0 = vec![start.b, start.c, start.d, start.e];
    let simplex: Vec<Vec<f64>> = std::iter::once(x0.clone())
        .chain((0..4).map(|i| {
            let mut v = x0.clone();
            v[i] += if i == 3 { -0.2 } else { 0.15 * v[i].abs().max(0.1) };
            v
        }))
        .collect();
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let res = Executor::new(Residual { points }, solver)
        .configure(|s| s.max_iters(4000))
        .run()
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let best = res.state.best_param.ok_or_else(|| Error::Optimizer("no tire fit".into()))?;
    Ok(MagicFormula::new(best[0], best[1], best[2], best[3]))
}

/// Fit both axes starting from the textbook coefficients.
pub fn fit_bench_tires(p: &VehicleParams, cfg: &TwinConfig) -> Result<PacejkaCoeffs> {
    let (long, lat) = twin_sweeps(p, cfg);
    let start = PacejkaCoeffs::default();
    Ok(PacejkaCoeffs {
        longitudinal: fit_magic_formula(&long, start.longitudinal)?,
        lateral: fit_magic_formula(&lat, start.lateral)?,
    })
}

/// Root-mean-square force error of `mf` over `points`, N.
pub fn fit_rms(points: &[TirePoint], mf: &MagicFormula) -> f64 {
    (points.iter().map(|pt| (mf.force(pt.fz, pt.slip) - pt.force).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
}
