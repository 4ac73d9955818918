//! Independent reference computations used by the acceptance suite.

use std::f64::consts::PI;

use til_core::rigid_body::{PointMass, VehicleParams};

/// Principal moments of chassis plus loads by direct summation.
///
/// The chassis is replaced by six equal point masses at `±a, ±b, ±c` along
/// the axes through its CM, sized to reproduce its principal moments; then
/// the CM and `Σ m r^2` are taken over every point. Requires the chassis
/// moments to satisfy the triangle inequalities.
pub fn brute_force_inertia(base: &VehicleParams, loads: &[PointMass]) -> [f64; 3] {
    let k = 3.0 / (2.0 * base.mass);
    let half = [
        (k * (base.jyy + base.jzz - base.jxx)).sqrt(),
        (k * (base.jxx + base.jzz - base.jyy)).sqrt(),
        (k * (base.jxx + base.jyy - base.jzz)).sqrt(),
    ];
    let mut pts: Vec<(f64, [f64; 3])> = Vec::with_capacity(6 + loads.len());
    for (axis, s) in half.into_iter().enumerate() {
        for sign in [-1.0, 1.0] {
            let mut p = base.cm;
            p[axis] += sign * s;
            pts.push((base.mass / 6.0, p));
        }
    }
    pts.extend(loads.iter().map(|l| (l.mass, l.position)));

    let m: f64 = pts.iter().map(|p| p.0).sum();
    let mut cm = [0.0; 3];
    for (mi, p) in &pts {
        for a in 0..3 {
            cm[a] += mi * p[a] / m;
        }
    }
    let mut j = [0.0; 3];
    for (mi, p) in &pts {
        let d = [p[0] - cm[0], p[1] - cm[1], p[2] - cm[2]];
        j[0] += mi * (d[1] * d[1] + d[2] * d[2]);
        j[1] += mi * (d[0] * d[0] + d[2] * d[2]);
        j[2] += mi * (d[0] * d[0] + d[1] * d[1]);
    }
    j
}

/// Branin function on `[-5, 10] x [0, 15]`.
pub fn branin(x: &[f64]) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x[1] - b * x[0] * x[0] + c * x[0] - 6.0).powi(2) + 10.0 * (1.0 - t) * x[0].cos() + 10.0
}

pub const BRANIN_BOX: [(f64, f64); 2] = [(-5.0, 10.0), (0.0, 15.0)];

/// The three global minimisers, all with value 0.397887.
pub const BRANIN_OPTIMA: [[f64; 2]; 3] = [[-PI, 12.275], [PI, 2.275], [3.0 * PI, 2.475]];

/// Distance from `x` to the nearest Branin minimiser.
pub fn branin_distance(x: &[f64]) -> f64 {
    BRANIN_OPTIMA.iter().map(|o| (x[0] - o[0]).hypot(x[1] - o[1])).fold(f64::INFINITY, f64::min)
}
