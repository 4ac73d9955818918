//! Lumped chassis parameters and the effect of point loads on mass,
//! centre of mass and principal moments of inertia.
//!
//! Body frame: origin at the front axle centre on the ground plane, `x`
//! forward, `y` to the left, `z` up. The CM therefore sits at a negative
//! `x` and the front axle distance is `lf = -cm.x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// A load treated as a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub mass: f64,
    pub position: Vec3,
}

impl PointMass {
    pub fn new(mass: f64, position: Vec3) -> Result<Self> {
        let pm = Self { mass, position };
        pm.validate()?;
        Ok(pm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "point mass must be positive, got {}",
                self.mass
            )));
        }
        if self.position.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("point mass position must be finite".into()));
        }
        Ok(())
    }
}

/// Lumped rigid-body parameters of the chassis plus the planar geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub mass: f64,
    pub cm: Vec3,
    pub jxx: f64,
    pub jyy: f64,
    pub jzz: f64,
    pub jxy: f64,
    pub jxz: f64,
    pub jyz: f64,
    pub wheelbase: f64,
    pub track: f64,
}

impl Default for VehicleParams {
    /// Nominal sport-utility vehicle including the driver.
    fn default() -> Self {
        Self {
            mass: 2125.8,
            cm: [-1.250, -0.000_03, 0.644],
            jxx: 834.23,
            jyy: 3640.182,
            jzz: 3932.77,
            jxy: 0.14,
            jxz: 0.097,
            jyz: 3.86,
            wheelbase: 2.90,
            track: 1.62,
        }
    }
}

impl VehicleParams {
    /// Distance from the CM to the front axle.
    pub fn lf(&self) -> f64 {
        -self.cm[0]
    }

    /// Distance from the CM to the rear axle.
    pub fn lr(&self) -> f64 {
        self.wheelbase + self.cm[0]
    }

    /// CM height above the ground plane.
    pub fn cm_height(&self) -> f64 {
        self.cm[2]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mass, self.jxx, self.jyy, self.jzz, self.jxy, self.jxz, self.jyz,
            self.wheelbase, self.track,
        ]
        .iter()
        .chain(self.cm.iter())
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonPhysical("non-finite vehicle parameter".into()));
        }
        if self.mass <= 0.0 {
            return Err(Error::NonPhysical(format!("mass {} <= 0", self.mass)));
        }
        for (name, j) in [("Jxx", self.jxx), ("Jyy", self.jyy), ("Jzz", self.jzz)] {
            if j <= 0.0 {
                return Err(Error::NonPhysical(format!("{name} = {j} <= 0")));
            }
        }
        if self.wheelbase <= 0.0 || self.track <= 0.0 {
            return Err(Error::NonPhysical("wheelbase and track must be positive".into()));
        }
        if self.lf() <= 0.0 || self.lr() <= 0.0 {
            return Err(Error::NonPhysical(format!(
                "CM x = {} lies outside the wheelbase",
                self.cm[0]
            )));
        }
        Ok(())
    }

    /// Principal-moment triangle inequalities of a real mass distribution.
    pub fn satisfies_triangle_inequalities(&self) -> bool {
        let (a, b, c) = (self.jxx, self.jyy, self.jzz);
        a + b >= c && a + c >= b && b + c >= a
    }
}

/// Additional loads placed on the chassis. May be empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadConfig {
    #[serde(default, rename = "load")]
    pub loads: Vec<NamedLoad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLoad {
    #[serde(default)]
    pub name: String,
    pub mass: f64,
    pub position: Vec3,
}

impl From<PointMass> for NamedLoad {
    fn from(p: PointMass) -> Self {
        Self { name: String::new(), mass: p.mass, position: p.position }
    }
}

const DEFAULT_LOADS: &str = include_str!("../data/default_loads.toml");

impl LoadConfig {
    pub fn from_point_masses(masses: impl IntoIterator<Item = PointMass>) -> Self {
        Self { loads: masses.into_iter().map(NamedLoad::from).collect() }
    }

    /// Four passengers and two trunk loads of the perturbed configuration.
    pub fn default_passengers() -> Self {
        Self::from_toml(DEFAULT_LOADS).expect("bundled load table is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LoadConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.point_masses().map(|_| ())
    }

    pub fn point_masses(&self) -> Result<Vec<PointMass>> {
        self.loads.iter().map(|l| PointMass::new(l.mass, l.position)).collect()
    }

    fn iter(&self) -> impl Iterator<Item = (f64, Vec3)> + '_ {
        self.loads.iter().map(|l| (l.mass, l.position))
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }
}

/// `m0 + Σ m_i`.
pub fn total_mass(base: &VehicleParams, loads: &LoadConfig) -> f64 {
    loads.iter().fold(base.mass, |acc, (m, _)| acc + m)
}

/// Mass-weighted mean position of chassis and loads.
pub fn combined_cm(base: &VehicleParams, loads: &LoadConfig) -> Vec3 {
    if loads.is_empty() {
        return base.cm;
    }
    let total = total_mass(base, loads);
    let mut moment = base.cm.map(|c| c * base.mass);
    for (m, p) in loads.iter() {
        for k in 0..3 {
            moment[k] += m * p[k];
        }
    }
    moment.map(|s| s / total)
}

#[inline]
fn sq_dist(a: f64, b: f64) -> f64 {
    (a - b) * (a - b)
}

/// Principal moments about the combined CM (parallel-axis theorem).
///
/// The chassis contributes its own moments shifted from `CM_0` to the new
/// CM; each load contributes `m_i r_i^2` about the new CM axes.
pub fn combined_inertia(base: &VehicleParams, loads: &LoadConfig) -> Result<Vec3> {
    if loads.is_empty() {
        return Ok([base.jxx, base.jyy, base.jzz]);
    }
    let [dx, dy, dz] = combined_cm(base, loads);
    let [dx0, dy0, dz0] = base.cm;
    let m0 = base.mass;
    let mut jxx = base.jxx + m0 * (sq_dist(dy, dy0) + sq_dist(dz, dz0));
    let mut jyy = base.jyy + m0 * (sq_dist(dx, dx0) + sq_dist(dz, dz0));
    let mut jzz = base.jzz + m0 * (sq_dist(dx, dx0) + sq_dist(dy, dy0));
    for (m, [px, py, pz]) in loads.iter() {
        jxx += m * (sq_dist(py, dy) + sq_dist(pz, dz));
        jyy += m * (sq_dist(px, dx) + sq_dist(pz, dz));
        jzz += m * (sq_dist(px, dx) + sq_dist(py, dy));
    }
    let j = [jxx, jyy, jzz];
    if j.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NonPhysical(format!("combined inertia {j:?} not positive")));
    }
    Ok(j)
}

/// Full perturbed parameter set; geometry and products of inertia carry over.
pub fn perturbed_params(base: &VehicleParams, loads: &LoadConfig) -> Result<VehicleParams> {
    loads.validate()?;
    let [jxx, jyy, jzz] = combined_inertia(base, loads)?;
    let out = VehicleParams {
        mass: total_mass(base, loads),
        cm: combined_cm(base, loads),
        jxx,
        jyy,
        jzz,
        ..*base
    };
    out.validate()?;
    Ok(out)
}
