use serde::{Deserialize, Serialize};

/// Simplified magic-formula coefficients for one slip direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicFormula {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl MagicFormula {
    pub const fn new(b: f64, c: f64, d: f64, e: f64) -> Self {
        Self { b, c, d, e }
    }

    pub fn is_valid(&self) -> bool {
        self.b > 0.0 && self.c > 0.0 && self.d > 0.0 && self.e < 1.0
    }

    /// Normalised force `F / F_z` at the given slip.
    #[inline]
    pub fn normalized(&self, slip: f64) -> f64 {
        let bs = self.b * slip;
        self.d * (self.c * (bs - self.e * (bs - bs.atan())).atan()).sin()
    }

    #[inline]
    pub fn force(&self, fz: f64, slip: f64) -> f64 {
        fz * self.normalized(slip)
    }

    /// Slope at zero slip, `B C D`.
    pub fn stiffness(&self) -> f64 {
        self.b * self.c * self.d
    }
}

/// Longitudinal and lateral coefficient pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacejkaCoeffs {
    pub longitudinal: MagicFormula,
    pub lateral: MagicFormula,
}

impl Default for PacejkaCoeffs {
    fn default() -> Self {
        Self {
            longitudinal: MagicFormula::new(10.0, 1.9, 1.0, 0.97),
            lateral: MagicFormula::new(10.0, 1.9, 1.0, 0.97),
        }
    }
}

impl PacejkaCoeffs {
    pub fn is_valid(&self) -> bool {
        self.longitudinal.is_valid() && self.lateral.is_valid()
    }
}
