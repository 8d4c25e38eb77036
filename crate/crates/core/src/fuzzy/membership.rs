use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear membership function.
///
/// Breakpoints are checked on construction; degrees are always in `[0, 1]`.
/// Coincident breakpoints produce vertical edges whose limit point belongs to
/// the set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MembershipFunction {
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
    Triangle { a: f64, b: f64, c: f64 },
}

impl MembershipFunction {
    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let mf = MembershipFunction::Trapezoid { a, b, c, d };
        mf.validate()?;
        Ok(mf)
    }

    pub fn triangle(a: f64, b: f64, c: f64) -> Result<Self> {
        let mf = MembershipFunction::Triangle { a, b, c };
        mf.validate()?;
        Ok(mf)
    }

    fn corners(&self) -> [f64; 4] {
        match *self {
            MembershipFunction::Trapezoid { a, b, c, d } => [a, b, c, d],
            MembershipFunction::Triangle { a, b, c } => [a, b, b, c],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.corners();
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("membership", "breakpoints must be finite"));
        }
        if p.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("membership", format!("breakpoints must be non-decreasing, got {p:?}")));
        }
        Ok(())
    }

    pub fn degree(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.corners();
        if x < a || x > d {
            0.0
        } else if x >= b && x <= c {
            1.0
        } else if x < b {
            // a <= x < b, so b > a
            (x - a) / (b - a)
        } else {
            (d - x) / (d - c)
        }
    }
}
