use serde::{Deserialize, Serialize};

/// Half-width (mg/dL) of the band around the reference that earns the shaped
/// bonus. The band is closed: |e| = 10 already scores ~0 on the close branch.
pub const CLOSE_BAND: f64 = 10.0;
pub const INTEGRAL_ERROR_WEIGHT: f64 = 2e-6;
pub const INSULIN_WEIGHT: f64 = 1e-6;

/// Near-reference reward shape.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloseBranch {
    /// `20 - 12.62 |e|^(1/5)`: 20 at the reference, ~0 at |e| = 10.
    #[default]
    Endpoint,
    /// `1.262 |e|^(1/5) + 2`, kept for comparison only.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub base: f64,
    /// already negated
    pub penalty_i: f64,
    /// already negated
    pub penalty_c: f64,
}

/// Error-shaped base reward; `e = G - G_ref` in mg/dL.
pub fn base_reward(e: f64, close: CloseBranch) -> f64 {
    let mag = e.abs();
    if mag <= CLOSE_BAND {
        match close {
            CloseBranch::Endpoint => 20.0 - 12.62 * mag.powf(0.2),
            CloseBranch::Printed => 1.262 * mag.powf(0.2) + 2.0,
        }
    } else if e < 0.0 {
        (1.0 - mag) / 20.0
    } else {
        (1.0 - mag) / 70.0
    }
}

/// Base reward minus the accumulated-error and accumulated-insulin penalties.
pub fn reward(e: f64, i_acc: f64, c_acc: f64, close: CloseBranch) -> RewardBreakdown {
    let base = base_reward(e, close);
    let penalty_i = -INTEGRAL_ERROR_WEIGHT * i_acc;
    let penalty_c = -INSULIN_WEIGHT * c_acc;
    RewardBreakdown {
        total: base + penalty_i + penalty_c,
        base,
        penalty_i,
        penalty_c,
    }
}
