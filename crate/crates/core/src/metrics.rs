//! Per-episode glycemic summary.

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::td3::EpisodeEnd;

/// One control step as logged to trajectory CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time_min: f64,
    #[serde(rename = "G_mgdl")]
    pub g_mgdl: f64,
    pub e: f64,
    pub de: f64,
    #[serde(rename = "u_mU_per_min")]
    pub u_mu_per_min: f64,
    pub reward: f64,
    pub reward_base: f64,
    pub penalty_i: f64,
    pub penalty_c: f64,
    pub meal_g: f64,
    pub terminated: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// fraction of samples inside the safe band (inclusive)
    pub time_in_range: f64,
    pub min_g: f64,
    pub max_g: f64,
    /// mg/dL below the reference at the lowest point, 0 if never below
    pub undershoot_below_ref: f64,
    /// mg/dL above the upper safe bound at the highest point, 0 if never above
    pub overshoot_above_high: f64,
    /// U
    pub total_insulin_u: f64,
    pub mean_u_mu_per_min: f64,
    pub mean_u_u_per_h: f64,
    pub episode_return: f64,
    pub duration_min: f64,
    pub termination: EpisodeEnd,
}

/// Summarises a trajectory. Insulin integrals use the rectangle rule over
/// the logged step times.
pub fn compute_metrics(rows: &[TrajectoryRow], cfg: &EnvConfig) -> MetricsReport {
    let (lo, hi) = cfg.safe_band;
    let n = rows.len().max(1) as f64;
    let in_range = rows.iter().filter(|r| r.g_mgdl >= lo && r.g_mgdl <= hi).count() as f64;
    let min_g = rows.iter().map(|r| r.g_mgdl).fold(f64::INFINITY, f64::min);
    let max_g = rows.iter().map(|r| r.g_mgdl).fold(f64::NEG_INFINITY, f64::max);

    let mut insulin_mu = 0.0;
    let mut prev_t = 0.0;
    for r in rows {
        insulin_mu += r.u_mu_per_min * (r.time_min - prev_t);
        prev_t = r.time_min;
    }
    let duration = prev_t;
    let mean_u = if duration > 0.0 { insulin_mu / duration } else { 0.0 };
    let terminated = rows.last().map(|r| r.terminated).unwrap_or(false);

    MetricsReport {
        time_in_range: if rows.is_empty() { 0.0 } else { in_range / n },
        min_g: if rows.is_empty() { f64::NAN } else { min_g },
        max_g: if rows.is_empty() { f64::NAN } else { max_g },
        undershoot_below_ref: (cfg.g_ref - min_g).max(0.0),
        overshoot_above_high: (max_g - hi).max(0.0),
        total_insulin_u: insulin_mu / 1000.0,
        mean_u_mu_per_min: mean_u,
        mean_u_u_per_h: mean_u * 60.0 / 1000.0,
        episode_return: rows.iter().map(|r| r.reward).sum(),
        duration_min: duration,
        termination: if terminated {
            EpisodeEnd::Terminated
        } else {
            EpisodeEnd::Truncated
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn synthetic(glucose: &[f64], u: f64) -> Vec<TrajectoryRow> {
        glucose
            .iter()
            .enumerate()
            .map(|(k, g)| TrajectoryRow {
                time_min: 5.0 * (k + 1) as f64,
                g_mgdl: *g,
                e: g - 90.0,
                de: 0.0,
                u_mu_per_min: u,
                reward: 1.0,
                reward_base: 1.0,
                penalty_i: 0.0,
                penalty_c: 0.0,
                meal_g: 0.0,
                terminated: false,
                truncated: k + 1 == glucose.len(),
            })
            .collect()
    }

    #[test]
    fn constant_at_reference() {
        let cfg = EnvConfig::default();
        let m = compute_metrics(&synthetic(&[90.0; 288], 10.0), &cfg);
        assert_eq!(m.time_in_range, 1.0);
        assert_eq!(m.undershoot_below_ref, 0.0);
        assert_eq!(m.overshoot_above_high, 0.0);
        assert!((m.total_insulin_u - 14.4).abs() < 1e-9);
        assert!((m.mean_u_u_per_h - 0.6).abs() < 1e-12);
        assert_eq!(m.episode_return, 288.0);
        assert_eq!(m.termination, EpisodeEnd::Truncated);
    }

    #[test]
    fn constant_high_is_never_in_range() {
        let cfg = EnvConfig::default();
        let m = compute_metrics(&synthetic(&[300.0; 288], 0.0), &cfg);
        assert_eq!(m.time_in_range, 0.0);
        assert_eq!(m.overshoot_above_high, 120.0);
    }

    #[test]
    fn hand_counted_fraction() {
        let cfg = EnvConfig::default();
        let m = compute_metrics(&synthetic(&[60.0, 70.0, 120.0, 180.0, 181.0, 200.0, 95.0, 69.9], 1.0), &cfg);
        assert_eq!(m.time_in_range, 4.0 / 8.0);
        assert_eq!(m.min_g, 60.0);
        assert_eq!(m.undershoot_below_ref, 30.0);
        assert_eq!(m.overshoot_above_high, 20.0);
    }
}
