//! Offline search for static fuzzy consequents.
//!
//! Seeded uniform sampling inside the parameter box, then a compass search
//! around the incumbent: all ±step neighbours are scored, the best strict
//! improvement is taken, otherwise the step halves. The starting point
//! (midpoints unless given) is always scored, so the result never scores
//! worse than it.
//!
//! Candidates are ranked by the number of safety terminations first and by
//! mean episode return second, unless `rank_terminations` is off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::cmp::Ordering;

use crate::controller::{evaluate_grid, Controller};
use crate::env::{GlucoseEnv, ScenarioSpec};
use crate::error::{Error, Result};
use crate::fuzzy::{TsParams, PARAM_COUNT};
use crate::par::{map_ordered, Execution};
use crate::td3::EpisodeEnd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub seed: u64,
    pub random_candidates: usize,
    /// Maximum compass iterations.
    pub refine_iterations: usize,
    /// First compass step as a fraction of each range.
    pub initial_step: f64,
    /// Search stops once the step fraction falls below this.
    pub min_step: f64,
    pub rank_terminations: bool,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            seed: 0,
            random_candidates: 64,
            refine_iterations: 60,
            initial_step: 0.25,
            min_step: 1.0 / 512.0,
            rank_terminations: true,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(Error::invalid("initial_step", "must lie in (0, 1]"));
        }
        if !(self.min_step > 0.0) {
            return Err(Error::invalid("min_step", "must be > 0"));
        }
        Ok(())
    }
}

/// Objective value of one candidate over the evaluation cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub terminations: usize,
    pub mean_return: f64,
    ranked: bool,
}

impl Score {
    /// Strict "better than" under the configured ranking.
    pub fn beats(&self, other: &Score) -> bool {
        self.cmp_key(other) == Ordering::Greater
    }

    fn cmp_key(&self, other: &Score) -> Ordering {
        let by_terms = if self.ranked {
            other.terminations.cmp(&self.terminations)
        } else {
            Ordering::Equal
        };
        by_terms.then(self.mean_return.total_cmp(&other.mean_return))
    }
}

pub fn score_static(
    params: &TsParams,
    template: &GlucoseEnv,
    cases: &[(ScenarioSpec, u64)],
    rank_terminations: bool,
) -> Result<Score> {
    let eps = evaluate_grid(&Controller::Static(*params), template, cases, Execution::Sequential)?;
    Ok(Score {
        terminations: eps.iter().filter(|e| e.end() == EpisodeEnd::Terminated).count(),
        mean_return: eps.iter().map(|e| e.episode_return()).sum::<f64>() / eps.len() as f64,
        ranked: rank_terminations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub params: TsParams,
    pub score: Score,
    pub start_score: Score,
    pub evaluations: usize,
    /// Best score after each accepted or rejected compass iteration.
    pub history: Vec<Score>,
}

/// Maximizes the mean episode return of the static controller over `cases`.
pub fn tune_static(
    template: &GlucoseEnv,
    cases: &[(ScenarioSpec, u64)],
    start: Option<TsParams>,
    cfg: &TuneConfig,
    exec: Execution,
) -> Result<TuneResult> {
    cfg.validate()?;
    if cases.is_empty() {
        return Err(Error::invalid("cases", "need at least one scenario"));
    }
    let ranges = template.config().param_ranges();
    let start = start.unwrap_or_else(|| template.config().midpoint_params());
    let score = |p: &TsParams| score_static(p, template, cases, cfg.rank_terminations);
    let score_all = |ps: &[TsParams]| -> Result<Vec<Score>> { map_ordered(ps, exec, score).into_iter().collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pool = vec![start];
    for _ in 0..cfg.random_candidates {
        let mut v = [0.0; PARAM_COUNT];
        for (x, (lo, hi)) in v.iter_mut().zip(ranges) {
            *x = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        pool.push(TsParams::new(v)?);
    }
    let scores = score_all(&pool)?;
    let mut evaluations = scores.len();
    let start_score = scores[0];
    let (mut best, mut best_score) = (pool[0], scores[0]);
    for (p, s) in pool.iter().zip(&scores).skip(1) {
        if s.beats(&best_score) {
            best = *p;
            best_score = *s;
        }
    }

    let mut step = cfg.initial_step;
    let mut history = Vec::new();
    for _ in 0..cfg.refine_iterations {
        if step < cfg.min_step {
            break;
        }
        let mut neighbours = Vec::with_capacity(2 * PARAM_COUNT);
        for (k, (lo, hi)) in ranges.iter().enumerate() {
            let width = hi - lo;
            if width <= 0.0 {
                continue;
            }
            for sign in [-1.0, 1.0] {
                let mut v = *best.as_slice();
                v[k] = (v[k] + sign * step * width).clamp(*lo, *hi);
                if v[k] != best.as_slice()[k] {
                    neighbours.push(TsParams::new(v)?);
                }
            }
        }
        let scores = score_all(&neighbours)?;
        evaluations += scores.len();
        let winner = scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.beats(&best_score))
            .max_by(|a, b| a.1.cmp_key(b.1));
        match winner {
            Some((i, s)) => {
                best = neighbours[i];
                best_score = *s;
            }
            None => step *= 0.5,
        }
        history.push(best_score);
    }

    Ok(TuneResult {
        params: best,
        score: best_score,
        start_score,
        evaluations,
        history,
    })
}
