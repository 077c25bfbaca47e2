//! Level scoring functions for replay prioritisation.
//!
//! Every score maps one episode trace to a single number; higher means the
//! level is more worth revisiting. The uncertainty-style scores
//! (entropy/margin/confidence) read the policy's action distributions, the
//! TD-style ones read value-error structure, and the two regret estimators
//! (positive value loss, max-Monte-Carlo) are the ones the robust
//! curricula rely on.

use crate::ppo::{compute_gae, Trajectory};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    PolicyEntropy,
    MinMargin,
    LeastConfidence,
    OneStepTd,
    Gae,
    L1ValueLoss,
    Pvl,
    MaxMc,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 8] = [
        ScoreKind::PolicyEntropy,
        ScoreKind::MinMargin,
        ScoreKind::LeastConfidence,
        ScoreKind::OneStepTd,
        ScoreKind::Gae,
        ScoreKind::L1ValueLoss,
        ScoreKind::Pvl,
        ScoreKind::MaxMc,
    ];

    /// Scores that need the per-step action distributions.
    pub fn needs_dists(self) -> bool {
        matches!(
            self,
            ScoreKind::PolicyEntropy | ScoreKind::MinMargin | ScoreKind::LeastConfidence
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// MaxMC flavour: `false` (default) averages R_max - V(s_t) over the
    /// episode, suited to sparse rewards; `true` uses R_max - V(s_0) only.
    pub maxmc_dense: bool,
}

impl ScoreConfig {
    pub fn new(kind: ScoreKind, gamma: f64, gae_lambda: f64) -> ScoreConfig {
        ScoreConfig { kind, gamma, gae_lambda, maxmc_dense: false }
    }
}

/// Everything one episode exposes to the scoring functions.
#[derive(Debug, Clone, Default)]
pub struct EpisodeTrace {
    pub rewards: Vec<f64>,
    /// V(s_t) under the scoring policy.
    pub values: Vec<f64>,
    /// Value of the truncation state; zero when the episode terminated.
    pub bootstrap_value: f64,
    /// pi(.|s_t) per step, when the collector captured them.
    pub dists: Option<Vec<Vec<f64>>>,
    /// Highest return known for this level (MaxMC's R_max).
    pub max_return: Option<f64>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn undiscounted_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("score kind requires per-step action distributions")]
    MissingDistributions,
    #[error("MaxMC requires the level's max return")]
    MissingMaxReturn,
}

fn gae_terms(trace: &EpisodeTrace, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = trace.len();
    let mut dones = vec![false; n];
    if n > 0 {
        // A trace is a single episode: only the final step can terminate,
        // and the bootstrap value covers truncation.
        dones[n - 1] = trace.bootstrap_value == 0.0;
    }
    let traj = Trajectory {
        inputs: vec![Vec::new(); n],
        actions: vec![0; n],
        log_probs: vec![0.0; n],
        rewards: trace.rewards.clone(),
        dones,
        values: trace.values.clone(),
        bootstrap_value: trace.bootstrap_value,
        next_values: None,
    };
    let g = compute_gae(&traj, gamma, lambda);
    (g.deltas, g.advantages)
}

/// Score one episode. Empty traces score zero for every kind.
pub fn score_episode(cfg: &ScoreConfig, trace: &EpisodeTrace) -> Result<f64, ScoreError> {
    let n = trace.len();
    if n == 0 {
        return Ok(0.0);
    }
    let t = n as f64;
    match cfg.kind {
        ScoreKind::PolicyEntropy | ScoreKind::MinMargin | ScoreKind::LeastConfidence => {
            let dists = trace.dists.as_ref().ok_or(ScoreError::MissingDistributions)?;
            if dists.len() != n {
                return Err(ScoreError::MissingDistributions);
            }
            let per_step: f64 = dists
                .iter()
                .map(|p| match cfg.kind {
                    ScoreKind::PolicyEntropy => {
                        -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
                    }
                    ScoreKind::MinMargin => {
                        let (top, second) = top_two(p);
                        top - second
                    }
                    ScoreKind::LeastConfidence => 1.0 - top_two(p).0,
                    _ => unreachable!(),
                })
                .sum();
            Ok(per_step / t)
        }
        ScoreKind::OneStepTd => {
            let (deltas, _) = gae_terms(trace, cfg.gamma, cfg.gae_lambda);
            Ok(deltas.iter().map(|d| d.abs()).sum::<f64>() / t)
        }
        ScoreKind::Gae => {
            let (_, adv) = gae_terms(trace, cfg.gamma, cfg.gae_lambda);
            Ok(adv.iter().sum::<f64>() / t)
        }
        ScoreKind::L1ValueLoss => {
            let (_, adv) = gae_terms(trace, cfg.gamma, cfg.gae_lambda);
            Ok(adv.iter().map(|a| a.abs()).sum::<f64>() / t)
        }
        ScoreKind::Pvl => {
            let (_, adv) = gae_terms(trace, cfg.gamma, cfg.gae_lambda);
            Ok(adv.iter().map(|a| a.max(0.0)).sum::<f64>() / t)
        }
        ScoreKind::MaxMc => {
            let r_max = trace.max_return.ok_or(ScoreError::MissingMaxReturn)?;
            if cfg.maxmc_dense {
                Ok(r_max - trace.values[0])
            } else {
                Ok(trace.values.iter().map(|v| r_max - v).sum::<f64>() / t)
            }
        }
    }
}

/// Mean score over a batch of episodes from the same level.
pub fn score_batch(cfg: &ScoreConfig, traces: &[EpisodeTrace]) -> Result<f64, ScoreError> {
    if traces.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for tr in traces {
        acc += score_episode(cfg, tr)?;
    }
    Ok(acc / traces.len() as f64)
}

fn top_two(p: &[f64]) -> (f64, f64) {
    let mut top = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &x in p {
        if x > top {
            second = top;
            top = x;
        } else if x > second {
            second = x;
        }
    }
    if second == f64::NEG_INFINITY {
        second = 0.0; // single-action edge case: margin is the full mass
    }
    (top, second)
}
