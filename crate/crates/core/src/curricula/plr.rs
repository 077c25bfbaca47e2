//! Prioritised level replay, plain and robust.
//!
//! Each iteration flips the replay coin d. On d = 0 a fresh level comes
//! from the generator (or a finite training set); on d = 1 an old level is
//! drawn from P_replay. Plain PLR trains on both kinds of trajectory. The
//! robust variant withholds the gradient on fresh levels — they are only
//! scored and buffered — which is what turns the curriculum into a regret
//! game and motivates the regret-style scores.

use super::{
    attach_max_returns, buffer_stats, collect_on_level, sample_fresh_level, IterationRecord,
    LevelLogEntry, Student,
};
use crate::buffer::{LevelBuffer, ReplayConfig};
use crate::env::{DomainConfig, EnvConfig, Level, LevelKey};
use crate::policy::PolicyError;
use crate::ppo::PpoConfig;
use crate::scoring::{score_batch, ScoreConfig};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlrConfig {
    pub replay: ReplayConfig,
    /// Robust mode: train only on replayed levels.
    pub robust: bool,
    pub stack_depth: usize,
    pub rollout_length: usize,
    /// Finite training set (enables annealed replay probability); `None`
    /// streams unbounded domain-randomised levels.
    pub train_set: Option<Vec<Level>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlrTrainer {
    pub student: Student,
    pub buffer: LevelBuffer,
    pub domain: DomainConfig,
    pub env_cfg: EnvConfig,
    pub ppo: PpoConfig,
    pub score_cfg: ScoreConfig,
    cfg: PlrConfig,
    seen: HashSet<LevelKey>,
    /// Global episode counter c — the staleness clock.
    episode_counter: u64,
    iteration: u64,
}

impl PlrTrainer {
    pub fn new(
        student: Student,
        domain: DomainConfig,
        env_cfg: EnvConfig,
        ppo: PpoConfig,
        score_cfg: ScoreConfig,
        cfg: PlrConfig,
    ) -> PlrTrainer {
        PlrTrainer {
            student,
            buffer: LevelBuffer::new(cfg.replay.clone()),
            domain,
            env_cfg,
            ppo,
            score_cfg,
            cfg,
            seen: HashSet::new(),
            episode_counter: 0,
            iteration: 0,
        }
    }

    pub fn robust(&self) -> bool {
        self.cfg.robust
    }

    pub fn stack_depth(&self) -> usize {
        self.cfg.stack_depth
    }

    pub fn episode_counter(&self) -> u64 {
        self.episode_counter
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }

    pub fn run_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let train_set_size = self.cfg.train_set.as_ref().map(|s| s.len());
        let replay = self
            .buffer
            .replay_decision(self.seen.len(), train_set_size, rng);

        let level = if replay {
            let idx = self
                .buffer
                .sample_replay(self.episode_counter, rng)
                .expect("replay decision implies non-empty buffer");
            self.buffer.entries()[idx].level.clone()
        } else {
            sample_fresh_level(&self.domain, self.cfg.train_set.as_deref(), rng)
        };

        let capture = self.score_cfg.kind.needs_dists();
        let (traj, mut traces, summary) = collect_on_level(
            &level,
            self.env_cfg,
            &self.student.params,
            self.cfg.stack_depth,
            self.cfg.rollout_length,
            capture,
            self.episode_counter,
            rng,
        );
        attach_max_returns(&mut traces, Some(&self.buffer), &level, summary.max_return);
        let score = score_batch(&self.score_cfg, &traces).expect("trace/kind mismatch");

        // Plain PLR trains on everything; robust PLR only on replay.
        let trained = !self.cfg.robust || replay;
        let ppo_stats = if trained {
            Some(self.student.train(&traj, &self.ppo, rng)?)
        } else {
            None
        };

        self.episode_counter += summary.episodes as u64;
        let first_visit = self.seen.insert(level.key());
        self.buffer
            .update(&level, score, summary.max_return, self.episode_counter);

        let (bs, bscore, bpath, bwalls) = buffer_stats(&self.buffer);
        let rec = IterationRecord {
            iteration: self.iteration,
            replay,
            level_id: level.id_hex(),
            score,
            mean_return: summary.mean_return,
            solved_fraction: summary.solved_fraction,
            episodes: summary.episodes,
            transitions: summary.transitions,
            mean_lzw_complexity: summary.mean_lzw,
            buffer_size: bs,
            buffer_mean_score: bscore,
            buffer_mean_path_length: bpath,
            buffer_mean_wall_count: bwalls,
            student_updates: self.student.updates,
            trained,
            ppo: ppo_stats,
            new_levels: if first_visit {
                vec![LevelLogEntry::new(&level, None, self.iteration, "dr")]
            } else {
                Vec::new()
            },
            ..IterationRecord::default()
        };
        self.iteration += 1;
        Ok(rec)
    }
}
