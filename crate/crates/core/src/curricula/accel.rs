//! ACCEL: evolve the replay buffer by editing its highest-regret levels.
//!
//! The generator here is deliberately dumb — domain-random or even empty
//! rooms — because complexity is meant to come from evolution: on every
//! replay iteration the student trains, then the most promising levels of
//! the replay batch are mutated a few cells at a time and the children are
//! evaluated (stop-gradient) and admitted to the buffer only if they score
//! above the level they would displace. Over many generations the buffer
//! walks toward levels at the frontier of the student's ability.

use super::{
    attach_max_returns, buffer_stats, collect_on_level, sample_fresh_level, BatchSummary,
    IterationRecord, LevelLogEntry, Student,
};
use crate::buffer::{LevelBuffer, ReplayConfig};
use crate::env::{
    apply_edits, attach_ice, random_edit, DomainConfig, EnvConfig, Facing, GridSpec, Level,
    LevelKey, LevelPayload, MazeLevel,
};
use crate::policy::PolicyError;
use crate::ppo::{PpoConfig, Trajectory};
use crate::scoring::{score_batch, ScoreConfig};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelGenerator {
    /// Fresh levels from the full domain-randomisation distribution.
    DomainRandom,
    /// Levels with no interior walls at all; evolution does the rest.
    EmptyRoom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditCriterion {
    /// Edit only the best replay-batch level by score minus return.
    Hard,
    /// Edit every level in the replay batch.
    Batch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccelConfig {
    pub replay: ReplayConfig,
    pub generator: AccelGenerator,
    /// Number of random single-cell mutations composed into each child.
    pub edits: usize,
    pub criterion: EditCriterion,
    /// Buffer is prefilled with `capacity * rho_fill` generator levels.
    pub rho_fill: f64,
    /// Levels drawn per replay iteration (the edit-target pool).
    pub replay_batch: usize,
    pub stack_depth: usize,
    pub rollout_length: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccelTrainer {
    pub student: Student,
    pub buffer: LevelBuffer,
    pub domain: DomainConfig,
    pub env_cfg: EnvConfig,
    pub ppo: PpoConfig,
    pub score_cfg: ScoreConfig,
    /// Lineage entries for the prefill levels; the harness writes these
    /// before the first iteration so every later parent id resolves.
    pub prefill_log: Vec<LevelLogEntry>,
    cfg: AccelConfig,
    seen: HashSet<LevelKey>,
    episode_counter: u64,
    iteration: u64,
}

impl AccelTrainer {
    pub fn new(
        student: Student,
        domain: DomainConfig,
        env_cfg: EnvConfig,
        ppo: PpoConfig,
        score_cfg: ScoreConfig,
        cfg: AccelConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<AccelTrainer, PolicyError> {
        let mut t = AccelTrainer {
            student,
            buffer: LevelBuffer::new(cfg.replay.clone()),
            domain,
            env_cfg,
            ppo,
            score_cfg,
            prefill_log: Vec::new(),
            cfg,
            seen: HashSet::new(),
            episode_counter: 0,
            iteration: 0,
        };
        let fill = (t.cfg.replay.capacity as f64 * t.cfg.rho_fill).round() as usize;
        for _ in 0..fill {
            let level = t.generate(rng);
            let (score, summary) = t.evaluate(&level, rng);
            t.buffer.update(&level, score, summary.max_return, t.episode_counter);
            if t.seen.insert(level.key()) {
                t.prefill_log.push(LevelLogEntry::new(&level, None, 0, "prefill"));
            }
        }
        Ok(t)
    }

    pub fn stack_depth(&self) -> usize {
        self.cfg.stack_depth
    }

    pub fn episode_counter(&self) -> u64 {
        self.episode_counter
    }

    fn generate(&self, rng: &mut ChaCha8Rng) -> Level {
        match self.cfg.generator {
            AccelGenerator::DomainRandom => sample_fresh_level(&self.domain, None, rng),
            AccelGenerator::EmptyRoom => empty_room(&self.domain, rng),
        }
    }

    /// Stop-gradient evaluation: roll the student, score the traces, touch
    /// nothing but the episode counter.
    fn evaluate(&mut self, level: &Level, rng: &mut ChaCha8Rng) -> (f64, BatchSummary) {
        let (_, traces, summary) = self.collect(level, rng);
        (self.score(traces, level, summary.max_return), summary)
    }

    fn collect(
        &mut self,
        level: &Level,
        rng: &mut ChaCha8Rng,
    ) -> (Trajectory, Vec<crate::scoring::EpisodeTrace>, BatchSummary) {
        let capture = self.score_cfg.kind.needs_dists();
        let out = collect_on_level(
            level,
            self.env_cfg,
            &self.student.params,
            self.cfg.stack_depth,
            self.cfg.rollout_length,
            capture,
            self.episode_counter,
            rng,
        );
        self.episode_counter += out.2.episodes as u64;
        out
    }

    fn score(
        &self,
        mut traces: Vec<crate::scoring::EpisodeTrace>,
        level: &Level,
        batch_max: f64,
    ) -> f64 {
        attach_max_returns(&mut traces, Some(&self.buffer), level, batch_max);
        score_batch(&self.score_cfg, &traces).expect("trace/kind mismatch")
    }

    pub fn run_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let replay = self.buffer.replay_decision(self.seen.len(), None, rng);
        let rec = if replay {
            self.replay_and_edit(rng)
        } else {
            self.generate_iteration(rng)
        };
        self.iteration += 1;
        rec
    }

    /// d = 0: a generator level is evaluated with a stop-gradient and
    /// admitted through the buffer's usual displacement threshold.
    fn generate_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let level = self.generate(rng);
        let (score, summary) = self.evaluate(&level, rng);
        self.buffer.update(&level, score, summary.max_return, self.episode_counter);
        let origin = match self.cfg.generator {
            AccelGenerator::DomainRandom => "dr",
            AccelGenerator::EmptyRoom => "empty_room",
        };
        let new_levels = if self.seen.insert(level.key()) {
            vec![LevelLogEntry::new(&level, None, self.iteration, origin)]
        } else {
            Vec::new()
        };
        Ok(self.record(false, &level, score, summary, None, new_levels))
    }

    /// d = 1: replay a batch, train on all of it, then mutate the edit
    /// targets and let their children fight for buffer slots.
    fn replay_and_edit(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let batch = self.cfg.replay_batch.max(1);
        let mut levels = Vec::with_capacity(batch);
        for _ in 0..batch {
            let idx = self
                .buffer
                .sample_replay(self.episode_counter, rng)
                .expect("replay decision implies non-empty buffer");
            levels.push(self.buffer.entries()[idx].level.clone());
        }

        let mut joint = Trajectory::default();
        let mut per_level: Vec<(Level, f64, BatchSummary)> = Vec::with_capacity(batch);
        for level in levels {
            let (traj, traces, summary) = self.collect(&level, rng);
            let score = self.score(traces, &level, summary.max_return);
            joint.extend(traj);
            per_level.push((level, score, summary));
        }
        let stats = self.student.train(&joint, &self.ppo, rng)?;
        for (level, score, summary) in &per_level {
            self.buffer.update(level, *score, summary.max_return, self.episode_counter);
        }

        // Edit-target selection: regret proxy minus achieved return, so the
        // frontier (high score, low return) gets mutated first.
        let targets: Vec<usize> = match self.cfg.criterion {
            EditCriterion::Batch => (0..per_level.len()).collect(),
            EditCriterion::Hard => {
                let best = per_level
                    .iter()
                    .enumerate()
                    .max_by(|(_, a), (_, b)| {
                        let ka = a.1 - a.2.mean_return;
                        let kb = b.1 - b.2.mean_return;
                        ka.partial_cmp(&kb).expect("scores are finite")
                    })
                    .map(|(i, _)| i)
                    .expect("non-empty replay batch");
                vec![best]
            }
        };

        let mut new_levels = Vec::new();
        for &ti in &targets {
            let parent = per_level[ti].0.clone();
            let ops: Vec<_> = (0..self.cfg.edits).map(|_| random_edit(&parent, rng)).collect();
            let child = match apply_edits(&parent, &ops, rng) {
                Ok(c) => c,
                // A pathological mutation (e.g. walls swallowing every free
                // cell) is dropped rather than crashing the run.
                Err(_) => continue,
            };
            let (score, summary) = self.evaluate(&child, rng);
            self.buffer.update(&child, score, summary.max_return, self.episode_counter);
            if self.seen.insert(child.key()) {
                new_levels.push(LevelLogEntry::new(&child, Some(&parent), self.iteration, "edit"));
            }
        }

        let (level, score, summary) = per_level.swap_remove(0);
        let mut agg = summary;
        for (_, _, s) in &per_level {
            agg.episodes += s.episodes;
            agg.transitions += s.transitions;
        }
        Ok(self.record(true, &level, score, agg, Some(stats), new_levels))
    }

    fn record(
        &self,
        replay: bool,
        level: &Level,
        score: f64,
        summary: BatchSummary,
        ppo: Option<crate::ppo::PpoStats>,
        new_levels: Vec<LevelLogEntry>,
    ) -> IterationRecord {
        let (bs, bscore, bpath, bwalls) = buffer_stats(&self.buffer);
        IterationRecord {
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
            trained: replay,
            ppo,
            new_levels,
            ..IterationRecord::default()
        }
    }
}

/// A level with zero interior walls: entities dropped on an open floor.
/// Non-grid families fall back to domain randomisation (nothing to empty).
fn empty_room(domain: &DomainConfig, rng: &mut ChaCha8Rng) -> Level {
    let dims = match domain {
        DomainConfig::Maze(m) => m.clone(),
        DomainConfig::IcyMaze(i) => i.maze.clone(),
        DomainConfig::FruitChoice(_) => return sample_fresh_level(domain, None, rng),
    };
    let grid = GridSpec::open(dims.width, dims.height);
    let cells = grid.empty_interior_cells();
    let goal = cells[rng.gen_range(0..cells.len())];
    let agent = loop {
        let c = cells[rng.gen_range(0..cells.len())];
        if c != goal {
            break c;
        }
    };
    let maze = MazeLevel { grid, agent, facing: Facing::ALL[rng.gen_range(0..4)], goal };
    let payload = match domain {
        DomainConfig::IcyMaze(i) => {
            LevelPayload::IcyMaze(attach_ice(maze, i, rng).expect("validated prior"))
        }
        _ => LevelPayload::Maze(maze),
    };
    Level { payload, seed: rng.next_u64() }
}
