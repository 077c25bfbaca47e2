//! PAIRED and REPAIRED: regret-driven adversarial curricula.
//!
//! Both pit a protagonist against an antagonist of the same architecture
//! and pay the level generator the *relative regret* — antagonist return
//! minus protagonist return — so the teacher profits from levels the
//! antagonist can already solve but the protagonist cannot, which bends
//! the curriculum toward solvable-but-hard rather than impossible.
//!
//! PAIRED trains both students directly on every generated level. REPAIRED
//! wraps the same players in the replay machinery: generated levels are
//! only evaluated (stop-gradient) and buffered, and gradient updates happen
//! exclusively on levels each student replays from its own buffer.

use super::{
    attach_max_returns, buffer_stats, collect_on_level, Designer, DesignerConfig, IterationRecord,
    LevelLogEntry, Student,
};
use crate::buffer::{LevelBuffer, ReplayConfig};
use crate::env::{DomainConfig, EnvConfig, Level, LevelKey};
use crate::policy::{PolicyError, PolicyParams};
use crate::ppo::PpoConfig;
use crate::rollout::{mean_return, ActorSpec};
use crate::scoring::{score_batch, ScoreConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Antagonist mean return minus protagonist mean return on one level.
///
/// Both actors are run for the same episode count with the same seed, so
/// the environment draws (and, for network actors, the sampling stream)
/// line up pairwise: two bitwise-identical policies score exactly zero.
pub fn relative_regret(
    level: &Level,
    env_cfg: EnvConfig,
    protagonist: (ActorSpec, Option<&PolicyParams>),
    antagonist: (ActorSpec, Option<&PolicyParams>),
    stack_depth: usize,
    episodes: usize,
    seed: u64,
) -> f64 {
    let j = |(spec, params): (ActorSpec, Option<&PolicyParams>)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mean_return(level, env_cfg, || spec, params, episodes, stack_depth, &mut rng)
    };
    j(antagonist) - j(protagonist)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedConfig {
    /// Replay machinery shared by both per-student buffers.
    pub replay: ReplayConfig,
    /// true = REPAIRED (replay flow with stop-gradient generation);
    /// false = plain PAIRED (train on every generated level, no buffers).
    pub replay_enabled: bool,
    pub designer: DesignerConfig,
    pub stack_depth: usize,
    pub rollout_length: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedTrainer {
    pub protagonist: Student,
    pub antagonist: Student,
    pub generator: Designer,
    pub protagonist_buffer: LevelBuffer,
    pub antagonist_buffer: LevelBuffer,
    pub domain: DomainConfig,
    pub env_cfg: EnvConfig,
    pub ppo: PpoConfig,
    pub score_cfg: ScoreConfig,
    cfg: PairedConfig,
    seen: HashSet<LevelKey>,
    episode_counter: u64,
    iteration: u64,
}

impl PairedTrainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        protagonist: Student,
        antagonist: Student,
        domain: DomainConfig,
        env_cfg: EnvConfig,
        ppo: PpoConfig,
        score_cfg: ScoreConfig,
        cfg: PairedConfig,
        rng: &mut ChaCha8Rng,
    ) -> PairedTrainer {
        let generator = Designer::new(&domain, &cfg.designer, &ppo, rng);
        PairedTrainer {
            protagonist,
            antagonist,
            generator,
            protagonist_buffer: LevelBuffer::new(cfg.replay.clone()),
            antagonist_buffer: LevelBuffer::new(cfg.replay.clone()),
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

    pub fn replay_enabled(&self) -> bool {
        self.cfg.replay_enabled
    }

    pub fn stack_depth(&self) -> usize {
        self.cfg.stack_depth
    }

    pub fn episode_counter(&self) -> u64 {
        self.episode_counter
    }

    pub fn run_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let replay = self.cfg.replay_enabled
            && self.protagonist_buffer.replay_decision(self.seen.len(), None, rng);
        let rec = if replay { self.replay_iteration(rng) } else { self.generate_iteration(rng) };
        self.iteration += 1;
        rec
    }

    /// d = 0: the generator emits a level, both students run it with the
    /// same episode seeds, and the generator is paid the relative regret.
    /// PAIRED additionally trains both students on their trajectories;
    /// REPAIRED drops them (stop-gradient) and only updates the buffers.
    fn generate_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let (level, gen_traj) = self.generator.design(&self.domain, rng);
        let capture = self.score_cfg.kind.needs_dists();
        let seed_base = self.episode_counter;
        let (p_traj, mut p_traces, p_sum) = collect_on_level(
            &level,
            self.env_cfg,
            &self.protagonist.params,
            self.cfg.stack_depth,
            self.cfg.rollout_length,
            capture,
            seed_base,
            rng,
        );
        let (a_traj, mut a_traces, a_sum) = collect_on_level(
            &level,
            self.env_cfg,
            &self.antagonist.params,
            self.cfg.stack_depth,
            self.cfg.rollout_length,
            capture,
            seed_base,
            rng,
        );
        let regret = a_sum.mean_return - p_sum.mean_return;

        let train_directly = !self.cfg.replay_enabled;
        let p_stats = if train_directly {
            let s = self.protagonist.train(&p_traj, &self.ppo, rng)?;
            self.antagonist.train(&a_traj, &self.ppo, rng)?;
            Some(s)
        } else {
            None
        };

        attach_max_returns(&mut p_traces, Some(&self.protagonist_buffer), &level, p_sum.max_return);
        attach_max_returns(&mut a_traces, Some(&self.antagonist_buffer), &level, a_sum.max_return);
        let p_score = score_batch(&self.score_cfg, &p_traces).expect("trace/kind mismatch");
        let a_score = score_batch(&self.score_cfg, &a_traces).expect("trace/kind mismatch");

        self.episode_counter += (p_sum.episodes + a_sum.episodes) as u64;
        if self.cfg.replay_enabled {
            self.protagonist_buffer.update(&level, p_score, p_sum.max_return, self.episode_counter);
            self.antagonist_buffer.update(&level, a_score, a_sum.max_return, self.episode_counter);
        }
        self.generator.reinforce(gen_traj, regret, rng)?;

        let first_visit = self.seen.insert(level.key());
        let origin = if self.cfg.replay_enabled { "repaired" } else { "paired" };
        let (bs, bscore, bpath, bwalls) = buffer_stats(&self.protagonist_buffer);
        Ok(IterationRecord {
            iteration: self.iteration,
            replay: false,
            level_id: level.id_hex(),
            score: p_score,
            mean_return: p_sum.mean_return,
            solved_fraction: p_sum.solved_fraction,
            episodes: p_sum.episodes + a_sum.episodes,
            transitions: p_sum.transitions + a_sum.transitions,
            mean_lzw_complexity: pooled_lzw(&p_sum, &a_sum),
            buffer_size: bs,
            buffer_mean_score: bscore,
            buffer_mean_path_length: bpath,
            buffer_mean_wall_count: bwalls,
            student_updates: self.protagonist.updates,
            trained: train_directly,
            ppo: p_stats,
            generator_reward: Some(regret),
            new_levels: if first_visit {
                vec![LevelLogEntry::new(&level, None, self.iteration, origin)]
            } else {
                Vec::new()
            },
            ..IterationRecord::default()
        })
    }

    /// d = 1: each student replays from its own buffer and trains; the
    /// generator sits this one out.
    fn replay_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let (p_level, p_score, p_sum, p_stats) = self.replay_one(Side::Protagonist, rng)?;
        let (_, _, a_sum, _) = self.replay_one(Side::Antagonist, rng)?;
        let (bs, bscore, bpath, bwalls) = buffer_stats(&self.protagonist_buffer);
        Ok(IterationRecord {
            iteration: self.iteration,
            replay: true,
            level_id: p_level.id_hex(),
            score: p_score,
            mean_return: p_sum.mean_return,
            solved_fraction: p_sum.solved_fraction,
            episodes: p_sum.episodes + a_sum.episodes,
            transitions: p_sum.transitions + a_sum.transitions,
            mean_lzw_complexity: pooled_lzw(&p_sum, &a_sum),
            buffer_size: bs,
            buffer_mean_score: bscore,
            buffer_mean_path_length: bpath,
            buffer_mean_wall_count: bwalls,
            student_updates: self.protagonist.updates,
            trained: true,
            ppo: Some(p_stats),
            ..IterationRecord::default()
        })
    }

    fn replay_one(
        &mut self,
        side: Side,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Level, f64, super::BatchSummary, crate::ppo::PpoStats), PolicyError> {
        let (student, buffer) = match side {
            Side::Protagonist => (&mut self.protagonist, &mut self.protagonist_buffer),
            Side::Antagonist => (&mut self.antagonist, &mut self.antagonist_buffer),
        };
        let idx = buffer
            .sample_replay(self.episode_counter, rng)
            .expect("replay decision implies non-empty buffer");
        let level = buffer.entries()[idx].level.clone();
        let capture = self.score_cfg.kind.needs_dists();
        let (traj, mut traces, summary) = collect_on_level(
            &level,
            self.env_cfg,
            &student.params,
            self.cfg.stack_depth,
            self.cfg.rollout_length,
            capture,
            self.episode_counter,
            rng,
        );
        attach_max_returns(&mut traces, Some(buffer), &level, summary.max_return);
        let score = score_batch(&self.score_cfg, &traces).expect("trace/kind mismatch");
        let stats = student.train(&traj, &self.ppo, rng)?;
        self.episode_counter += summary.episodes as u64;
        buffer.update(&level, score, summary.max_return, self.episode_counter);
        Ok((level, score, summary, stats))
    }
}

enum Side {
    Protagonist,
    Antagonist,
}

/// Episode-weighted action-complexity mean across the two students' batches.
fn pooled_lzw(p: &super::BatchSummary, a: &super::BatchSummary) -> f64 {
    let (pn, an) = (p.episodes as f64, a.episodes as f64);
    (p.mean_lzw * pn + a.mean_lzw * an) / (pn + an)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::{Prioritization, ReplayRate};
    use crate::curricula::tests::maze_setup;
    use crate::env::{EnvKind, Facing, GridSpec, LevelPayload, MazeLevel};
    use crate::scoring::ScoreKind;

    fn open_level() -> Level {
        Level {
            payload: LevelPayload::Maze(MazeLevel {
                grid: GridSpec::open(7, 7),
                agent: (1, 5),
                facing: Facing::North,
                goal: (5, 1),
            }),
            seed: 0,
        }
    }

    fn paired_cfg(replay_enabled: bool, p: f64) -> PairedConfig {
        PairedConfig {
            replay: ReplayConfig {
                capacity: 16,
                temperature: 0.3,
                staleness_coef: 0.3,
                prioritization: Prioritization::Rank,
                replay_rate: ReplayRate::Fixed(p),
                score_kind: ScoreKind::L1ValueLoss,
            },
            replay_enabled,
            designer: DesignerConfig { hidden: vec![16], ..DesignerConfig::default() },
            stack_depth: 2,
            rollout_length: 16,
        }
    }

    fn trainer(replay_enabled: bool, p: f64, seed: u64) -> (PairedTrainer, ChaCha8Rng) {
        let (protagonist, domain, env_cfg, ppo, score_cfg) = maze_setup(seed);
        let (antagonist, _, _, _, _) = maze_setup(seed + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let t = PairedTrainer::new(
            protagonist,
            antagonist,
            domain,
            env_cfg,
            ppo,
            score_cfg,
            paired_cfg(replay_enabled, p),
            &mut rng,
        );
        (t, rng)
    }

    #[test]
    fn identical_policies_have_exactly_zero_regret() {
        let (t, _) = trainer(false, 0.0, 70);
        let level = open_level();
        let params = t.protagonist.params.clone();
        let r = relative_regret(
            &level,
            t.env_cfg,
            (ActorSpec::NetworkSampled, Some(&params)),
            (ActorSpec::NetworkSampled, Some(&params)),
            2,
            4,
            123,
        );
        assert_eq!(r, 0.0, "paired seeds + identical policies must cancel exactly");
    }

    #[test]
    fn oracle_antagonist_beats_uniform_protagonist() {
        let mut cfg = EnvConfig::default_for(EnvKind::Maze);
        cfg.t_max = 60;
        let r = relative_regret(
            &open_level(),
            cfg,
            (ActorSpec::Uniform, None),
            (ActorSpec::Planner, None),
            2,
            20,
            7,
        );
        assert!(r > 0.0, "BFS oracle vs uniform on a solvable maze, got {r}");
    }

    #[test]
    fn regret_is_antisymmetric() {
        let (t, _) = trainer(false, 0.0, 72);
        let level = open_level();
        let mut cfg = t.env_cfg;
        cfg.t_max = 60;
        let a = (ActorSpec::Planner, None);
        let b = (ActorSpec::NetworkSampled, Some(&t.protagonist.params));
        let fwd = relative_regret(&level, cfg, b, a, 2, 6, 11);
        let rev = relative_regret(&level, cfg, a, b, 2, 6, 11);
        assert!((fwd + rev).abs() < 1e-12);
    }

    #[test]
    fn paired_trains_both_students_and_generator_every_iteration() {
        let (mut t, mut rng) = trainer(false, 0.0, 74);
        for i in 0..3u64 {
            let rec = t.run_iteration(&mut rng).unwrap();
            assert!(!rec.replay);
            assert!(rec.trained);
            assert_eq!(t.protagonist.updates, i + 1);
            assert_eq!(t.antagonist.updates, i + 1);
            assert_eq!(t.generator.net.updates, i + 1);
            assert!(rec.generator_reward.is_some());
            assert_eq!(rec.buffer_size, 0, "plain PAIRED keeps no buffers");
        }
    }

    #[test]
    fn repaired_generation_freezes_students_but_not_generator() {
        // Replay rate 0: every iteration generates.
        let (mut t, mut rng) = trainer(true, 0.0, 76);
        let p0 = t.protagonist.params.theta_hash();
        let a0 = t.antagonist.params.theta_hash();
        let g0 = t.generator.net.params.theta_hash();
        for _ in 0..3 {
            let rec = t.run_iteration(&mut rng).unwrap();
            assert!(!rec.replay);
            assert!(!rec.trained);
            assert!(rec.ppo.is_none());
        }
        assert_eq!(t.protagonist.params.theta_hash(), p0, "stop-gradient on d=0");
        assert_eq!(t.antagonist.params.theta_hash(), a0, "stop-gradient on d=0");
        assert_ne!(t.generator.net.params.theta_hash(), g0, "generator must learn");
        assert_eq!(t.protagonist_buffer.len(), 3);
        assert_eq!(t.antagonist_buffer.len(), 3);
    }

    #[test]
    fn repaired_replay_trains_students_and_freezes_generator() {
        // Rate 1: after the forced first generation, every iteration replays.
        let (mut t, mut rng) = trainer(true, 1.0, 78);
        let first = t.run_iteration(&mut rng).unwrap();
        assert!(!first.replay, "empty buffer forces d=0");
        let g_after_gen = t.generator.net.params.theta_hash();
        let mut d1 = 0u64;
        for _ in 0..3 {
            let rec = t.run_iteration(&mut rng).unwrap();
            assert!(rec.replay);
            assert!(rec.trained);
            d1 += 1;
            assert_eq!(t.protagonist.updates, d1, "updates must equal d=1 count");
            assert_eq!(t.antagonist.updates, d1);
        }
        assert_eq!(
            t.generator.net.params.theta_hash(),
            g_after_gen,
            "generator must not move on replay iterations"
        );
    }

    #[test]
    fn generated_levels_respect_the_wall_budget() {
        let (mut t, mut rng) = trainer(true, 0.0, 80);
        for _ in 0..5 {
            let rec = t.run_iteration(&mut rng).unwrap();
            for entry in &rec.new_levels {
                assert!(entry.wall_count <= 6, "budget W=6 with no-op collisions");
                assert_eq!(entry.origin, "repaired");
            }
        }
    }
}
