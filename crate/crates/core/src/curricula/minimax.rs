//! Pure minimax adversary: the generator is paid the negative of the
//! student's return, so it drives toward unsolvable levels unless the
//! student keeps up. Kept mostly as a baseline — the regret-based teachers
//! replace this objective precisely because it collapses here.

use super::{
    attach_max_returns, collect_on_level, score_level_batch, Designer, DesignerConfig,
    IterationRecord, LevelLogEntry, Student,
};
use crate::env::{DomainConfig, EnvConfig};
use crate::policy::PolicyError;
use crate::ppo::PpoConfig;
use crate::scoring::ScoreConfig;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimaxTrainer {
    pub student: Student,
    pub generator: Designer,
    pub domain: DomainConfig,
    pub env_cfg: EnvConfig,
    pub ppo: PpoConfig,
    pub score_cfg: ScoreConfig,
    pub stack_depth: usize,
    pub rollout_length: usize,
    iteration: u64,
    episode_counter: u64,
}

impl MinimaxTrainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        student: Student,
        domain: DomainConfig,
        env_cfg: EnvConfig,
        ppo: PpoConfig,
        score_cfg: ScoreConfig,
        designer_cfg: DesignerConfig,
        stack_depth: usize,
        rollout_length: usize,
        rng: &mut ChaCha8Rng,
    ) -> MinimaxTrainer {
        let generator = Designer::new(&domain, &designer_cfg, &ppo, rng);
        MinimaxTrainer {
            student,
            generator,
            domain,
            env_cfg,
            ppo,
            score_cfg,
            stack_depth,
            rollout_length,
            iteration: 0,
            episode_counter: 0,
        }
    }

    /// Generate, train the student on the generated level, then pay the
    /// generator the negated student return.
    pub fn run_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let (level, gen_traj) = self.generator.design(&self.domain, rng);
        let capture = self.score_cfg.kind.needs_dists();
        let (traj, mut traces, summary) = collect_on_level(
            &level,
            self.env_cfg,
            &self.student.params,
            self.stack_depth,
            self.rollout_length,
            capture,
            self.episode_counter,
            rng,
        );
        attach_max_returns(&mut traces, None, &level, summary.max_return);
        let score =
            score_level_batch(&self.score_cfg, &traces).expect("traces carry what the kind needs");
        let stats = self.student.train(&traj, &self.ppo, rng)?;
        let gen_reward = -summary.mean_return;
        self.generator.reinforce(gen_traj, gen_reward, rng)?;
        self.episode_counter += summary.episodes as u64;
        self.iteration += 1;
        Ok(IterationRecord {
            iteration: self.iteration - 1,
            replay: false,
            level_id: level.id_hex(),
            score,
            mean_return: summary.mean_return,
            solved_fraction: summary.solved_fraction,
            episodes: summary.episodes,
            transitions: summary.transitions,
            mean_lzw_complexity: summary.mean_lzw,
            student_updates: self.student.updates,
            trained: true,
            ppo: Some(stats),
            generator_reward: Some(gen_reward),
            new_levels: vec![LevelLogEntry::new(&level, None, self.iteration - 1, "minimax")],
            ..IterationRecord::default()
        })
    }
}
