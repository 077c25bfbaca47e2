//! Curriculum orchestrators: who decides which level the student trains on.
//!
//! Every trainer exposes the same per-iteration contract — pick a level
//! (fresh or replayed), roll the student on it, maybe train, maybe update a
//! replay buffer — and returns an [`IterationRecord`] describing exactly
//! what happened, which the experiment harness streams to disk. All
//! randomness flows through the caller-provided RNG, so a (config, seed)
//! pair pins the entire run.

mod accel;
mod designer;
mod minimax;
mod paired;
mod plr;

pub use accel::{AccelConfig, AccelGenerator, AccelTrainer, EditCriterion};
pub use designer::{Designer, DesignerConfig};
pub use minimax::MinimaxTrainer;
pub use paired::{relative_regret, PairedConfig, PairedTrainer};
pub use plr::{PlrConfig, PlrTrainer};

use crate::buffer::LevelBuffer;
use crate::env::{analysis, DomainConfig, EnvConfig, Level, LevelPayload};
use crate::optim::Optimizer;
use crate::policy::{PolicyError, PolicyParams};
use crate::ppo::{ppo_update, PpoConfig, PpoStats, Trajectory};
use crate::rollout::{play_episode, Actor};
use crate::scoring::{score_batch, EpisodeTrace, ScoreConfig};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumKind {
    Dr,
    Plr,
    RobustPlr,
    Minimax,
    Paired,
    Repaired,
    Accel,
    Samplr,
}

impl CurriculumKind {
    pub fn name(self) -> &'static str {
        match self {
            CurriculumKind::Dr => "dr",
            CurriculumKind::Plr => "plr",
            CurriculumKind::RobustPlr => "robust_plr",
            CurriculumKind::Minimax => "minimax",
            CurriculumKind::Paired => "paired",
            CurriculumKind::Repaired => "repaired",
            CurriculumKind::Accel => "accel",
            CurriculumKind::Samplr => "samplr",
        }
    }
}

/// A learner: parameters plus optimiser plus update counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Student {
    pub params: PolicyParams,
    pub opt: Optimizer,
    /// Number of PPO updates actually applied (the stop-gradient ledger).
    pub updates: u64,
}

impl Student {
    pub fn new(params: PolicyParams, ppo: &PpoConfig) -> Student {
        let opt = Optimizer::new(
            ppo.optimizer,
            ppo.lr,
            Some(ppo.max_grad_norm),
            params.theta.len(),
        );
        Student { params, opt, updates: 0 }
    }

    pub fn train(
        &mut self,
        traj: &Trajectory,
        ppo: &PpoConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<PpoStats, PolicyError> {
        let stats = ppo_update(&mut self.params, &mut self.opt, traj, ppo, rng)?;
        self.updates += 1;
        stats_ok(stats)
    }
}

fn stats_ok(stats: PpoStats) -> Result<PpoStats, PolicyError> {
    Ok(stats)
}

/// Summary facts about one on-level batch of episodes.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchSummary {
    pub episodes: usize,
    pub transitions: usize,
    pub mean_return: f64,
    pub max_return: f64,
    pub solved_fraction: f64,
    pub mean_steps: f64,
    /// Mean LZW code count of the per-episode action sequences.
    pub mean_lzw: f64,
}

/// Roll the student on one level until at least `min_transitions` have been
/// collected (and at least one episode). Returns the PPO-ready batch, the
/// per-episode scoring traces, and summary statistics.
pub fn collect_on_level(
    level: &Level,
    env_cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    min_transitions: usize,
    capture_dists: bool,
    episode_seed_base: u64,
    rng: &mut ChaCha8Rng,
) -> (Trajectory, Vec<EpisodeTrace>, BatchSummary) {
    let mut traj = Trajectory::default();
    let mut traces = Vec::new();
    let mut summary = BatchSummary { max_return: f64::NEG_INFINITY, ..BatchSummary::default() };
    let mut solved = 0usize;
    while traj.len() < min_transitions.max(1) {
        let mut actor = Actor::network(params);
        let out = play_episode(
            level,
            env_cfg,
            &mut actor,
            stack_depth,
            capture_dists,
            episode_seed_base + summary.episodes as u64,
            rng,
        )
        .expect("curriculum levels are validated before collection");
        summary.episodes += 1;
        summary.transitions += out.steps;
        summary.mean_return += out.undiscounted_return;
        summary.max_return = summary.max_return.max(out.undiscounted_return);
        summary.mean_steps += out.steps as f64;
        summary.mean_lzw += crate::metrics::lzw_complexity(&out.traj.actions).unwrap_or(0) as f64;
        if episode_solved(level, &out.traj, out.reached_goal) {
            solved += 1;
        }
        traces.push(out.trace);
        traj.extend(out.traj);
    }
    let n = summary.episodes as f64;
    summary.mean_return /= n;
    summary.mean_steps /= n;
    summary.mean_lzw /= n;
    summary.solved_fraction = solved as f64 / n;
    (traj, traces, summary)
}

pub(crate) fn episode_solved(level: &Level, traj: &Trajectory, reached_goal: bool) -> bool {
    match level.payload {
        LevelPayload::FruitChoice(_) => traj.rewards.iter().sum::<f64>() > 0.0,
        _ => reached_goal,
    }
}

/// Fill in the MaxMC reference return on each trace: the best return ever
/// seen on this level (buffer history plus the current batch).
pub fn attach_max_returns(
    traces: &mut [EpisodeTrace],
    buffer: Option<&LevelBuffer>,
    level: &Level,
    batch_max: f64,
) {
    let mut r_max = batch_max;
    if let Some(buf) = buffer {
        if let Some(e) = buf.get(level.key()) {
            r_max = r_max.max(e.max_return);
        }
    }
    for t in traces.iter_mut() {
        t.max_return = Some(r_max);
    }
}

/// Score a batch of traces for buffer insertion.
pub fn score_level_batch(
    cfg: &ScoreConfig,
    traces: &[EpisodeTrace],
) -> Result<f64, crate::scoring::ScoreError> {
    score_batch(cfg, traces)
}

/// One line of the run's level log: lineage for generated/edited levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelLogEntry {
    pub key: String,
    pub parent: Option<String>,
    pub iteration: u64,
    pub origin: String,
    pub wall_count: usize,
    pub path_length: usize,
}

impl LevelLogEntry {
    pub fn new(level: &Level, parent: Option<&Level>, iteration: u64, origin: &str) -> LevelLogEntry {
        LevelLogEntry {
            key: level.id_hex(),
            parent: parent.map(|p| p.id_hex()),
            iteration,
            origin: origin.to_string(),
            wall_count: analysis::block_count(level),
            path_length: analysis::shortest_path_length(level),
        }
    }
}

/// Everything one curriculum iteration reports upstream.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    /// Replay decision d (true = replayed an existing level).
    pub replay: bool,
    pub level_id: String,
    pub score: f64,
    pub mean_return: f64,
    pub solved_fraction: f64,
    pub episodes: usize,
    pub transitions: usize,
    /// Mean LZW code count of this iteration's action sequences.
    pub mean_lzw_complexity: f64,
    pub buffer_size: usize,
    pub buffer_mean_score: f64,
    pub buffer_mean_path_length: f64,
    pub buffer_mean_wall_count: f64,
    pub student_updates: u64,
    pub trained: bool,
    pub ppo: Option<PpoStats>,
    /// Adversarial curricula: the generator's scalar reward this iteration.
    pub generator_reward: Option<f64>,
    /// Levels first seen this iteration (with lineage), for the level log.
    pub new_levels: Vec<LevelLogEntry>,
    /// Aleatoric-correction telemetry (SAMPLR runs only).
    pub posterior_alpha: Option<f64>,
    pub posterior_beta: Option<f64>,
    pub fictitious_rate: Option<f64>,
    pub real_rate: Option<f64>,
}

/// Buffer composition statistics for the record.
pub fn buffer_stats(buffer: &LevelBuffer) -> (usize, f64, f64, f64) {
    let n = buffer.len();
    if n == 0 {
        return (0, 0.0, 0.0, 0.0);
    }
    let mean_score = buffer.entries().iter().map(|e| e.score).sum::<f64>() / n as f64;
    let (path, blocks) = analysis::mean_complexity(buffer.entries().iter().map(|e| &e.level));
    (n, mean_score, path, blocks)
}

/// Domain-randomisation sampling shared by several trainers.
pub fn sample_fresh_level(
    domain: &DomainConfig,
    train_set: Option<&[Level]>,
    rng: &mut ChaCha8Rng,
) -> Level {
    use rand::Rng;
    match train_set {
        Some(set) => set[rng.gen_range(0..set.len())].clone(),
        None => crate::env::sample_dr_level(domain, rng).expect("validated domain config"),
    }
}

/// Plain domain-randomisation baseline: fresh level every iteration, train
/// on everything, no buffer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrTrainer {
    pub student: Student,
    pub domain: DomainConfig,
    pub env_cfg: EnvConfig,
    pub ppo: PpoConfig,
    pub score_cfg: ScoreConfig,
    pub stack_depth: usize,
    pub rollout_length: usize,
    pub train_set: Option<Vec<Level>>,
    iteration: u64,
    episode_counter: u64,
}

impl DrTrainer {
    pub fn new(
        student: Student,
        domain: DomainConfig,
        env_cfg: EnvConfig,
        ppo: PpoConfig,
        score_cfg: ScoreConfig,
        stack_depth: usize,
        rollout_length: usize,
        train_set: Option<Vec<Level>>,
    ) -> DrTrainer {
        DrTrainer {
            student,
            domain,
            env_cfg,
            ppo,
            score_cfg,
            stack_depth,
            rollout_length,
            train_set,
            iteration: 0,
            episode_counter: 0,
        }
    }

    pub fn run_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let level = sample_fresh_level(&self.domain, self.train_set.as_deref(), rng);
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
        let score = score_batch(&self.score_cfg, &traces).expect("traces carry what the kind needs");
        let stats = self.student.train(&traj, &self.ppo, rng)?;
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
            new_levels: vec![LevelLogEntry::new(&level, None, self.iteration - 1, "dr")],
            ..IterationRecord::default()
        })
    }
}
