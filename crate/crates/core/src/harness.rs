//! Experiment plumbing: configuration, the training loop, run-directory
//! layout, checkpoint/resume, and the metrics files.
//!
//! A run directory always contains `config.json`, `metrics.csv`,
//! `checkpoints/`, `levels.jsonl`, `timings.csv`, and (once the run
//! finishes) `final_eval.json`. `metrics.csv` is a pure function of the
//! config and master seed: wall-clock timings live in the `timings.csv`
//! sidecar precisely so repeated runs produce byte-identical metrics.

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{LevelBuffer, ReplayConfig};
use crate::curricula::{
    AccelConfig, AccelGenerator, AccelTrainer, CurriculumKind, DesignerConfig, DrTrainer,
    EditCriterion, IterationRecord, MinimaxTrainer, PairedConfig, PairedTrainer, PlrConfig,
    PlrTrainer, Student,
};
use crate::env::analysis::solvable_within;
use crate::env::{
    multi_room_maze, sample_dr_level, DomainConfig, EnvConfig, EnvKind, Level,
};
use crate::metrics::{
    evaluate, maze_eval_suite, AggregateReport, EvalSuite, LevelReport, SuiteLevel,
};
use crate::policy::{Arch, PolicyError, PolicyParams};
use crate::ppo::PpoConfig;
use crate::rollout::input_dim;
use crate::samplr::{Grounding, SamplrConfig, SamplrTrainer};
use crate::scoring::{ScoreConfig, ScoreKind};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Json { path: PathBuf, reason: String },
    #[error("training failed at iteration {iteration}: {source}")]
    Train {
        iteration: u64,
        #[source]
        source: PolicyError,
    },
    #[error("evaluation failed: {0}")]
    Eval(#[from] crate::metrics::MetricsError),
}

fn invalid(field: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::ConfigInvalid { field: field.to_string(), reason: reason.into() }
}

fn io_at(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), source }
}

/// Which curriculum to run, with its algorithm-specific knobs. The shared
/// machinery (replay buffer, PPO, scoring) lives on [`ExperimentConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum CurriculumSpec {
    Dr,
    Plr,
    RobustPlr,
    Minimax {
        #[serde(default)]
        designer: DesignerConfig,
    },
    Paired {
        #[serde(default)]
        designer: DesignerConfig,
    },
    Repaired {
        #[serde(default)]
        designer: DesignerConfig,
    },
    Accel {
        #[serde(default = "default_accel_generator")]
        generator: AccelGenerator,
        #[serde(default = "default_accel_edits")]
        edits: usize,
        #[serde(default = "default_accel_criterion")]
        criterion: EditCriterion,
        #[serde(default = "default_accel_rho_fill")]
        rho_fill: f64,
        #[serde(default = "default_accel_replay_batch")]
        replay_batch: usize,
    },
    Samplr {
        #[serde(default = "default_grounding")]
        grounding: Grounding,
    },
}

fn default_accel_generator() -> AccelGenerator {
    AccelGenerator::EmptyRoom
}
fn default_accel_edits() -> usize {
    2
}
fn default_accel_criterion() -> EditCriterion {
    EditCriterion::Hard
}
fn default_accel_rho_fill() -> f64 {
    0.5
}
fn default_accel_replay_batch() -> usize {
    4
}
fn default_grounding() -> Grounding {
    Grounding::ActOnFictitious
}

impl CurriculumSpec {
    pub fn kind(&self) -> CurriculumKind {
        match self {
            CurriculumSpec::Dr => CurriculumKind::Dr,
            CurriculumSpec::Plr => CurriculumKind::Plr,
            CurriculumSpec::RobustPlr => CurriculumKind::RobustPlr,
            CurriculumSpec::Minimax { .. } => CurriculumKind::Minimax,
            CurriculumSpec::Paired { .. } => CurriculumKind::Paired,
            CurriculumSpec::Repaired { .. } => CurriculumKind::Repaired,
            CurriculumSpec::Accel { .. } => CurriculumKind::Accel,
            CurriculumSpec::Samplr { .. } => CurriculumKind::Samplr,
        }
    }
}

/// Optional finite training set, sampled once up front from its own seed
/// stream. `rooms` restricts maze sampling to multi-room layouts with a
/// room count drawn uniformly from the inclusive range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSetSpec {
    pub size: usize,
    #[serde(default)]
    pub rooms: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub curriculum: CurriculumSpec,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub replay: ReplayConfig,
    #[serde(default = "default_score_kind")]
    pub score_kind: ScoreKind,
    pub total_student_updates: u64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: u64,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// `None` = the domain's standard episode settings.
    #[serde(default)]
    pub env: Option<EnvConfig>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_stack_depth")]
    pub stack_depth: usize,
    #[serde(default = "default_rollout_length")]
    pub rollout_length: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub train_set: Option<TrainSetSpec>,
}

fn default_score_kind() -> ScoreKind {
    ScoreKind::Pvl
}
fn default_eval_interval() -> u64 {
    100
}
fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn default_stack_depth() -> usize {
    2
}
fn default_rollout_length() -> usize {
    64
}
fn default_eval_episodes() -> usize {
    5
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Json { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn env_cfg(&self) -> EnvConfig {
        self.env.unwrap_or_else(|| EnvConfig::default_for(self.domain.kind()))
    }

    /// Full validation; every failure names the offending field.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.domain.validate().map_err(|e| invalid("domain", e.to_string()))?;
        let kind = self.curriculum.kind();
        let grid_only = matches!(
            kind,
            CurriculumKind::Minimax | CurriculumKind::Paired | CurriculumKind::Repaired
        );
        if grid_only && self.domain.kind() == EnvKind::FruitChoice {
            return Err(invalid(
                "curriculum",
                format!("{} needs a grid domain; the designer cannot emit fruit levels", kind.name()),
            ));
        }
        if uses_buffer(kind) {
            self.replay.validate().map_err(|e| invalid("replay", e))?;
            let robust = matches!(
                kind,
                CurriculumKind::RobustPlr | CurriculumKind::Repaired | CurriculumKind::Samplr
            );
            if robust
                && self.total_student_updates > 0
                && self.replay.replay_rate == crate::buffer::ReplayRate::Fixed(0.0)
            {
                return Err(invalid(
                    "replay.replay_rate",
                    "robust curricula only train on replayed levels; a zero replay rate never trains",
                ));
            }
        }
        if let CurriculumSpec::Accel { edits, rho_fill, replay_batch, .. } = &self.curriculum {
            if *edits == 0 {
                return Err(invalid("curriculum.edits", "needs at least one edit per child"));
            }
            if !(0.0..=1.0).contains(rho_fill) {
                return Err(invalid("curriculum.rho_fill", "must lie in [0, 1]"));
            }
            if *replay_batch == 0 {
                return Err(invalid("curriculum.replay_batch", "needs at least one level"));
            }
        }
        if self.ppo.epochs == 0 {
            return Err(invalid("ppo.epochs", "needs at least one epoch"));
        }
        if self.ppo.minibatches == 0 {
            return Err(invalid("ppo.minibatches", "needs at least one minibatch"));
        }
        if !(self.ppo.lr > 0.0 && self.ppo.lr.is_finite()) {
            return Err(invalid("ppo.lr", "must be positive and finite"));
        }
        if !(self.ppo.gamma > 0.0 && self.ppo.gamma <= 1.0) {
            return Err(invalid("ppo.gamma", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.ppo.gae_lambda) {
            return Err(invalid("ppo.gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.ppo.clip_eps > 0.0) {
            return Err(invalid("ppo.clip_eps", "must be positive"));
        }
        if self.eval_interval == 0 {
            return Err(invalid("eval_interval", "must be at least 1"));
        }
        if self.stack_depth == 0 {
            return Err(invalid("stack_depth", "must be at least 1"));
        }
        if self.rollout_length == 0 {
            return Err(invalid("rollout_length", "must be at least 1"));
        }
        if self.eval_episodes == 0 {
            return Err(invalid("eval_episodes", "must be at least 1"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("hidden", "layer widths must be positive"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        if let Some(ts) = &self.train_set {
            if ts.size == 0 {
                return Err(invalid("train_set.size", "must be at least 1"));
            }
            if !matches!(kind, CurriculumKind::Dr | CurriculumKind::Plr | CurriculumKind::RobustPlr)
            {
                return Err(invalid(
                    "train_set",
                    format!("{} samples its own levels; finite sets only apply to dr/plr", kind.name()),
                ));
            }
            if let Some((lo, hi)) = ts.rooms {
                if self.domain.kind() != EnvKind::Maze {
                    return Err(invalid("train_set.rooms", "room layouts only exist for mazes"));
                }
                if lo == 0 || lo > hi {
                    return Err(invalid("train_set.rooms", "need 1 <= min <= max"));
                }
            }
        }
        Ok(())
    }
}

fn uses_buffer(kind: CurriculumKind) -> bool {
    !matches!(kind, CurriculumKind::Dr | CurriculumKind::Minimax)
}

/// Per-component random streams: one master seed, one ChaCha stream per
/// fixed label, so adding draws to one component never shifts another.
pub fn seed_stream(master_seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(fnv1a(label));
    rng
}

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The live trainer, tagged by algorithm. Checkpoints serialize this whole
/// enum, so resume needs no reconstruction logic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum TrainerState {
    Dr(DrTrainer),
    Plr(PlrTrainer),
    Minimax(MinimaxTrainer),
    Paired(PairedTrainer),
    Accel(AccelTrainer),
    Samplr(SamplrTrainer),
}

impl TrainerState {
    pub fn run_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        match self {
            TrainerState::Dr(t) => t.run_iteration(rng),
            TrainerState::Plr(t) => t.run_iteration(rng),
            TrainerState::Minimax(t) => t.run_iteration(rng),
            TrainerState::Paired(t) => t.run_iteration(rng),
            TrainerState::Accel(t) => t.run_iteration(rng),
            TrainerState::Samplr(t) => t.run_iteration(rng),
        }
    }

    /// The evaluated learner (PAIRED evaluates its protagonist).
    pub fn student(&self) -> &Student {
        match self {
            TrainerState::Dr(t) => &t.student,
            TrainerState::Plr(t) => &t.student,
            TrainerState::Minimax(t) => &t.student,
            TrainerState::Paired(t) => &t.protagonist,
            TrainerState::Accel(t) => &t.student,
            TrainerState::Samplr(t) => &t.student,
        }
    }

    pub fn kind(&self) -> CurriculumKind {
        match self {
            TrainerState::Dr(_) => CurriculumKind::Dr,
            TrainerState::Plr(t) => {
                if t.robust() {
                    CurriculumKind::RobustPlr
                } else {
                    CurriculumKind::Plr
                }
            }
            TrainerState::Minimax(_) => CurriculumKind::Minimax,
            TrainerState::Paired(t) => {
                if t.replay_enabled() {
                    CurriculumKind::Repaired
                } else {
                    CurriculumKind::Paired
                }
            }
            TrainerState::Accel(_) => CurriculumKind::Accel,
            TrainerState::Samplr(_) => CurriculumKind::Samplr,
        }
    }

    pub fn env_cfg(&self) -> EnvConfig {
        match self {
            TrainerState::Dr(t) => t.env_cfg,
            TrainerState::Plr(t) => t.env_cfg,
            TrainerState::Minimax(t) => t.env_cfg,
            TrainerState::Paired(t) => t.env_cfg,
            TrainerState::Accel(t) => t.env_cfg,
            TrainerState::Samplr(t) => t.env_cfg,
        }
    }

    pub fn stack_depth(&self) -> usize {
        match self {
            TrainerState::Dr(t) => t.stack_depth,
            TrainerState::Plr(t) => t.stack_depth(),
            TrainerState::Minimax(t) => t.stack_depth,
            TrainerState::Paired(t) => t.stack_depth(),
            TrainerState::Accel(t) => t.stack_depth(),
            TrainerState::Samplr(t) => t.stack_depth(),
        }
    }

    pub fn domain(&self) -> &DomainConfig {
        match self {
            TrainerState::Dr(t) => &t.domain,
            TrainerState::Plr(t) => &t.domain,
            TrainerState::Minimax(t) => &t.domain,
            TrainerState::Paired(t) => &t.domain,
            TrainerState::Accel(t) => &t.domain,
            TrainerState::Samplr(t) => &t.domain,
        }
    }

    /// Replay buffers, labeled; curricula without buffers return none.
    pub fn buffers(&self) -> Vec<(&'static str, &LevelBuffer)> {
        match self {
            TrainerState::Dr(_) | TrainerState::Minimax(_) => Vec::new(),
            TrainerState::Plr(t) => vec![("buffer", &t.buffer)],
            TrainerState::Paired(t) => vec![
                ("protagonist", &t.protagonist_buffer),
                ("antagonist", &t.antagonist_buffer),
            ],
            TrainerState::Accel(t) => vec![("buffer", &t.buffer)],
            TrainerState::Samplr(t) => vec![("buffer", &t.buffer)],
        }
    }

    /// The staleness clock for replay-distribution reporting.
    pub fn episode_counter(&self) -> u64 {
        match self {
            TrainerState::Dr(_) | TrainerState::Minimax(_) => 0,
            TrainerState::Plr(t) => t.episode_counter(),
            TrainerState::Paired(t) => t.episode_counter(),
            TrainerState::Accel(t) => t.episode_counter(),
            TrainerState::Samplr(t) => t.episode_counter(),
        }
    }
}

fn build_train_set(
    config: &ExperimentConfig,
    spec: &TrainSetSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Level>, HarnessError> {
    use rand::Rng;
    let mut out = Vec::with_capacity(spec.size);
    for _ in 0..spec.size {
        let level = match spec.rooms {
            Some((lo, hi)) => {
                let (w, h) = match &config.domain {
                    DomainConfig::Maze(m) => (m.width, m.height),
                    _ => unreachable!("validated: rooms imply a maze domain"),
                };
                let rooms = rng.gen_range(lo..=hi);
                multi_room_maze(w, h, rooms, rng)
                    .map_err(|e| invalid("train_set.rooms", e.to_string()))?
            }
            None => sample_dr_level(&config.domain, rng)
                .map_err(|e| invalid("domain", e.to_string()))?,
        };
        out.push(level);
    }
    Ok(out)
}

/// Construct the configured trainer. `policy_rng` seeds network parameters
/// (students first, then any designer); `trainer_rng` covers everything the
/// training loop itself draws, including ACCEL's buffer prefill.
pub fn build_trainer(
    config: &ExperimentConfig,
    policy_rng: &mut ChaCha8Rng,
    trainer_rng: &mut ChaCha8Rng,
) -> Result<TrainerState, HarnessError> {
    let env_cfg = config.env_cfg();
    let mut probe_rng = seed_stream(config.master_seed, "probe");
    let probe = sample_dr_level(&config.domain, &mut probe_rng)
        .map_err(|e| invalid("domain", e.to_string()))?;
    let arch = Arch::new(
        input_dim(&probe, env_cfg, config.stack_depth),
        config.hidden.clone(),
        config.domain.kind().action_count(),
    );
    let student = Student::new(PolicyParams::init(arch.clone(), policy_rng), &config.ppo);
    let score_cfg = ScoreConfig::new(config.score_kind, config.ppo.gamma, config.ppo.gae_lambda);
    // Buffers score with the same estimator the config names.
    let replay = ReplayConfig { score_kind: config.score_kind, ..config.replay.clone() };

    let train_set = match &config.train_set {
        Some(spec) => {
            let mut rng = seed_stream(config.master_seed, "train-set");
            Some(build_train_set(config, spec, &mut rng)?)
        }
        None => None,
    };

    let domain = config.domain.clone();
    let ppo = config.ppo.clone();
    Ok(match &config.curriculum {
        CurriculumSpec::Dr => TrainerState::Dr(DrTrainer::new(
            student,
            domain,
            env_cfg,
            ppo,
            score_cfg,
            config.stack_depth,
            config.rollout_length,
            train_set,
        )),
        CurriculumSpec::Plr | CurriculumSpec::RobustPlr => {
            let robust = matches!(config.curriculum, CurriculumSpec::RobustPlr);
            TrainerState::Plr(PlrTrainer::new(
                student,
                domain,
                env_cfg,
                ppo,
                score_cfg,
                PlrConfig {
                    replay,
                    robust,
                    stack_depth: config.stack_depth,
                    rollout_length: config.rollout_length,
                    train_set,
                },
            ))
        }
        CurriculumSpec::Minimax { designer } => TrainerState::Minimax(MinimaxTrainer::new(
            student,
            domain,
            env_cfg,
            ppo,
            score_cfg,
            designer.clone(),
            config.stack_depth,
            config.rollout_length,
            policy_rng,
        )),
        CurriculumSpec::Paired { designer } | CurriculumSpec::Repaired { designer } => {
            let antagonist =
                Student::new(PolicyParams::init(arch, policy_rng), &config.ppo);
            TrainerState::Paired(PairedTrainer::new(
                student,
                antagonist,
                domain,
                env_cfg,
                ppo,
                score_cfg,
                PairedConfig {
                    replay,
                    replay_enabled: matches!(config.curriculum, CurriculumSpec::Repaired { .. }),
                    designer: designer.clone(),
                    stack_depth: config.stack_depth,
                    rollout_length: config.rollout_length,
                },
                policy_rng,
            ))
        }
        CurriculumSpec::Accel { generator, edits, criterion, rho_fill, replay_batch } => {
            let trainer = AccelTrainer::new(
                student,
                domain,
                env_cfg,
                ppo,
                score_cfg,
                AccelConfig {
                    replay,
                    generator: *generator,
                    edits: *edits,
                    criterion: *criterion,
                    rho_fill: *rho_fill,
                    replay_batch: *replay_batch,
                    stack_depth: config.stack_depth,
                    rollout_length: config.rollout_length,
                },
                trainer_rng,
            )
            .map_err(|e| HarnessError::Train { iteration: 0, source: e })?;
            TrainerState::Accel(trainer)
        }
        CurriculumSpec::Samplr { grounding } => TrainerState::Samplr(SamplrTrainer::new(
            student,
            domain,
            env_cfg,
            ppo,
            score_cfg,
            SamplrConfig {
                replay,
                grounding: *grounding,
                stack_depth: config.stack_depth,
                rollout_length: config.rollout_length,
            },
        )),
    })
}

// ---------------------------------------------------------------------------
// Metrics files

/// Fixed column set for a curriculum's `metrics.csv`.
pub fn metrics_columns(kind: CurriculumKind) -> Vec<&'static str> {
    let mut cols = vec![
        "iteration",
        "d",
        "level_id",
        "score",
        "student_return",
        "solved_fraction",
        "episodes",
        "transitions",
        "student_updates",
        "trained",
        "buffer_size",
        "buffer_mean_score",
        "mean_shortest_path",
        "mean_block_count",
        "lzw_action_complexity",
    ];
    if matches!(kind, CurriculumKind::Minimax | CurriculumKind::Paired | CurriculumKind::Repaired)
    {
        cols.push("generator_reward");
    }
    if kind == CurriculumKind::Samplr {
        cols.extend(["posterior_alpha", "posterior_beta", "fictitious_rate", "real_rate"]);
    }
    cols
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn metrics_header(kind: CurriculumKind) -> String {
    format!(
        "# ued-metrics schema={} algorithm={}\n{}\n",
        METRICS_SCHEMA_VERSION,
        kind.name(),
        metrics_columns(kind).join(",")
    )
}

fn metrics_row(kind: CurriculumKind, rec: &IterationRecord) -> String {
    let mut fields = vec![
        rec.iteration.to_string(),
        (rec.replay as u8).to_string(),
        rec.level_id.clone(),
        fmt_f(rec.score),
        fmt_f(rec.mean_return),
        fmt_f(rec.solved_fraction),
        rec.episodes.to_string(),
        rec.transitions.to_string(),
        rec.student_updates.to_string(),
        (rec.trained as u8).to_string(),
        rec.buffer_size.to_string(),
        fmt_f(rec.buffer_mean_score),
        fmt_f(rec.buffer_mean_path_length),
        fmt_f(rec.buffer_mean_wall_count),
        fmt_f(rec.mean_lzw_complexity),
    ];
    if matches!(kind, CurriculumKind::Minimax | CurriculumKind::Paired | CurriculumKind::Repaired)
    {
        fields.push(fmt_opt(rec.generator_reward));
    }
    if kind == CurriculumKind::Samplr {
        fields.push(fmt_opt(rec.posterior_alpha));
        fields.push(fmt_opt(rec.posterior_beta));
        fields.push(fmt_opt(rec.fictitious_rate));
        fields.push(fmt_opt(rec.real_rate));
    }
    let mut row = fields.join(",");
    row.push('\n');
    row
}

// ---------------------------------------------------------------------------
// Checkpoints

/// A complete snapshot of a run in flight: the trainer (networks,
/// optimisers, buffers, counters), the loop RNG, and how many lines each
/// output file held at save time — resume truncates to these counts so an
/// interrupted run never leaves duplicate rows behind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub iterations_done: u64,
    pub trainer: TrainerState,
    pub rng: ChaCha8Rng,
    pub metrics_lines: u64,
    pub timings_lines: u64,
    pub levels_lines: u64,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Checkpoint, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Json { path: path.to_path_buf(), reason: e.to_string() })?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(HarnessError::Json {
                path: path.to_path_buf(),
                reason: format!(
                    "checkpoint version {} unsupported (expected {})",
                    ck.version, CHECKPOINT_VERSION
                ),
            });
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string(self).expect("checkpoint serialization is infallible");
        fs::write(path, text).map_err(|e| io_at(path, e))
    }
}

fn checkpoint_path(dir: &Path, iterations_done: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("ckpt_{iterations_done:08}.json"))
}

/// The highest-numbered checkpoint in `dir/checkpoints`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>, HarnessError> {
    let ckdir = dir.join("checkpoints");
    if !ckdir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(&ckdir).map_err(|e| io_at(&ckdir, e))? {
        let entry = entry.map_err(|e| io_at(&ckdir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(num) = name.strip_prefix("ckpt_").and_then(|s| s.strip_suffix(".json")) {
            if let Ok(n) = num.parse::<u64>() {
                if best.as_ref().map_or(true, |(b, _)| n > *b) {
                    best = Some((n, entry.path()));
                }
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

fn count_lines(path: &Path) -> Result<u64, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    Ok(text.lines().count() as u64)
}

fn truncate_lines(path: &Path, keep: u64) -> Result<(), HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    let kept: String = text.lines().take(keep as usize).map(|l| format!("{l}\n")).collect();
    fs::write(path, kept).map_err(|e| io_at(path, e))
}

fn append(path: &Path, content: &str) -> Result<(), HarnessError> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_at(path, e))?;
    f.write_all(content.as_bytes()).map_err(|e| io_at(path, e))
}

// ---------------------------------------------------------------------------
// Evaluation suite selection

/// The held-out suite for a domain: the authored maze set for maze runs,
/// fresh solvable draws from a dedicated seed stream otherwise.
pub fn default_suite(
    domain: &DomainConfig,
    env_cfg: EnvConfig,
    master_seed: u64,
) -> Result<EvalSuite, HarnessError> {
    if domain.kind() == EnvKind::Maze {
        return Ok(maze_eval_suite(master_seed));
    }
    let tag = match domain.kind() {
        EnvKind::IcyMaze => "icy",
        EnvKind::FruitChoice => "fruit",
        EnvKind::Maze => unreachable!(),
    };
    let mut rng = seed_stream(master_seed, "suite");
    let mut levels = Vec::new();
    for _ in 0..400 {
        if levels.len() == 8 {
            break;
        }
        let level =
            sample_dr_level(domain, &mut rng).map_err(|e| invalid("domain", e.to_string()))?;
        if solvable_within(&level, env_cfg) {
            levels.push(SuiteLevel {
                name: format!("{tag}-heldout-{}", levels.len()),
                level,
            });
        }
    }
    if levels.is_empty() {
        return Err(invalid("domain", "no solvable held-out levels found in 400 draws"));
    }
    Ok(EvalSuite { name: format!("{tag}-heldout"), levels })
}

/// `final_eval.json`: the report plus a disjointness audit against the
/// replay buffers (names listed here shared a level id with training).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalEval {
    pub suite: String,
    pub levels: Vec<LevelReport>,
    pub aggregate: AggregateReport,
    pub buffer_overlap: Vec<String>,
}

// ---------------------------------------------------------------------------
// The run loop

#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub iterations: u64,
    pub student_updates: u64,
    pub final_eval: FinalEval,
}

/// Execute (or resume) the configured experiment. See the module docs for
/// the run-directory layout.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let dir = config.output_dir.clone();
    let ckdir = dir.join("checkpoints");
    fs::create_dir_all(&ckdir).map_err(|e| io_at(&ckdir, e))?;

    let config_path = dir.join("config.json");
    let current = serde_json::to_value(config).expect("config serialization is infallible");
    if config_path.exists() {
        let stored = fs::read_to_string(&config_path).map_err(|e| io_at(&config_path, e))?;
        let stored: serde_json::Value = serde_json::from_str(&stored).map_err(|e| {
            HarnessError::Json { path: config_path.clone(), reason: e.to_string() }
        })?;
        if stored != current {
            return Err(invalid(
                "output_dir",
                "directory already holds a run with a different config; pick a fresh directory",
            ));
        }
    }

    let metrics_path = dir.join("metrics.csv");
    let timings_path = dir.join("timings.csv");
    let levels_path = dir.join("levels.jsonl");
    let kind = config.curriculum.kind();

    let resume_from = latest_checkpoint(&dir)?;
    let (mut trainer, mut rng, mut done, mut lines) = match resume_from {
        Some(path) => {
            let ck = Checkpoint::load(&path)?;
            // Drop anything written after this snapshot (a crashed run's
            // tail); the loop below regenerates it from the saved RNG.
            truncate_lines(&metrics_path, ck.metrics_lines)?;
            truncate_lines(&timings_path, ck.timings_lines)?;
            truncate_lines(&levels_path, ck.levels_lines)?;
            let counts = (ck.metrics_lines, ck.timings_lines, ck.levels_lines);
            (ck.trainer, ck.rng, ck.iterations_done, counts)
        }
        None => {
            let pretty = serde_json::to_string_pretty(&current)
                .expect("config serialization is infallible");
            fs::write(&config_path, pretty).map_err(|e| io_at(&config_path, e))?;
            fs::write(&metrics_path, metrics_header(kind)).map_err(|e| io_at(&metrics_path, e))?;
            fs::write(&timings_path, "iteration,wallclock_ms\n")
                .map_err(|e| io_at(&timings_path, e))?;
            fs::write(&levels_path, "").map_err(|e| io_at(&levels_path, e))?;

            let mut policy_rng = seed_stream(config.master_seed, "policy-init");
            let mut trainer_rng = seed_stream(config.master_seed, "trainer");
            let trainer = build_trainer(config, &mut policy_rng, &mut trainer_rng)?;
            let mut levels_lines = 0u64;
            if let TrainerState::Accel(t) = &trainer {
                let mut block = String::new();
                for entry in &t.prefill_log {
                    block.push_str(
                        &serde_json::to_string(entry).expect("level log serialization"),
                    );
                    block.push('\n');
                    levels_lines += 1;
                }
                append(&levels_path, &block)?;
            }
            let counts = (count_lines(&metrics_path)?, 1, levels_lines);
            let ck = Checkpoint {
                version: CHECKPOINT_VERSION,
                iterations_done: 0,
                trainer,
                rng: trainer_rng,
                metrics_lines: counts.0,
                timings_lines: counts.1,
                levels_lines: counts.2,
            };
            ck.save(&checkpoint_path(&dir, 0))?;
            (ck.trainer, ck.rng, 0, counts)
        }
    };

    let mut last_saved = done;
    while trainer.student().updates < config.total_student_updates {
        let t0 = Instant::now();
        let rec = trainer
            .run_iteration(&mut rng)
            .map_err(|e| HarnessError::Train { iteration: done, source: e })?;
        let wallclock_ms = t0.elapsed().as_millis();

        append(&metrics_path, &metrics_row(kind, &rec))?;
        lines.0 += 1;
        append(&timings_path, &format!("{},{}\n", rec.iteration, wallclock_ms))?;
        lines.1 += 1;
        if !rec.new_levels.is_empty() {
            let mut block = String::new();
            for entry in &rec.new_levels {
                block.push_str(&serde_json::to_string(entry).expect("level log serialization"));
                block.push('\n');
                lines.2 += 1;
            }
            append(&levels_path, &block)?;
        }
        done += 1;

        if done % config.eval_interval == 0 {
            let ck = Checkpoint {
                version: CHECKPOINT_VERSION,
                iterations_done: done,
                trainer: trainer.clone(),
                rng: rng.clone(),
                metrics_lines: lines.0,
                timings_lines: lines.1,
                levels_lines: lines.2,
            };
            ck.save(&checkpoint_path(&dir, done))?;
            last_saved = done;
        }
    }

    if last_saved != done {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            iterations_done: done,
            trainer: trainer.clone(),
            rng: rng.clone(),
            metrics_lines: lines.0,
            timings_lines: lines.1,
            levels_lines: lines.2,
        };
        ck.save(&checkpoint_path(&dir, done))?;
    }

    let final_eval = run_final_eval(config, &trainer)?;
    let eval_path = dir.join("final_eval.json");
    let text =
        serde_json::to_string_pretty(&final_eval).expect("report serialization is infallible");
    fs::write(&eval_path, text).map_err(|e| io_at(&eval_path, e))?;

    Ok(RunOutput {
        dir,
        iterations: done,
        student_updates: trainer.student().updates,
        final_eval,
    })
}

fn run_final_eval(
    config: &ExperimentConfig,
    trainer: &TrainerState,
) -> Result<FinalEval, HarnessError> {
    let env_cfg = trainer.env_cfg();
    let suite = default_suite(trainer.domain(), env_cfg, config.master_seed)?;
    let report = evaluate(
        &trainer.student().params,
        &suite,
        env_cfg,
        trainer.stack_depth(),
        config.eval_episodes,
        config.master_seed ^ fnv1a("eval"),
    )?;
    let mut train_ids: HashSet<crate::env::LevelKey> = HashSet::new();
    for (_, buf) in trainer.buffers() {
        train_ids.extend(buf.entries().iter().map(|e| e.key));
    }
    let buffer_overlap =
        suite.training_overlap(&train_ids).into_iter().map(str::to_string).collect();
    Ok(FinalEval {
        suite: report.suite,
        levels: report.levels,
        aggregate: report.aggregate,
        buffer_overlap,
    })
}

// ---------------------------------------------------------------------------
// Buffer inspection (the `dump-buffer` subcommand's data layer)

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BufferDumpRow {
    pub level_id: String,
    pub score: f64,
    pub timestamp: u64,
    pub visit_count: u64,
    pub max_return: f64,
    pub shortest_path: usize,
    pub wall_count: usize,
    /// Current replay probability under the score/staleness mixture.
    pub replay_prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BufferDump {
    pub name: String,
    pub capacity: usize,
    pub len: usize,
    pub rows: Vec<BufferDumpRow>,
}

/// Tabulate every buffer in a checkpointed trainer.
pub fn dump_buffers(trainer: &TrainerState) -> Vec<BufferDump> {
    use crate::env::analysis::{block_count, shortest_path_length};
    let c = trainer.episode_counter();
    trainer
        .buffers()
        .into_iter()
        .map(|(name, buf)| {
            let probs = buf.replay_distribution(c).unwrap_or_default();
            let rows = buf
                .entries()
                .iter()
                .zip(probs.iter().chain(std::iter::repeat(&0.0)))
                .map(|(e, &p)| BufferDumpRow {
                    level_id: e.level.id_hex(),
                    score: e.score,
                    timestamp: e.timestamp,
                    visit_count: e.visit_count,
                    max_return: e.max_return,
                    shortest_path: shortest_path_length(&e.level),
                    wall_count: block_count(&e.level),
                    replay_prob: p,
                })
                .collect();
            BufferDump { name: name.to_string(), capacity: buf.config().capacity, len: buf.len(), rows }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MazeDomain;

    fn tiny_config(dir: &Path, curriculum: CurriculumSpec) -> ExperimentConfig {
        ExperimentConfig {
            domain: DomainConfig::Maze(MazeDomain { width: 7, height: 7, wall_budget: 6 }),
            curriculum,
            ppo: PpoConfig { epochs: 2, minibatches: 1, ..PpoConfig::default() },
            replay: ReplayConfig { capacity: 8, ..ReplayConfig::default() },
            score_kind: ScoreKind::L1ValueLoss,
            total_student_updates: 3,
            eval_interval: 2,
            master_seed: 11,
            output_dir: dir.to_path_buf(),
            env: Some(EnvConfig {
                t_max: 40,
                ..EnvConfig::default_for(EnvKind::Maze)
            }),
            hidden: vec![8],
            stack_depth: 1,
            rollout_length: 12,
            eval_episodes: 1,
            train_set: None,
        }
    }

    #[test]
    fn config_json_round_trips_with_defaults() {
        let json = r#"{
            "domain": { "Maze": { "width": 9, "height": 9, "wall_budget": 12 } },
            "curriculum": { "algorithm": "robust_plr" },
            "total_student_updates": 100,
            "output_dir": "/tmp/run"
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.curriculum.kind(), CurriculumKind::RobustPlr);
        assert_eq!(cfg.eval_interval, 100);
        assert_eq!(cfg.stack_depth, 2);
        assert!(cfg.env.is_none());
        cfg.validate().unwrap();
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back.master_seed, cfg.master_seed);
    }

    #[test]
    fn validation_names_the_failing_field() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path(), CurriculumSpec::Dr);
        cfg.ppo.epochs = 0;
        match cfg.validate() {
            Err(HarnessError::ConfigInvalid { field, .. }) => assert_eq!(field, "ppo.epochs"),
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }

        let mut cfg = tiny_config(dir.path(), CurriculumSpec::RobustPlr);
        cfg.replay.replay_rate = crate::buffer::ReplayRate::Fixed(0.0);
        match cfg.validate() {
            Err(HarnessError::ConfigInvalid { field, .. }) => {
                assert_eq!(field, "replay.replay_rate")
            }
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }

        let mut cfg = tiny_config(
            dir.path(),
            CurriculumSpec::Paired { designer: DesignerConfig::default() },
        );
        cfg.domain = DomainConfig::FruitChoice(Default::default());
        match cfg.validate() {
            Err(HarnessError::ConfigInvalid { field, .. }) => assert_eq!(field, "curriculum"),
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn seed_streams_are_label_independent() {
        use rand::RngCore;
        let mut a = seed_stream(5, "trainer");
        let mut b = seed_stream(5, "policy-init");
        let mut a2 = seed_stream(5, "trainer");
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xs2: Vec<u64> = (0..8).map(|_| a2.next_u64()).collect();
        assert_eq!(xs, xs2);
        assert_ne!(xs, ys);
    }

    #[test]
    fn zero_update_run_leaves_checkpoint_and_eval_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path(), CurriculumSpec::Dr);
        cfg.total_student_updates = 0;
        let out = run(&cfg).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.student_updates, 0);
        assert!(dir.path().join("config.json").exists());
        assert!(dir.path().join("final_eval.json").exists());
        assert!(checkpoint_path(dir.path(), 0).exists());
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 2, "header lines only");
    }

    #[test]
    fn run_directory_contains_the_contractual_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), CurriculumSpec::Dr);
        let out = run(&cfg).unwrap();
        assert!(out.student_updates >= 3);
        for name in ["config.json", "metrics.csv", "checkpoints", "final_eval.json"] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let mut lines = metrics.lines();
        assert!(lines.next().unwrap().starts_with("# ued-metrics schema=1 algorithm=dr"));
        assert!(lines.next().unwrap().starts_with("iteration,d,level_id"));
        assert_eq!(metrics.lines().count() as u64, 2 + out.iterations);
        // One lineage line per fresh DR level.
        let levels = fs::read_to_string(dir.path().join("levels.jsonl")).unwrap();
        assert_eq!(levels.lines().count() as u64, out.iterations);
    }

    #[test]
    fn identical_configs_reproduce_metrics_byte_for_byte() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let mut c1 = tiny_config(d1.path(), CurriculumSpec::RobustPlr);
        let mut c2 = tiny_config(d2.path(), CurriculumSpec::RobustPlr);
        c1.total_student_updates = 2;
        c2.total_student_updates = 2;
        run(&c1).unwrap();
        run(&c2).unwrap();
        let m1 = fs::read(d1.path().join("metrics.csv")).unwrap();
        let m2 = fs::read(d2.path().join("metrics.csv")).unwrap();
        assert_eq!(m1, m2);
        let l1 = fs::read(d1.path().join("levels.jsonl")).unwrap();
        let l2 = fs::read(d2.path().join("levels.jsonl")).unwrap();
        assert_eq!(l1, l2);
        let e1 = fs::read(d1.path().join("final_eval.json")).unwrap();
        let e2 = fs::read(d2.path().join("final_eval.json")).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn resume_after_a_simulated_crash_matches_the_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), CurriculumSpec::Dr);
        let out = run(&cfg).unwrap();
        let reference = fs::read(dir.path().join("metrics.csv")).unwrap();
        assert!(out.iterations >= 3);

        // Keep only the iteration-2 checkpoint; metrics.csv still holds the
        // full run, exactly what a crash after late rows would leave behind.
        for entry in fs::read_dir(dir.path().join("checkpoints")).unwrap() {
            let p = entry.unwrap().path();
            if p != checkpoint_path(dir.path(), 2) {
                fs::remove_file(p).unwrap();
            }
        }
        let resumed = run(&cfg).unwrap();
        assert_eq!(resumed.iterations, out.iterations);
        let replayed = fs::read(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(reference, replayed);
    }

    #[test]
    fn completed_run_resumes_as_a_no_op() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), CurriculumSpec::Dr);
        run(&cfg).unwrap();
        let before = fs::read(dir.path().join("metrics.csv")).unwrap();
        run(&cfg).unwrap();
        let after = fs::read(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn differing_config_in_the_same_directory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), CurriculumSpec::Dr);
        run(&cfg).unwrap();
        let mut other = cfg;
        other.master_seed += 1;
        match run(&other) {
            Err(HarnessError::ConfigInvalid { field, .. }) => assert_eq!(field, "output_dir"),
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn accel_checkpoints_round_trip_and_dump() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(
            dir.path(),
            CurriculumSpec::Accel {
                generator: AccelGenerator::EmptyRoom,
                edits: 1,
                criterion: EditCriterion::Hard,
                rho_fill: 0.5,
                replay_batch: 2,
            },
        );
        cfg.total_student_updates = 2;
        let out = run(&cfg).unwrap();
        let ck = Checkpoint::load(&latest_checkpoint(dir.path()).unwrap().unwrap()).unwrap();
        assert_eq!(ck.iterations_done, out.iterations);
        let dumps = dump_buffers(&ck.trainer);
        assert_eq!(dumps.len(), 1);
        assert!(dumps[0].len >= 1);
        let p_sum: f64 = dumps[0].rows.iter().map(|r| r.replay_prob).sum();
        assert!((p_sum - 1.0).abs() < 1e-9);
        // Prefill lineage precedes everything else in the level log.
        let levels = fs::read_to_string(dir.path().join("levels.jsonl")).unwrap();
        let first: crate::curricula::LevelLogEntry =
            serde_json::from_str(levels.lines().next().unwrap()).unwrap();
        assert_eq!(first.origin, "prefill");
    }

    #[test]
    fn samplr_metrics_carry_the_posterior_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(
            dir.path(),
            CurriculumSpec::Samplr { grounding: Grounding::ActOnFictitious },
        );
        cfg.domain = DomainConfig::IcyMaze(crate::env::IcyDomain {
            maze: MazeDomain { width: 7, height: 7, wall_budget: 4 },
            ice_alpha: 1.0,
            ice_beta: 9.0,
        });
        cfg.total_student_updates = 1;
        run(&cfg).unwrap();
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let header = metrics.lines().nth(1).unwrap();
        assert!(header.ends_with("posterior_alpha,posterior_beta,fictitious_rate,real_rate"));
    }
}
