//! Grounded curricula: SAMPLR and the naive-grounding baseline.
//!
//! Regret-driven teachers bias which levels the student sees, and for level
//! families with chance inside them (icy floors, which fruit pays) that
//! bias leaks into the student's experience of the chance itself: if ice
//! makes mazes hard, a replay buffer full of hard mazes teaches the student
//! that the world is far icier than it really is. SAMPLR keeps the useful
//! bias over *layout* but repairs the bias over *chance*. During every
//! episode it maintains the Bayesian posterior over the level's aleatoric
//! parameters given only what this episode has actually revealed, and
//! trains the student on fictitious transitions whose chance outcomes are
//! redrawn from that posterior each step. Revealed outcomes stay pinned —
//! the fictitious world never contradicts anything the agent has seen — so
//! the policy stays consistent with its own evidence while the marginal
//! chance statistics match the ground-truth prior no matter how warped the
//! replay distribution is.

use crate::buffer::{LevelBuffer, ReplayConfig};
use crate::curricula::{
    attach_max_returns, buffer_stats, episode_solved, sample_fresh_level, BatchSummary,
    IterationRecord, LevelLogEntry, Student,
};
use crate::env::{
    Cell, DomainConfig, EnvConfig, Fruit, FruitSim, GridSpec, IcyLevel, IcySim, Level, LevelKey,
    LevelPayload, StepResult,
};
use crate::policy::{forward, sample_action, softmax, PolicyError, PolicyParams};
use crate::ppo::{PpoConfig, Trajectory};
use crate::rollout::{play_episode, Actor, FrameStack};
use crate::scoring::{score_batch, EpisodeTrace, ScoreConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplrError {
    /// A tile's chance outcome was folded into the posterior twice.
    #[error("tile {tile} already counted into the posterior")]
    DoubleCount { tile: usize },
    /// The fictitious simulator could not be aligned with the primary one.
    #[error("fictitious state out of sync: {0}")]
    StateSyncFailure(String),
}

/// Beta posterior over a level's ice rate, accumulated from the outcomes
/// the current episode has revealed. Each tile may be counted at most once
/// — its outcome is a single Bernoulli draw, however often it is stepped on.
#[derive(Debug, Clone)]
pub struct BeliefPosterior {
    alpha: f64,
    beta: f64,
    n_plus: u64,
    n_minus: u64,
    counted: HashSet<usize>,
}

impl BeliefPosterior {
    pub fn new(alpha: f64, beta: f64) -> BeliefPosterior {
        assert!(
            alpha > 0.0 && beta > 0.0,
            "Beta prior parameters must be positive"
        );
        BeliefPosterior { alpha, beta, n_plus: 0, n_minus: 0, counted: HashSet::new() }
    }

    /// Record the revealed outcome of one tile. The tile must not have been
    /// counted before.
    pub fn observe(&mut self, tile: usize, icy: bool) -> Result<(), SamplrError> {
        if !self.counted.insert(tile) {
            return Err(SamplrError::DoubleCount { tile });
        }
        if icy {
            self.n_plus += 1;
        } else {
            self.n_minus += 1;
        }
        Ok(())
    }

    pub fn seen(&self, tile: usize) -> bool {
        self.counted.contains(&tile)
    }

    /// Counts of icy / clean outcomes observed so far.
    pub fn observations(&self) -> (u64, u64) {
        (self.n_plus, self.n_minus)
    }

    /// Current posterior parameters `(alpha + N+, beta + N-)`.
    pub fn params(&self) -> (f64, f64) {
        (self.alpha + self.n_plus as f64, self.beta + self.n_minus as f64)
    }

    /// Posterior predictive probability that an unseen tile is icy.
    pub fn predictive_mean(&self) -> f64 {
        let (a, b) = self.params();
        a / (a + b)
    }

    /// One draw of the ice rate from the posterior.
    pub fn sample_q(&self, rng: &mut ChaCha8Rng) -> f64 {
        let (a, b) = self.params();
        Beta::new(a, b).expect("posterior parameters stay positive").sample(rng)
    }
}

/// How episodes are grounded during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grounding {
    /// Fictitious transitions drive behaviour too (the default): the
    /// episode the student lives through *is* the grounded one.
    ActOnFictitious,
    /// Behaviour follows the level's real chance outcomes; rewards,
    /// termination flags and bootstrap targets come from a fictitious
    /// branch stepped in lockstep.
    ActOnReal,
    /// Baseline: resample the aleatoric parameters from the prior once at
    /// episode start and play normally. No within-episode conditioning.
    Naive,
}

/// The ground-truth distribution the aleatoric state is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AleatoricPrior {
    /// Beta prior over the per-level ice rate.
    Ice { alpha: f64, beta: f64 },
    /// Probability that the paying fruit is the apple.
    Fruit { q_apple: f64 },
    /// Family without chance: grounding is a no-op.
    Deterministic,
}

impl AleatoricPrior {
    pub fn for_domain(domain: &DomainConfig) -> AleatoricPrior {
        match domain {
            DomainConfig::Maze(_) => AleatoricPrior::Deterministic,
            DomainConfig::FruitChoice(f) => AleatoricPrior::Fruit { q_apple: f.q_apple },
            DomainConfig::IcyMaze(i) => {
                AleatoricPrior::Ice { alpha: i.ice_alpha, beta: i.ice_beta }
            }
        }
    }
}

/// Draw a complete ice mask from the belief state: revealed cells keep
/// their pinned value, every other floor cell is redrawn i.i.d. under a
/// fresh rate `q` sampled from the posterior. Walls stay ice-free.
pub fn resample_mask(
    grid: &GridSpec,
    frozen: &[Option<bool>],
    belief: &BeliefPosterior,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    let q = belief.sample_q(rng);
    grid.cells
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c == Cell::Wall {
                false
            } else {
                frozen[i].unwrap_or_else(|| rng.gen_bool(q))
            }
        })
        .collect()
}

/// One fictitious step branched off `primary`: a second simulator on the
/// same layout gets a posterior-resampled ice mask (revealed cells pinned),
/// copies the primary's pose, and takes `action`. The primary is untouched.
/// Returns the step result together with the mask the step ran under, so
/// the caller can pin newly contacted cells.
pub fn fictitious_transition(
    primary: &IcySim,
    frozen: &[Option<bool>],
    belief: &BeliefPosterior,
    action: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(StepResult, Vec<bool>), SamplrError> {
    if primary.done() {
        return Err(SamplrError::StateSyncFailure(
            "primary episode already finished".into(),
        ));
    }
    let grid = &primary.level.maze.grid;
    if frozen.len() != grid.cells.len() {
        return Err(SamplrError::StateSyncFailure(format!(
            "frozen map covers {} cells, grid has {}",
            frozen.len(),
            grid.cells.len()
        )));
    }
    let mask = resample_mask(grid, frozen, belief, rng);
    let mut sim = IcySim::new(
        IcyLevel {
            maze: primary.level.maze.clone(),
            ice: mask.clone(),
            ice_rate_q: belief.predictive_mean(),
        },
        primary.cfg,
    );
    sim.sync_pose(primary.agent_pos(), primary.facing(), primary.steps_taken(), false);
    let result = sim
        .step(action)
        .map_err(|e| SamplrError::StateSyncFailure(format!("fictitious step failed: {e}")))?;
    Ok((result, mask))
}

/// Fraction of floor cells carrying ice in the level's real mask.
pub fn level_ice_rate(icy: &IcyLevel) -> f64 {
    let mut floors = 0usize;
    let mut iced = 0usize;
    for (i, &c) in icy.maze.grid.cells.iter().enumerate() {
        if c == Cell::Empty {
            floors += 1;
            iced += icy.ice[i] as usize;
        }
    }
    if floors == 0 {
        0.0
    } else {
        iced as f64 / floors as f64
    }
}

/// One grounded episode, plus the chance telemetry the iteration log wants.
pub struct GroundedEpisode {
    pub traj: Trajectory,
    pub trace: EpisodeTrace,
    pub steps: usize,
    pub undiscounted_return: f64,
    pub solved: bool,
    /// Final posterior parameters (icy family only).
    pub posterior: Option<(f64, f64)>,
    /// Chance rate the training stream actually experienced: fraction of
    /// freshly revealed tiles that came up icy, or the paying-fruit draw.
    pub fictitious_rate: Option<f64>,
    /// Chance rate baked into the level itself.
    pub real_rate: Option<f64>,
}

/// Play one episode of `level` under the given grounding. Families without
/// aleatoric state fall back to ordinary play. `gamma` only matters for
/// [`Grounding::ActOnReal`], where a finished behaviour stream folds the
/// fictitious bootstrap value into the final reward.
pub fn grounded_episode(
    level: &Level,
    cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    capture_dists: bool,
    grounding: Grounding,
    prior: AleatoricPrior,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> GroundedEpisode {
    match (&level.payload, prior) {
        (LevelPayload::IcyMaze(icy), AleatoricPrior::Ice { alpha, beta }) => match grounding {
            Grounding::ActOnFictitious => {
                icy_fictitious_episode(icy, cfg, params, stack_depth, capture_dists, alpha, beta, rng)
            }
            Grounding::ActOnReal => icy_act_on_real_episode(
                icy, cfg, params, stack_depth, capture_dists, alpha, beta, gamma, rng,
            ),
            Grounding::Naive => {
                icy_naive_episode(icy, cfg, params, stack_depth, capture_dists, alpha, beta, rng)
            }
        },
        (LevelPayload::FruitChoice(_), AleatoricPrior::Fruit { q_apple }) => {
            fruit_grounded_episode(level, cfg, params, stack_depth, capture_dists, grounding, q_apple, rng)
        }
        (LevelPayload::Maze(_), _) | (_, AleatoricPrior::Deterministic) => {
            plain_episode(level, cfg, params, stack_depth, capture_dists, rng)
        }
        _ => panic!("aleatoric prior does not match the level family"),
    }
}

fn plain_episode(
    level: &Level,
    cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    capture_dists: bool,
    rng: &mut ChaCha8Rng,
) -> GroundedEpisode {
    let mut actor = Actor::Network { params, greedy: false };
    let out = play_episode(level, cfg, &mut actor, stack_depth, capture_dists, 0, rng)
        .expect("curriculum levels are validated before collection");
    let solved = episode_solved(level, &out.traj, out.reached_goal);
    GroundedEpisode {
        traj: out.traj,
        trace: out.trace,
        steps: out.steps,
        undiscounted_return: out.undiscounted_return,
        solved,
        posterior: None,
        fictitious_rate: None,
        real_rate: None,
    }
}

#[allow(clippy::too_many_arguments)]
fn icy_fictitious_episode(
    icy: &IcyLevel,
    cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    capture_dists: bool,
    alpha: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> GroundedEpisode {
    let grid = &icy.maze.grid;
    let mut belief = BeliefPosterior::new(alpha, beta);
    let mut frozen: Vec<Option<bool>> = vec![None; grid.cells.len()];
    let mut sim = IcySim::new(icy.clone(), cfg);

    // The agent has been standing on its start cell since before the first
    // action, so that outcome is drawn from the prior and pinned up front.
    let start = grid.idx(icy.maze.agent.0, icy.maze.agent.1);
    let q0 = belief.sample_q(rng);
    let start_icy = rng.gen_bool(q0);
    frozen[start] = Some(start_icy);
    belief.observe(start, start_icy).expect("start cell observed once");
    let mut contacts = 1usize;
    let mut icy_contacts = start_icy as usize;

    let first = sim.observe().encode();
    let mut stack = FrameStack::new(stack_depth, first.len());
    stack.push(first);

    let mut traj = Trajectory::default();
    let mut trace = EpisodeTrace::default();
    if capture_dists {
        trace.dists = Some(Vec::new());
    }
    let mut solved = false;

    loop {
        // Fresh fictitious world for this step: pinned cells keep their
        // values, everything else follows a new posterior draw.
        let mask = resample_mask(grid, &frozen, &belief, rng);
        sim.set_ice(mask.clone());

        let input = stack.stacked();
        let (logits, value) = forward(params, &input);
        let (action, log_prob) = sample_action(&logits, rng);
        let r = sim.step(action).expect("loop exits on done");
        solved |= r.info.reached_goal;
        for &(cx, cy) in &r.info.contacted {
            let ci = grid.idx(cx, cy);
            if frozen[ci].is_none() {
                frozen[ci] = Some(mask[ci]);
                belief.observe(ci, mask[ci]).expect("cell pinned exactly once");
                contacts += 1;
                icy_contacts += mask[ci] as usize;
            }
        }

        traj.inputs.push(input);
        traj.actions.push(action);
        traj.log_probs.push(log_prob);
        traj.rewards.push(r.reward);
        traj.dones.push(r.done);
        traj.values.push(value);
        trace.rewards.push(r.reward);
        trace.values.push(value);
        if let Some(ds) = trace.dists.as_mut() {
            ds.push(softmax(&logits));
        }
        if r.done {
            break;
        }
        stack.push(r.obs.encode());
    }

    let steps = traj.len();
    let undiscounted_return = traj.rewards.iter().sum();
    GroundedEpisode {
        traj,
        trace,
        steps,
        undiscounted_return,
        solved,
        posterior: Some(belief.params()),
        fictitious_rate: Some(icy_contacts as f64 / contacts as f64),
        real_rate: Some(level_ice_rate(icy)),
    }
}

#[allow(clippy::too_many_arguments)]
fn icy_act_on_real_episode(
    icy: &IcyLevel,
    cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    capture_dists: bool,
    alpha: f64,
    beta: f64,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> GroundedEpisode {
    let grid = &icy.maze.grid;
    let mut belief = BeliefPosterior::new(alpha, beta);
    let mut frozen: Vec<Option<bool>> = vec![None; grid.cells.len()];
    let mut real = IcySim::new(icy.clone(), cfg);

    // The start cell's *true* outcome is revealed immediately — the agent is
    // standing on it.
    let start = grid.idx(icy.maze.agent.0, icy.maze.agent.1);
    frozen[start] = Some(icy.ice[start]);
    belief.observe(start, icy.ice[start]).expect("start cell observed once");

    let mut fict_contacts = 0usize;
    let mut fict_icy = 0usize;

    let first = real.observe().encode();
    let mut stack = FrameStack::new(stack_depth, first.len());
    stack.push(first);

    let mut traj = Trajectory { next_values: Some(Vec::new()), ..Trajectory::default() };
    let mut trace = EpisodeTrace::default();
    if capture_dists {
        trace.dists = Some(Vec::new());
    }
    let mut solved = false;

    loop {
        let input = stack.stacked();
        let (logits, value) = forward(params, &input);
        let (action, log_prob) = sample_action(&logits, rng);

        // Fictitious branch: same pose, chance redrawn from the posterior.
        let (fict, mask) = fictitious_transition(&real, &frozen, &belief, action, rng)
            .expect("primary is live inside the loop");
        for &(cx, cy) in &fict.info.contacted {
            let ci = grid.idx(cx, cy);
            if frozen[ci].is_none() {
                fict_contacts += 1;
                fict_icy += mask[ci] as usize;
            }
        }
        // Bootstrap target under the fictitious successor observation.
        let fict_next_value = if fict.done {
            0.0
        } else {
            let mut peek = stack.clone();
            peek.push(fict.obs.encode());
            forward(params, &peek.stacked()).1
        };

        // Real branch: advances behaviour, reveals true outcomes.
        let r = real.step(action).expect("loop exits on done");
        solved |= r.info.reached_goal;
        for &(cx, cy) in &r.info.contacted {
            let ci = grid.idx(cx, cy);
            if frozen[ci].is_none() {
                frozen[ci] = Some(icy.ice[ci]);
                belief.observe(ci, icy.ice[ci]).expect("cell pinned exactly once");
            }
        }

        let mut reward = fict.reward;
        let done = fict.done || r.done;
        let mut next_value = fict_next_value;
        if r.done && !fict.done {
            // Behaviour ended while the fictitious branch would have gone
            // on: fold the fictitious bootstrap into the reward, exactly
            // like a time-limit cut.
            reward += gamma * next_value;
            next_value = 0.0;
        }

        traj.inputs.push(input);
        traj.actions.push(action);
        traj.log_probs.push(log_prob);
        traj.rewards.push(reward);
        traj.dones.push(done);
        traj.values.push(value);
        traj.next_values
            .as_mut()
            .expect("mode installs the override")
            .push(if done { 0.0 } else { next_value });
        trace.rewards.push(reward);
        trace.values.push(value);
        if let Some(ds) = trace.dists.as_mut() {
            ds.push(softmax(&logits));
        }

        if r.done {
            break;
        }
        stack.push(r.obs.encode());
    }

    let steps = traj.len();
    let undiscounted_return = traj.rewards.iter().sum();
    let fictitious_rate =
        (fict_contacts > 0).then(|| fict_icy as f64 / fict_contacts as f64);
    GroundedEpisode {
        traj,
        trace,
        steps,
        undiscounted_return,
        solved,
        posterior: Some(belief.params()),
        fictitious_rate,
        real_rate: Some(level_ice_rate(icy)),
    }
}

fn icy_naive_episode(
    icy: &IcyLevel,
    cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    capture_dists: bool,
    alpha: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) -> GroundedEpisode {
    // Replace the level's chance state with one fresh prior draw for the
    // whole episode, then play normally.
    let q = Beta::new(alpha, beta).expect("positive prior").sample(rng);
    let mut mask = vec![false; icy.maze.grid.cells.len()];
    for (i, &c) in icy.maze.grid.cells.iter().enumerate() {
        if c == Cell::Empty {
            mask[i] = rng.gen_bool(q);
        }
    }
    let replaced = Level {
        payload: LevelPayload::IcyMaze(IcyLevel {
            maze: icy.maze.clone(),
            ice: mask,
            ice_rate_q: q,
        }),
        seed: 0,
    };
    let mut out = plain_episode(&replaced, cfg, params, stack_depth, capture_dists, rng);
    out.fictitious_rate = match &replaced.payload {
        LevelPayload::IcyMaze(l) => Some(level_ice_rate(l)),
        _ => unreachable!(),
    };
    out.real_rate = Some(level_ice_rate(icy));
    out
}

#[allow(clippy::too_many_arguments)]
fn fruit_grounded_episode(
    level: &Level,
    cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    capture_dists: bool,
    grounding: Grounding,
    q_apple: f64,
    rng: &mut ChaCha8Rng,
) -> GroundedEpisode {
    let fruit = match &level.payload {
        LevelPayload::FruitChoice(f) => f,
        _ => unreachable!("dispatched on payload"),
    };

    // The paying fruit is the only chance in this family. It is invisible
    // until the episode-ending eat and it never affects movement, so the
    // act-on-real and act-on-fictitious streams coincide: both redraw the
    // identity from the prior each step and pay out whatever the draw in
    // force at the terminal step says. Naive grounding draws once instead —
    // the same Bernoulli(q) law at the only step where it matters.
    let mut sim = FruitSim::new(fruit.clone(), cfg);
    let mut draw = rng.gen_bool(q_apple);

    let first = sim.observe().encode();
    let mut stack = FrameStack::new(stack_depth, first.len());
    stack.push(first);

    let mut traj = Trajectory::default();
    let mut trace = EpisodeTrace::default();
    if capture_dists {
        trace.dists = Some(Vec::new());
    }

    loop {
        if grounding != Grounding::Naive {
            draw = rng.gen_bool(q_apple);
        }
        sim.level.correct_fruit = if draw { Fruit::Apple } else { Fruit::Banana };

        let input = stack.stacked();
        let (logits, value) = forward(params, &input);
        let (action, log_prob) = sample_action(&logits, rng);
        let r = sim.step(action).expect("loop exits on done");

        traj.inputs.push(input);
        traj.actions.push(action);
        traj.log_probs.push(log_prob);
        traj.rewards.push(r.reward);
        traj.dones.push(r.done);
        traj.values.push(value);
        trace.rewards.push(r.reward);
        trace.values.push(value);
        if let Some(ds) = trace.dists.as_mut() {
            ds.push(softmax(&logits));
        }
        if r.done {
            break;
        }
        stack.push(r.obs.encode());
    }

    let steps = traj.len();
    let undiscounted_return: f64 = traj.rewards.iter().sum();
    GroundedEpisode {
        traj,
        trace,
        steps,
        undiscounted_return,
        solved: undiscounted_return > 0.0,
        posterior: None,
        fictitious_rate: Some(draw as u8 as f64),
        real_rate: Some((fruit.correct_fruit == Fruit::Apple) as u8 as f64),
    }
}

/// Aggregate chance telemetry over one collection batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundingTelemetry {
    /// Posterior parameters at the end of the batch's last episode.
    pub posterior: Option<(f64, f64)>,
    /// Mean per-episode fictitious chance rate.
    pub fictitious_rate: Option<f64>,
    /// Mean per-episode real chance rate.
    pub real_rate: Option<f64>,
}

/// Grounded counterpart of `collect_on_level`: whole episodes until at
/// least `min_transitions` have accumulated (and at least one episode).
#[allow(clippy::too_many_arguments)]
pub fn collect_grounded(
    level: &Level,
    env_cfg: EnvConfig,
    params: &PolicyParams,
    stack_depth: usize,
    min_transitions: usize,
    capture_dists: bool,
    grounding: Grounding,
    prior: AleatoricPrior,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> (Trajectory, Vec<EpisodeTrace>, BatchSummary, GroundingTelemetry) {
    let mut traj = Trajectory::default();
    let mut traces = Vec::new();
    let mut summary = BatchSummary::default();
    let mut telemetry = GroundingTelemetry::default();
    let mut solved = 0usize;
    let mut fict_rates = Vec::new();
    let mut real_rates = Vec::new();

    while summary.transitions < min_transitions.max(1) {
        let out = grounded_episode(
            level, env_cfg, params, stack_depth, capture_dists, grounding, prior, gamma, rng,
        );
        summary.episodes += 1;
        summary.transitions += out.steps;
        summary.mean_return += out.undiscounted_return;
        summary.max_return = summary.max_return.max(out.undiscounted_return);
        summary.mean_steps += out.steps as f64;
        summary.mean_lzw += crate::metrics::lzw_complexity(&out.traj.actions).unwrap_or(0) as f64;
        solved += out.solved as usize;
        if out.posterior.is_some() {
            telemetry.posterior = out.posterior;
        }
        if let Some(f) = out.fictitious_rate {
            fict_rates.push(f);
        }
        if let Some(r) = out.real_rate {
            real_rates.push(r);
        }
        traces.push(out.trace);
        traj.extend(out.traj);
    }
    let n = summary.episodes as f64;
    summary.mean_return /= n;
    summary.mean_steps /= n;
    summary.mean_lzw /= n;
    summary.solved_fraction = solved as f64 / n;
    if !fict_rates.is_empty() {
        telemetry.fictitious_rate = Some(fict_rates.iter().sum::<f64>() / fict_rates.len() as f64);
    }
    if !real_rates.is_empty() {
        telemetry.real_rate = Some(real_rates.iter().sum::<f64>() / real_rates.len() as f64);
    }
    (traj, traces, summary, telemetry)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplrConfig {
    pub replay: ReplayConfig,
    pub grounding: Grounding,
    pub stack_depth: usize,
    pub rollout_length: usize,
}

/// Robust PLR over levels with the trajectories swapped for grounded ones:
/// fresh levels are scored without touching the student, replayed levels
/// train it, and every rollout — scored or trained on — is collected under
/// the configured grounding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplrTrainer {
    pub student: Student,
    pub buffer: LevelBuffer,
    pub domain: DomainConfig,
    pub env_cfg: EnvConfig,
    pub ppo: PpoConfig,
    pub score_cfg: ScoreConfig,
    cfg: SamplrConfig,
    prior: AleatoricPrior,
    seen: HashSet<LevelKey>,
    episode_counter: u64,
    iteration: u64,
}

impl SamplrTrainer {
    pub fn new(
        student: Student,
        domain: DomainConfig,
        env_cfg: EnvConfig,
        ppo: PpoConfig,
        score_cfg: ScoreConfig,
        cfg: SamplrConfig,
    ) -> SamplrTrainer {
        let prior = AleatoricPrior::for_domain(&domain);
        SamplrTrainer {
            student,
            buffer: LevelBuffer::new(cfg.replay.clone()),
            domain,
            env_cfg,
            ppo,
            score_cfg,
            cfg,
            prior,
            seen: HashSet::new(),
            episode_counter: 0,
            iteration: 0,
        }
    }

    pub fn grounding(&self) -> Grounding {
        self.cfg.grounding
    }

    pub fn stack_depth(&self) -> usize {
        self.cfg.stack_depth
    }

    pub fn episode_counter(&self) -> u64 {
        self.episode_counter
    }

    pub fn prior(&self) -> AleatoricPrior {
        self.prior
    }

    pub fn run_iteration(&mut self, rng: &mut ChaCha8Rng) -> Result<IterationRecord, PolicyError> {
        let replay = self.buffer.replay_decision(self.seen.len(), None, rng);
        let level = if replay {
            let idx = self
                .buffer
                .sample_replay(self.episode_counter, rng)
                .expect("replay decision implies non-empty buffer");
            self.buffer.entries()[idx].level.clone()
        } else {
            sample_fresh_level(&self.domain, None, rng)
        };

        let capture = self.score_cfg.kind.needs_dists();
        let (traj, mut traces, summary, telemetry) = collect_grounded(
            &level,
            self.env_cfg,
            &self.student.params,
            self.cfg.stack_depth,
            self.cfg.rollout_length,
            capture,
            self.cfg.grounding,
            self.prior,
            self.ppo.gamma,
            rng,
        );
        attach_max_returns(&mut traces, Some(&self.buffer), &level, summary.max_return);
        let score = score_batch(&self.score_cfg, &traces).expect("trace/kind mismatch");

        // Robust by construction: fresh levels never touch the student.
        let ppo_stats = if replay {
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
            trained: replay,
            ppo: ppo_stats,
            posterior_alpha: telemetry.posterior.map(|(a, _)| a),
            posterior_beta: telemetry.posterior.map(|(_, b)| b),
            fictitious_rate: telemetry.fictitious_rate,
            real_rate: telemetry.real_rate,
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
