//! Episode collection: frame stacking, actor abstractions, and the
//! level-to-trajectory loop shared by every curriculum.
//!
//! Episodes always run to termination (every environment is bounded by
//! `t_max`), so collected trajectories end on a done flag and need no
//! bootstrap value. Besides the learned policy there are two reference
//! actors: a uniform-random policy and a planner that follows a
//! breadth-first-search optimal action sequence computed with full
//! knowledge of the level (including hidden state such as ice), which
//! serves as the optimal-return oracle in regret estimates.

use crate::env::{EnvConfig, EnvError, EnvState, Level, LevelPayload};
use crate::policy::{forward, greedy_action, sample_action, softmax, PolicyParams};
use crate::ppo::Trajectory;
use crate::scoring::EpisodeTrace;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Fixed-depth observation stack. Missing history is zero-padded, newest
/// frame last, so the encoded input length is constant from the first step.
#[derive(Debug, Clone)]
pub struct FrameStack {
    depth: usize,
    frame_len: usize,
    frames: VecDeque<Vec<f64>>,
}

impl FrameStack {
    pub fn new(depth: usize, frame_len: usize) -> FrameStack {
        assert!(depth > 0, "frame stack depth must be positive");
        FrameStack { depth, frame_len, frames: VecDeque::with_capacity(depth) }
    }

    pub fn reset(&mut self) {
        self.frames.clear();
    }

    pub fn push(&mut self, frame: Vec<f64>) {
        assert_eq!(frame.len(), self.frame_len, "frame length changed mid-episode");
        if self.frames.len() == self.depth {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.depth * self.frame_len];
        let pad = self.depth - self.frames.len();
        for (i, f) in self.frames.iter().enumerate() {
            let at = (pad + i) * self.frame_len;
            out[at..at + self.frame_len].copy_from_slice(f);
        }
        out
    }

    pub fn stacked_len(&self) -> usize {
        self.depth * self.frame_len
    }
}

/// Length of one encoded observation for this level family under `cfg`.
pub fn frame_len(level: &Level, cfg: EnvConfig) -> usize {
    let (_, obs) = EnvState::reset(level, cfg, 0).expect("valid level");
    obs.encode().len()
}

/// Network input width for a frame-stacked policy on this level family.
pub fn input_dim(level: &Level, cfg: EnvConfig, stack_depth: usize) -> usize {
    stack_depth * frame_len(level, cfg)
}

/// Something that picks actions during an episode.
pub enum Actor<'a> {
    /// The learned policy; `greedy` switches sampling off (evaluation mode).
    Network { params: &'a PolicyParams, greedy: bool },
    /// Uniform-random baseline.
    Uniform,
    /// Follows a precomputed action sequence; after it runs out (or if no
    /// plan exists) it repeats `fallback`.
    Scripted { plan: Vec<usize>, at: usize, fallback: usize },
}

impl<'a> Actor<'a> {
    pub fn network(params: &'a PolicyParams) -> Actor<'a> {
        Actor::Network { params, greedy: false }
    }

    pub fn greedy(params: &'a PolicyParams) -> Actor<'a> {
        Actor::Network { params, greedy: true }
    }

    /// Optimal-plan oracle for the level. Falls back to a harmless action
    /// when the level is unsolvable (plan = empty).
    pub fn planner(level: &Level, cfg: EnvConfig) -> Actor<'static> {
        let fallback = match level.payload {
            LevelPayload::FruitChoice(_) => crate::env::fruit::ACT_ADVANCE,
            _ => crate::env::maze::ACT_FORWARD,
        };
        Actor::Scripted {
            plan: plan_optimal_actions(level, cfg).unwrap_or_default(),
            at: 0,
            fallback,
        }
    }
}

/// One collected episode: the PPO-ready trajectory, the scoring trace, and
/// summary facts.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub traj: Trajectory,
    pub trace: EpisodeTrace,
    pub steps: usize,
    pub undiscounted_return: f64,
    pub reached_goal: bool,
}

/// Run one full episode of `level` with the given actor.
///
/// `capture_dists` stores the per-step action distribution in the trace
/// (needed by the classifier-style scores). `episode_seed` feeds the
/// environment's own reset; action sampling uses `rng`.
pub fn play_episode(
    level: &Level,
    cfg: EnvConfig,
    actor: &mut Actor,
    stack_depth: usize,
    capture_dists: bool,
    episode_seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeOutcome, EnvError> {
    let (mut env, obs0) = EnvState::reset(level, cfg, episode_seed)?;
    let action_count = level.kind().action_count();
    let first = obs0.encode();
    let mut stack = FrameStack::new(stack_depth, first.len());
    stack.push(first);

    let mut traj = Trajectory::default();
    let mut trace = EpisodeTrace::default();
    if capture_dists {
        trace.dists = Some(Vec::new());
    }
    let mut reached_goal = false;

    loop {
        let input = stack.stacked();
        let (action, log_prob, value, dist) = match actor {
            Actor::Network { params, greedy } => {
                let (logits, v) = forward(params, &input);
                let (a, lp) =
                    if *greedy { greedy_action(&logits) } else { sample_action(&logits, rng) };
                let d = capture_dists.then(|| softmax(&logits));
                (a, lp, v, d)
            }
            Actor::Uniform => {
                let a = rng.gen_range(0..action_count);
                let p = 1.0 / action_count as f64;
                let d = capture_dists.then(|| vec![p; action_count]);
                (a, p.ln(), 0.0, d)
            }
            Actor::Scripted { plan, at, fallback } => {
                let a = plan.get(*at).copied().unwrap_or(*fallback);
                *at += 1;
                let d = capture_dists.then(|| {
                    let mut d = vec![0.0; action_count];
                    d[a] = 1.0;
                    d
                });
                (a, 0.0, 0.0, d)
            }
        };

        let r = env.step(action)?;
        reached_goal |= r.info.reached_goal;

        traj.inputs.push(input);
        traj.actions.push(action);
        traj.log_probs.push(log_prob);
        traj.rewards.push(r.reward);
        traj.dones.push(r.done);
        traj.values.push(value);
        trace.rewards.push(r.reward);
        trace.values.push(value);
        if let (Some(ds), Some(d)) = (trace.dists.as_mut(), dist) {
            ds.push(d);
        }

        if r.done {
            break;
        }
        stack.push(r.obs.encode());
    }

    let steps = traj.len();
    let undiscounted_return = traj.rewards.iter().sum();
    Ok(EpisodeOutcome { traj, trace, steps, undiscounted_return, reached_goal })
}

/// Breadth-first search over full environment states for a shortest action
/// sequence reaching the goal (grid families) or completing the fruit task.
/// Uses the true dynamics — ice slides and all — so it realises the optimal
/// return the regret estimators compare against. `None` when no sequence
/// within `t_max` succeeds.
pub fn plan_optimal_actions(level: &Level, cfg: EnvConfig) -> Option<Vec<usize>> {
    if let LevelPayload::FruitChoice(f) = &level.payload {
        // The optimal script is fully determined: open and cross every
        // door, then eat the fruit that actually pays.
        let mut plan = Vec::new();
        for room in 0..f.room_count {
            for _ in 0..f.door_kicks[room as usize] {
                plan.push(crate::env::fruit::ACT_KICK);
            }
            plan.push(crate::env::fruit::ACT_ADVANCE);
        }
        plan.push(match f.correct_fruit {
            crate::env::Fruit::Apple => crate::env::fruit::ACT_EAT_APPLE,
            crate::env::Fruit::Banana => crate::env::fruit::ACT_EAT_BANANA,
        });
        return (plan.len() <= cfg.t_max).then_some(plan);
    }

    let m = level.maze()?;
    let g = &m.grid;
    let state_key = |env: &EnvState| -> usize {
        let (x, y) = env.agent_pos().expect("grid family");
        let f = match env {
            EnvState::Maze(s) => s.facing,
            EnvState::Icy(s) => s.facing(),
            EnvState::Fruit(_) => unreachable!(),
        };
        (y * g.width + x) * 4 + f.index()
    };
    let (start, _) = EnvState::reset(level, cfg, 0).ok()?;
    let mut best = vec![usize::MAX; g.cells.len() * 4];
    best[state_key(&start)] = 0;
    // Node store: (state, parent index, action taken to get here).
    let mut nodes: Vec<(EnvState, Option<(usize, usize)>)> = vec![(start, None)];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let depth = best[state_key(&nodes[i].0)];
        if depth >= cfg.t_max {
            continue;
        }
        for action in 0..3 {
            let mut next = nodes[i].0.clone();
            let r = next.step(action).expect("live episode");
            if r.info.reached_goal {
                // Reconstruct: walk parents back to the root.
                let mut plan = vec![action];
                let mut at = i;
                while let Some((parent, a)) = nodes[at].1 {
                    plan.push(a);
                    at = parent;
                }
                plan.reverse();
                return Some(plan);
            }
            if r.done {
                continue;
            }
            let k = state_key(&next);
            if best[k] > depth + 1 {
                best[k] = depth + 1;
                nodes.push((next, Some((i, action))));
                queue.push_back(nodes.len() - 1);
            }
        }
    }
    None
}

/// Mean undiscounted return of an actor over `episodes` runs of one level.
pub fn mean_return(
    level: &Level,
    cfg: EnvConfig,
    mut make_actor: impl FnMut() -> ActorSpec,
    params: Option<&PolicyParams>,
    episodes: usize,
    stack_depth: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut acc = 0.0;
    for ep in 0..episodes {
        let mut actor = make_actor().build(level, cfg, params);
        let out = play_episode(level, cfg, &mut actor, stack_depth, false, ep as u64, rng)
            .expect("valid level");
        acc += out.undiscounted_return;
    }
    acc / episodes.max(1) as f64
}

/// Owned description of an actor, buildable per episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorSpec {
    NetworkSampled,
    NetworkGreedy,
    Uniform,
    Planner,
}

impl ActorSpec {
    pub fn build<'a>(
        self,
        level: &Level,
        cfg: EnvConfig,
        params: Option<&'a PolicyParams>,
    ) -> Actor<'a> {
        match self {
            ActorSpec::NetworkSampled => Actor::network(params.expect("network actor needs params")),
            ActorSpec::NetworkGreedy => Actor::greedy(params.expect("network actor needs params")),
            ActorSpec::Uniform => Actor::Uniform,
            ActorSpec::Planner => Actor::planner(level, cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{
        maze_goal_reward, Cell, EnvKind, Facing, FruitLevel, GridSpec, IcyLevel, MazeLevel,
    };
    use crate::policy::{Arch, PolicyParams};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn open_maze(w: usize, h: usize, agent: (usize, usize), facing: Facing, goal: (usize, usize)) -> Level {
        let grid = GridSpec::open(w, h);
        Level {
            payload: LevelPayload::Maze(MazeLevel { grid, agent, facing, goal }),
            seed: 0,
        }
    }

    #[test]
    fn frame_stack_pads_then_slides() {
        let mut s = FrameStack::new(3, 2);
        assert_eq!(s.stacked(), vec![0.0; 6]);
        s.push(vec![1.0, 2.0]);
        assert_eq!(s.stacked(), vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
        s.push(vec![3.0, 4.0]);
        assert_eq!(s.stacked(), vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        s.push(vec![5.0, 6.0]);
        assert_eq!(s.stacked(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        s.push(vec![7.0, 8.0]);
        assert_eq!(s.stacked(), vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        s.reset();
        assert_eq!(s.stacked(), vec![0.0; 6]);
    }

    #[test]
    fn planner_takes_the_straight_corridor() {
        // Goal two cells dead ahead: the optimal plan is two forwards.
        let level = open_maze(5, 5, (2, 3), Facing::North, (2, 1));
        let cfg = EnvConfig::default_for(EnvKind::Maze);
        let plan = plan_optimal_actions(&level, cfg).unwrap();
        assert_eq!(plan, vec![crate::env::maze::ACT_FORWARD; 2]);
        let mut actor = Actor::planner(&level, cfg);
        let out = play_episode(&level, cfg, &mut actor, 4, false, 0, &mut rng(1)).unwrap();
        assert!(out.reached_goal);
        assert_eq!(out.steps, 2);
        assert!((out.undiscounted_return - maze_goal_reward(2, cfg.t_max)).abs() < 1e-12);
    }

    #[test]
    fn planner_turns_when_needed() {
        // Goal directly behind: fastest is turn twice then forward.
        let level = open_maze(5, 5, (2, 2), Facing::North, (2, 3));
        let cfg = EnvConfig::default_for(EnvKind::Maze);
        let plan = plan_optimal_actions(&level, cfg).unwrap();
        assert_eq!(plan.len(), 3);
        assert_eq!(plan[2], crate::env::maze::ACT_FORWARD);
    }

    #[test]
    fn unsolvable_level_yields_no_plan_and_times_out() {
        let mut level = open_maze(7, 7, (1, 1), Facing::East, (5, 5));
        if let LevelPayload::Maze(m) = &mut level.payload {
            // Box the goal in.
            m.grid.set(4, 4, Cell::Wall);
            m.grid.set(4, 5, Cell::Wall);
            m.grid.set(5, 4, Cell::Wall);
        }
        let mut cfg = EnvConfig::default_for(EnvKind::Maze);
        cfg.t_max = 30; // keep the timeout episode short
        assert!(plan_optimal_actions(&level, cfg).is_none());
        let mut actor = Actor::planner(&level, cfg);
        let out = play_episode(&level, cfg, &mut actor, 4, false, 0, &mut rng(2)).unwrap();
        assert!(!out.reached_goal);
        assert_eq!(out.steps, 30);
        assert_eq!(out.undiscounted_return, 0.0);
    }

    #[test]
    fn planner_exploits_ice_knowledge() {
        // Straight corridor with ice midway: sliding shortens the plan by
        // one action relative to the same corridor without ice.
        let base = open_maze(7, 3, (1, 1), Facing::East, (5, 1));
        let cfg = EnvConfig::default_for(EnvKind::IcyMaze);
        let maze = match &base.payload {
            LevelPayload::Maze(m) => m.clone(),
            _ => unreachable!(),
        };
        let mut ice = vec![false; 21];
        ice[1 * 7 + 2] = true; // stepping onto (2,1) slides to (3,1)
        let icy = Level {
            payload: LevelPayload::IcyMaze(IcyLevel { maze: maze.clone(), ice, ice_rate_q: 0.2 }),
            seed: 0,
        };
        let clear = Level {
            payload: LevelPayload::IcyMaze(IcyLevel {
                maze,
                ice: vec![false; 21],
                ice_rate_q: 0.2,
            }),
            seed: 0,
        };
        let icy_plan = plan_optimal_actions(&icy, cfg).unwrap();
        let clear_plan = plan_optimal_actions(&clear, cfg).unwrap();
        assert_eq!(clear_plan.len(), 4);
        assert_eq!(icy_plan.len(), 3);
    }

    #[test]
    fn fruit_plan_opens_every_door_and_eats_right() {
        let level = Level {
            payload: LevelPayload::FruitChoice(FruitLevel {
                room_count: 2,
                correct_fruit: crate::env::Fruit::Apple,
                door_kicks: vec![2, 1],
            }),
            seed: 0,
        };
        let cfg = EnvConfig::default_for(EnvKind::FruitChoice);
        let plan = plan_optimal_actions(&level, cfg).unwrap();
        use crate::env::fruit::{ACT_ADVANCE, ACT_EAT_APPLE, ACT_KICK};
        assert_eq!(plan, vec![ACT_KICK, ACT_KICK, ACT_ADVANCE, ACT_KICK, ACT_ADVANCE, ACT_EAT_APPLE]);
        let mut actor = Actor::planner(&level, cfg);
        let out = play_episode(&level, cfg, &mut actor, 1, false, 0, &mut rng(3)).unwrap();
        assert!((out.undiscounted_return - 3.0).abs() < 1e-12);
    }

    #[test]
    fn network_episode_is_consistent_and_captures_dists() {
        let level = open_maze(7, 7, (3, 5), Facing::North, (3, 1));
        let cfg = EnvConfig::default_for(EnvKind::Maze);
        let dim = input_dim(&level, cfg, 4);
        let params = PolicyParams::zeros(Arch::new(dim, vec![8], 3));
        let mut actor = Actor::network(&params);
        let out = play_episode(&level, cfg, &mut actor, 4, true, 0, &mut rng(4)).unwrap();
        assert_eq!(out.traj.len(), out.steps);
        assert_eq!(out.trace.rewards.len(), out.steps);
        assert_eq!(out.trace.dists.as_ref().unwrap().len(), out.steps);
        assert!(*out.traj.dones.last().unwrap());
        assert_eq!(out.traj.bootstrap_value, 0.0);
        // Zero parameters -> uniform policy -> log-prob is exactly -ln 3.
        for lp in &out.traj.log_probs {
            assert!((lp + 3f64.ln()).abs() < 1e-12);
        }
        for d in out.trace.dists.as_ref().unwrap() {
            assert_eq!(d.len(), 3);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_actor_is_seed_reproducible() {
        let level = open_maze(7, 7, (3, 3), Facing::East, (5, 5));
        let mut cfg = EnvConfig::default_for(EnvKind::Maze);
        cfg.t_max = 40;
        let run = |seed| {
            let mut actor = Actor::Uniform;
            play_episode(&level, cfg, &mut actor, 4, false, 0, &mut rng(seed))
                .unwrap()
                .traj
                .actions
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn mean_return_planner_dominates_uniform() {
        let level = open_maze(7, 7, (1, 5), Facing::North, (5, 1));
        let mut cfg = EnvConfig::default_for(EnvKind::Maze);
        cfg.t_max = 60;
        let mut r = rng(11);
        let p = mean_return(&level, cfg, || ActorSpec::Planner, None, 5, 4, &mut r);
        let u = mean_return(&level, cfg, || ActorSpec::Uniform, None, 20, 4, &mut r);
        assert!(p > u, "planner {p} should beat uniform {u}");
        // Optimal route: 4 forwards, 1 turn, 4 forwards = 9 steps.
        assert!((p - maze_goal_reward(9, cfg.t_max)).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn input_dim_matches_observation_encoding() {
        let level = open_maze(9, 9, (4, 4), Facing::North, (1, 1));
        let cfg = EnvConfig::default_for(EnvKind::Maze);
        // Egocentric 5x5 crop, 3 codes, plus 4 facing slots, times stack 4.
        assert_eq!(frame_len(&level, cfg), 5 * 5 * 3 + 4);
        assert_eq!(input_dim(&level, cfg, 4), 4 * (5 * 5 * 3 + 4));
    }
}
