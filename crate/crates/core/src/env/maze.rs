//! Maze dynamics: turn-left / turn-right / forward over a wall grid, with
//! the sparse time-discounted goal reward.

use super::{
    codes, maze_goal_reward, Cell, EnvConfig, EnvError, Facing, MazeLevel, ObsMode, Observation,
    StepInfo, StepResult,
};

pub const ACT_LEFT: usize = 0;
pub const ACT_RIGHT: usize = 1;
pub const ACT_FORWARD: usize = 2;

#[derive(Debug, Clone)]
pub struct MazeSim {
    pub level: MazeLevel,
    pub cfg: EnvConfig,
    pub agent: (usize, usize),
    pub facing: Facing,
    pub t: usize,
    pub done: bool,
}

impl MazeSim {
    pub fn new(level: MazeLevel, cfg: EnvConfig) -> MazeSim {
        let agent = level.agent;
        let facing = level.facing;
        MazeSim { level, cfg, agent, facing, t: 0, done: false }
    }

    /// One forward-movement resolution step: where does the agent end up?
    /// Blocked moves leave it in place; the step is still consumed.
    fn forward_target(&self) -> Option<(usize, usize)> {
        let (dx, dy) = self.facing.delta();
        let nx = self.agent.0 as isize + dx;
        let ny = self.agent.1 as isize + dy;
        if self.level.grid.passable(nx, ny) {
            Some((nx as usize, ny as usize))
        } else {
            None
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if action > ACT_FORWARD {
            return Err(EnvError::InvalidAction(action));
        }
        self.t += 1;
        let mut info = StepInfo::default();
        let mut reward = 0.0;

        match action {
            ACT_LEFT => self.facing = self.facing.turn_left(),
            ACT_RIGHT => self.facing = self.facing.turn_right(),
            _ => {
                if let Some(target) = self.forward_target() {
                    self.agent = target;
                    info.contacted.push(target);
                    if target == self.level.goal {
                        info.reached_goal = true;
                        reward = maze_goal_reward(self.t, self.cfg.t_max);
                        self.done = true;
                    }
                }
            }
        }

        if !self.done && self.t >= self.cfg.t_max {
            self.done = true;
        }

        Ok(StepResult { obs: self.observe(), reward, done: self.done, info })
    }

    pub fn observe(&self) -> Observation {
        observe_grid(&self.level, self.agent, self.facing, self.cfg.obs)
    }
}

/// Build a maze-family observation for an agent pose. Shared with the icy
/// variant, which shows exactly the same view (ice is invisible).
pub(super) fn observe_grid(
    level: &MazeLevel,
    agent: (usize, usize),
    facing: Facing,
    mode: ObsMode,
) -> Observation {
    match mode {
        ObsMode::Egocentric { k } => {
            let fwd = facing.delta();
            let right = facing.turn_right().delta();
            let half = (k / 2) as isize;
            let mut cs = Vec::with_capacity(k * k);
            // View row 0 is farthest ahead; the agent sits at the centre of
            // the last row, so the crop covers the block in front of it.
            for vy in 0..k as isize {
                let ahead = (k as isize - 1) - vy;
                for vx in 0..k as isize {
                    let side = vx - half;
                    let x = agent.0 as isize + fwd.0 * ahead + right.0 * side;
                    let y = agent.1 as isize + fwd.1 * ahead + right.1 * side;
                    cs.push(cell_code(level, x, y));
                }
            }
            Observation::Grid { k, codes: cs, facing }
        }
        ObsMode::FullGrid => {
            let g = &level.grid;
            let mut cs = Vec::with_capacity(g.width * g.height);
            for y in 0..g.height {
                for x in 0..g.width {
                    if (x, y) == agent {
                        cs.push(codes::AGENT);
                    } else {
                        cs.push(cell_code(level, x as isize, y as isize));
                    }
                }
            }
            Observation::FullGrid { width: g.width, height: g.height, codes: cs, facing }
        }
    }
}

fn cell_code(level: &MazeLevel, x: isize, y: isize) -> u8 {
    if !level.grid.in_bounds(x, y) {
        return codes::WALL;
    }
    let (x, y) = (x as usize, y as usize);
    if level.grid.get(x, y) == Cell::Wall {
        codes::WALL
    } else if (x, y) == level.goal {
        codes::GOAL
    } else {
        codes::EMPTY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, EnvState, GridSpec, Level, LevelPayload};

    fn level_5x5() -> Level {
        Level {
            payload: LevelPayload::Maze(MazeLevel {
                grid: GridSpec::open(5, 5),
                agent: (1, 1),
                facing: Facing::East,
                goal: (3, 1),
            }),
            seed: 0,
        }
    }

    #[test]
    fn reset_shows_goal_in_crop_of_open_room() {
        let (_, obs) = EnvState::reset(&level_5x5(), EnvConfig::default_for(EnvKind::Maze), 0).unwrap();
        let Observation::Grid { k, codes: cs, facing } = obs else {
            panic!("expected egocentric observation")
        };
        assert_eq!(k, 5);
        assert_eq!(facing, Facing::East);
        // Facing east from (1,1): the goal at (3,1) is two cells ahead, so it
        // appears in the agent's view column, two rows up from the agent.
        let agent_cell = (k - 1) * k + k / 2;
        assert_eq!(cs[agent_cell], codes::EMPTY);
        assert_eq!(cs[(k - 3) * k + k / 2], codes::GOAL);
        // No interior walls anywhere in view except out-of-bounds padding.
        let wall_count = cs.iter().filter(|&&c| c == codes::WALL).count();
        assert!(wall_count > 0, "border/out-of-bounds should read as wall");
    }

    #[test]
    fn forward_into_wall_stays_put_but_consumes_the_step() {
        let mut lvl = level_5x5();
        if let LevelPayload::Maze(m) = &mut lvl.payload {
            m.facing = Facing::North; // wall directly above (1,1)
        }
        let (mut env, _) = EnvState::reset(&lvl, EnvConfig::default_for(EnvKind::Maze), 0).unwrap();
        let r = env.step(ACT_FORWARD).unwrap();
        assert_eq!(env.agent_pos(), Some((1, 1)));
        assert_eq!(env.steps_taken(), 1);
        assert_eq!(r.reward, 0.0);
        assert!(!r.done);
        assert!(r.info.contacted.is_empty());
    }

    #[test]
    fn reaching_goal_pays_discounted_reward_and_ends_episode() {
        let (mut env, _) = EnvState::reset(&level_5x5(), EnvConfig::default_for(EnvKind::Maze), 0).unwrap();
        env.step(ACT_FORWARD).unwrap();
        let r = env.step(ACT_FORWARD).unwrap();
        assert!(r.done);
        assert!(r.info.reached_goal);
        assert!((r.reward - maze_goal_reward(2, 250)).abs() < 1e-12);
        assert_eq!(env.step(ACT_FORWARD), Err(EnvError::EpisodeDone));
    }

    #[test]
    fn timeout_ends_episode_with_zero_reward() {
        let mut cfg = EnvConfig::default_for(EnvKind::Maze);
        cfg.t_max = 3;
        let (mut env, _) = EnvState::reset(&level_5x5(), cfg, 0).unwrap();
        env.step(ACT_LEFT).unwrap();
        env.step(ACT_LEFT).unwrap();
        let r = env.step(ACT_LEFT).unwrap();
        assert!(r.done);
        assert_eq!(r.reward, 0.0);
        assert!(!r.info.reached_goal);
    }

    #[test]
    fn identical_level_and_seed_reproduce_identical_episodes() {
        let lvl = level_5x5();
        let cfg = EnvConfig::default_for(EnvKind::Maze);
        let script = [ACT_FORWARD, ACT_LEFT, ACT_FORWARD, ACT_RIGHT, ACT_FORWARD];
        let run = |seed| {
            let (mut env, obs0) = EnvState::reset(&lvl, cfg, seed).unwrap();
            let mut stream = vec![obs0];
            for &a in &script {
                let r = env.step(a).unwrap();
                stream.push(r.obs.clone());
                if r.done {
                    break;
                }
            }
            stream
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn full_grid_observation_marks_the_agent() {
        let mut cfg = EnvConfig::default_for(EnvKind::Maze);
        cfg.obs = ObsMode::FullGrid;
        let (env, obs) = EnvState::reset(&level_5x5(), cfg, 0).unwrap();
        let Observation::FullGrid { width, codes: cs, .. } = obs else {
            panic!("expected full-grid observation")
        };
        let (ax, ay) = env.agent_pos().unwrap();
        assert_eq!(cs[ay * width + ax], codes::AGENT);
        assert_eq!(cs.iter().filter(|&&c| c == codes::AGENT).count(), 1);
        assert_eq!(cs.iter().filter(|&&c| c == codes::GOAL).count(), 1);
    }
}
