//! IcyMaze: maze movement plus hidden per-tile ice. Stepping onto an icy
//! cell slides the agent one extra cell along its motion if that cell is
//! passable. Ice never appears in observations — only its kinematic effect
//! is felt — so it is aleatoric state for belief and grounding machinery.

use super::maze::{observe_grid, ACT_FORWARD, ACT_LEFT, ACT_RIGHT};
use super::{EnvConfig, EnvError, IcyLevel, Observation, StepInfo, StepResult};

#[derive(Debug, Clone)]
pub struct IcySim {
    pub level: IcyLevel,
    pub cfg: EnvConfig,
    agent: (usize, usize),
    facing: super::Facing,
    t: usize,
    done: bool,
}

impl IcySim {
    pub fn new(level: IcyLevel, cfg: EnvConfig) -> IcySim {
        let agent = level.maze.agent;
        let facing = level.maze.facing;
        IcySim { level, cfg, agent, facing, t: 0, done: false }
    }

    pub fn agent_pos(&self) -> (usize, usize) {
        self.agent
    }

    pub fn facing(&self) -> super::Facing {
        self.facing
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    fn icy(&self, pos: (usize, usize)) -> bool {
        self.level.ice[self.level.maze.grid.idx(pos.0, pos.1)]
    }

    /// Overwrite the ice mask mid-episode. Exists for fictitious transition
    /// machinery, which resamples unvisited tiles between steps.
    pub fn set_ice(&mut self, ice: Vec<bool>) {
        debug_assert_eq!(ice.len(), self.level.ice.len());
        self.level.ice = ice;
    }

    /// Force the kinematic state (position, facing, clock). Used when a
    /// fictitious copy is re-synchronised from the primary episode.
    pub fn sync_pose(&mut self, agent: (usize, usize), facing: super::Facing, t: usize, done: bool) {
        self.agent = agent;
        self.facing = facing;
        self.t = t;
        self.done = done;
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
                let grid = &self.level.maze.grid;
                let (dx, dy) = self.facing.delta();
                let tx = self.agent.0 as isize + dx;
                let ty = self.agent.1 as isize + dy;
                if grid.passable(tx, ty) {
                    let target = (tx as usize, ty as usize);
                    self.agent = target;
                    info.contacted.push(target);
                    if target == self.level.maze.goal {
                        info.reached_goal = true;
                    } else if self.icy(target) {
                        // One extra cell of slide, only if passable.
                        let sx = tx + dx;
                        let sy = ty + dy;
                        if grid.passable(sx, sy) {
                            let slid = (sx as usize, sy as usize);
                            self.agent = slid;
                            info.contacted.push(slid);
                            if slid == self.level.maze.goal {
                                info.reached_goal = true;
                            }
                        }
                    }
                    if info.reached_goal {
                        reward = super::maze_goal_reward(self.t, self.cfg.t_max);
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
        observe_grid(&self.level.maze, self.agent, self.facing, self.cfg.obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, EnvState, Facing, GridSpec, Level, LevelPayload, MazeLevel};

    /// 7-wide two-row room, agent at (1,1) facing east. Keeping a second
    /// interior row lets tests park the goal off the agent's walking line.
    fn corridor(icy_cells: &[(usize, usize)], goal: (usize, usize)) -> Level {
        let grid = GridSpec::open(7, 4);
        let mut ice = vec![false; grid.cells.len()];
        for &(x, y) in icy_cells {
            ice[grid.idx(x, y)] = true;
        }
        Level {
            payload: LevelPayload::IcyMaze(IcyLevel {
                maze: MazeLevel { grid, agent: (1, 1), facing: Facing::East, goal },
                ice,
                ice_rate_q: 0.25,
            }),
            seed: 0,
        }
    }

    fn reset(lvl: &Level) -> EnvState {
        EnvState::reset(lvl, EnvConfig::default_for(EnvKind::IcyMaze), 0).unwrap().0
    }

    #[test]
    fn icy_cell_slides_one_extra_cell() {
        let mut env = reset(&corridor(&[(2, 1)], (5, 1)));
        let r = env.step(ACT_FORWARD).unwrap();
        // Moved onto (2,1), slid through to (3,1): two cells in one step.
        assert_eq!(env.agent_pos(), Some((3, 1)));
        assert_eq!(r.info.contacted, vec![(2, 1), (3, 1)]);
        assert!(!r.done);
    }

    #[test]
    fn slide_into_wall_stops_on_the_icy_cell() {
        // Icy cell right before the east border wall; goal parked on the
        // second row so the walk never terminates early.
        let mut env = reset(&corridor(&[(5, 1)], (2, 2)));
        for _ in 0..4 {
            env.step(ACT_FORWARD).unwrap();
        }
        assert_eq!(env.agent_pos(), Some((5, 1)));
    }

    #[test]
    fn goal_on_the_slide_cell_terminates() {
        let mut env = reset(&corridor(&[(2, 1)], (3, 1)));
        let r = env.step(ACT_FORWARD).unwrap();
        assert!(r.done && r.info.reached_goal);
        assert!((r.reward - super::super::maze_goal_reward(1, 250)).abs() < 1e-12);
    }

    #[test]
    fn goal_check_precedes_slide() {
        // The goal itself is icy (mask noise); entering it must terminate
        // rather than slide through.
        let mut env = reset(&corridor(&[(2, 1)], (2, 1)));
        let r = env.step(ACT_FORWARD).unwrap();
        assert!(r.done && r.info.reached_goal);
        assert_eq!(env.agent_pos(), Some((2, 1)));
    }

    #[test]
    fn ice_is_invisible_to_observations() {
        let clear = corridor(&[], (5, 1));
        let icy = corridor(&[(2, 1), (3, 1), (4, 1)], (5, 1));
        let (_, obs_clear) = EnvState::reset(&clear, EnvConfig::default_for(EnvKind::IcyMaze), 0).unwrap();
        let (_, obs_icy) = EnvState::reset(&icy, EnvConfig::default_for(EnvKind::IcyMaze), 0).unwrap();
        assert_eq!(obs_clear, obs_icy);
    }

    #[test]
    fn turning_on_ice_does_not_slide() {
        let mut env = reset(&corridor(&[(2, 1)], (5, 1)));
        env.step(ACT_FORWARD).unwrap(); // lands at (3,1) after slide
        let before = env.agent_pos();
        env.step(ACT_LEFT).unwrap();
        env.step(ACT_RIGHT).unwrap();
        assert_eq!(env.agent_pos(), before);
    }
}
