//! The level-designer MDP behind the adversarial curricula.
//!
//! A designer episode lays out one maze in `wall_budget + 2` steps: each of
//! the first W actions picks a cell for an obstructing wall (invalid picks
//! — border or already-walled cells — are no-op collisions, so emitted
//! levels carry at most W walls), then one action places the goal and one
//! places the agent. Goal/agent picks that land on an unusable cell fall
//! back to a random empty cell so the episode always ends in a valid level.
//! The policy is a plain feed-forward net over the flattened grid plus a
//! one-hot step index; its reward is whatever objective the surrounding
//! curriculum assigns (negative student return, relative regret, ...) paid
//! on the final step.

use super::Student;
use crate::env::{
    attach_ice, Cell, DomainConfig, Facing, GridSpec, Level, LevelPayload, MazeDomain, MazeLevel,
};
use crate::policy::{forward, sample_action, Arch, PolicyError, PolicyParams};
use crate::ppo::{PpoConfig, PpoStats, Trajectory};
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignerConfig {
    pub hidden: Vec<usize>,
    /// The generator gets its own exploration knob; everything else is
    /// shared with the student PPO config.
    pub entropy_coef: f64,
}

impl Default for DesignerConfig {
    fn default() -> DesignerConfig {
        DesignerConfig { hidden: vec![64, 64], entropy_coef: 0.05 }
    }
}

/// Grid encoding: 3 codes per cell (empty / wall / goal) + step one-hot.
const CELL_CODES: usize = 3;

fn designer_obs(
    grid: &GridSpec,
    goal: Option<(usize, usize)>,
    step: usize,
    total_steps: usize,
) -> Vec<f64> {
    let mut v = vec![0.0; grid.cells.len() * CELL_CODES + total_steps];
    for (i, &c) in grid.cells.iter().enumerate() {
        let code = match c {
            Cell::Empty => 0,
            Cell::Wall => 1,
        };
        v[i * CELL_CODES + code] = 1.0;
    }
    if let Some((gx, gy)) = goal {
        let i = grid.idx(gx, gy);
        v[i * CELL_CODES] = 0.0;
        v[i * CELL_CODES + 2] = 1.0;
    }
    v[grid.cells.len() * CELL_CODES + step] = 1.0;
    v
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Designer {
    pub net: Student,
    pub ppo: PpoConfig,
    dims: MazeDomain,
}

impl Designer {
    /// Designer for the given grid family. Shares the student's PPO
    /// hyper-parameters except the entropy coefficient.
    pub fn new(
        domain: &DomainConfig,
        cfg: &DesignerConfig,
        student_ppo: &PpoConfig,
        rng: &mut ChaCha8Rng,
    ) -> Designer {
        let dims = match domain {
            DomainConfig::Maze(m) => m.clone(),
            DomainConfig::IcyMaze(i) => i.maze.clone(),
            DomainConfig::FruitChoice(_) => {
                panic!("the designer MDP only covers grid families")
            }
        };
        let cells = dims.width * dims.height;
        let total_steps = dims.wall_budget + 2;
        let arch = Arch::new(cells * CELL_CODES + total_steps, cfg.hidden.clone(), cells);
        let ppo = PpoConfig { entropy_coef: cfg.entropy_coef, ..student_ppo.clone() };
        let net = Student::new(PolicyParams::init(arch, rng), &ppo);
        Designer { net, ppo, dims }
    }

    pub fn total_steps(&self) -> usize {
        self.dims.wall_budget + 2
    }

    /// Run one designer episode. The returned trajectory has all-zero
    /// rewards; the curriculum pays the objective via [`Designer::reinforce`].
    pub fn design(&self, domain: &DomainConfig, rng: &mut ChaCha8Rng) -> (Level, Trajectory) {
        let w = self.dims.width;
        let h = self.dims.height;
        let total = self.total_steps();
        let mut grid = GridSpec::open(w, h);
        let mut goal: Option<(usize, usize)> = None;
        let mut agent: Option<(usize, usize)> = None;
        let mut traj = Trajectory::default();

        for step in 0..total {
            let obs = designer_obs(&grid, goal, step, total);
            let (logits, value) = forward(&self.net.params, &obs);
            let (action, log_prob) = sample_action(&logits, rng);
            let (x, y) = (action % w, action / w);

            if step < self.dims.wall_budget {
                // Wall placement; collisions with the border or existing
                // walls are silent no-ops, spending the budget step.
                if grid.is_interior(x, y) && grid.get(x, y) == Cell::Empty {
                    grid.set(x, y, Cell::Wall);
                }
            } else if step == self.dims.wall_budget {
                goal = Some(if grid.is_interior(x, y) && grid.get(x, y) == Cell::Empty {
                    (x, y)
                } else {
                    random_empty(&grid, &[], rng)
                });
            } else {
                let g = goal.expect("goal placed on the previous step");
                agent = Some(
                    if grid.is_interior(x, y) && grid.get(x, y) == Cell::Empty && (x, y) != g {
                        (x, y)
                    } else {
                        random_empty(&grid, &[g], rng)
                    },
                );
            }

            traj.inputs.push(obs);
            traj.actions.push(action);
            traj.log_probs.push(log_prob);
            traj.rewards.push(0.0);
            traj.dones.push(step + 1 == total);
            traj.values.push(value);
        }

        let maze = MazeLevel {
            grid,
            agent: agent.expect("episode placed the agent"),
            facing: Facing::ALL[rng.gen_range(0..4)],
            goal: goal.expect("episode placed the goal"),
        };
        let payload = match domain {
            DomainConfig::Maze(_) => LevelPayload::Maze(maze),
            DomainConfig::IcyMaze(i) => {
                LevelPayload::IcyMaze(attach_ice(maze, i, rng).expect("validated prior"))
            }
            DomainConfig::FruitChoice(_) => unreachable!("checked at construction"),
        };
        let level = Level { payload, seed: rng.next_u64() };
        debug_assert!(level.validate().is_ok(), "designer must emit valid levels");
        (level, traj)
    }

    /// Pay the episode objective on the final step and take a PPO update.
    pub fn reinforce(
        &mut self,
        mut traj: Trajectory,
        reward: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<PpoStats, PolicyError> {
        if let Some(last) = traj.rewards.last_mut() {
            *last = reward;
        }
        self.net.train(&traj, &self.ppo, rng)
    }
}

fn random_empty(grid: &GridSpec, taken: &[(usize, usize)], rng: &mut ChaCha8Rng) -> (usize, usize) {
    let candidates: Vec<(usize, usize)> = grid
        .empty_interior_cells()
        .into_iter()
        .filter(|c| !taken.contains(c))
        .collect();
    candidates[rng.gen_range(0..candidates.len())]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, IcyDomain};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn maze_domain() -> DomainConfig {
        DomainConfig::Maze(MazeDomain { width: 7, height: 7, wall_budget: 5 })
    }

    #[test]
    fn designed_levels_are_valid_and_respect_budget() {
        let mut r = rng(80);
        let d = Designer::new(&maze_domain(), &DesignerConfig::default(), &PpoConfig::default(), &mut r);
        for _ in 0..50 {
            let (level, traj) = d.design(&maze_domain(), &mut r);
            level.validate().unwrap();
            assert!(crate::env::analysis::block_count(&level) <= 5);
            assert_eq!(traj.len(), 7); // 5 walls + goal + agent
            assert!(traj.dones[6] && traj.dones[..6].iter().all(|&x| !x));
            assert!(traj.rewards.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn icy_designs_carry_sampled_ice() {
        let dom = DomainConfig::IcyMaze(IcyDomain {
            maze: MazeDomain { width: 7, height: 7, wall_budget: 3 },
            ice_alpha: 5.0,
            ice_beta: 1.0, // high prior rate so ice actually appears
        });
        let mut r = rng(81);
        let d = Designer::new(&dom, &DesignerConfig::default(), &PpoConfig::default(), &mut r);
        let mut any_ice = false;
        for _ in 0..10 {
            let (level, _) = d.design(&dom, &mut r);
            level.validate().unwrap();
            assert_eq!(level.kind(), EnvKind::IcyMaze);
            if let LevelPayload::IcyMaze(i) = &level.payload {
                any_ice |= i.ice.iter().any(|&b| b);
            }
        }
        assert!(any_ice, "Beta(5,1) prior should produce icy cells");
    }

    #[test]
    fn reinforce_updates_generator_parameters() {
        let mut r = rng(82);
        let mut d =
            Designer::new(&maze_domain(), &DesignerConfig::default(), &PpoConfig::default(), &mut r);
        let (_, traj) = d.design(&maze_domain(), &mut r);
        let before = d.net.params.theta_hash();
        let stats = d.reinforce(traj, 0.75, &mut r).unwrap();
        assert_ne!(d.net.params.theta_hash(), before);
        assert_eq!(d.net.updates, 1);
        assert!(stats.total_loss.is_finite());
    }

    #[test]
    fn design_is_deterministic_under_a_fixed_stream() {
        let mut r1 = rng(83);
        let mut r2 = rng(83);
        let d1 = Designer::new(&maze_domain(), &DesignerConfig::default(), &PpoConfig::default(), &mut r1);
        let d2 = Designer::new(&maze_domain(), &DesignerConfig::default(), &PpoConfig::default(), &mut r2);
        let (l1, _) = d1.design(&maze_domain(), &mut r1);
        let (l2, _) = d2.design(&maze_domain(), &mut r2);
        assert_eq!(l1.key(), l2.key());
    }

    #[test]
    fn fresh_designer_collides_sometimes_but_never_breaks() {
        // Uniform-ish policy on a tiny grid: collisions are common, and the
        // wall count must simply never exceed the budget.
        let dom = DomainConfig::Maze(MazeDomain { width: 5, height: 5, wall_budget: 6 });
        let mut r = rng(84);
        let d = Designer::new(&dom, &DesignerConfig::default(), &PpoConfig::default(), &mut r);
        let mut min_walls = usize::MAX;
        for _ in 0..30 {
            let (level, _) = d.design(&dom, &mut r);
            let walls = crate::env::analysis::block_count(&level);
            assert!(walls <= 6);
            min_walls = min_walls.min(walls);
        }
        assert!(min_walls < 6, "9 interior cells / 6 placements: collisions expected");
    }
}
