//! Zero-shot evaluation and complexity metrics: held-out test suites,
//! greedy-policy solved rates, the train/test generalization gap, and LZW
//! action-sequence complexity.

use std::collections::HashSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    Cell, EnvConfig, Facing, GridSpec, Level, LevelKey, LevelPayload, MazeLevel,
};
use crate::policy::PolicyParams;
use crate::rollout::{play_episode, Actor};
use crate::stats::{mean, median};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("action sequence is empty")]
    EmptySequence,
    #[error("evaluation suite is empty")]
    EmptySuite,
    #[error("suite io failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("suite format invalid: {0}")]
    Format(String),
}

/// Number of codes a standard LZW encoder emits for the sequence, with the
/// dictionary initialised to the single-symbol alphabet. The count does not
/// depend on how many unused alphabet symbols the dictionary starts with,
/// so the alphabet is taken implicitly from the sequence. Repetitive
/// sequences compress to few codes; incompressible ones approach one code
/// per symbol.
pub fn lzw_complexity(seq: &[usize]) -> Result<usize, MetricsError> {
    if seq.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    let mut dict: HashSet<Vec<usize>> = HashSet::new();
    let mut w: Vec<usize> = Vec::new();
    let mut codes = 0usize;
    for &k in seq {
        let mut cand = w.clone();
        cand.push(k);
        if cand.len() == 1 || dict.contains(&cand) {
            w = cand;
        } else {
            codes += 1;
            dict.insert(cand);
            w = vec![k];
        }
    }
    codes += 1; // flush the pending phrase
    Ok(codes)
}

// --- held-out suites ------------------------------------------------------

/// One named held-out level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteLevel {
    pub name: String,
    pub level: Level,
}

/// A named list of held-out levels for zero-shot evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSuite {
    pub name: String,
    pub levels: Vec<SuiteLevel>,
}

impl EvalSuite {
    pub fn load(path: &Path) -> Result<EvalSuite, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let suite: EvalSuite =
            serde_json::from_str(&text).map_err(|e| MetricsError::Format(e.to_string()))?;
        for entry in &suite.levels {
            entry
                .level
                .validate()
                .map_err(|e| MetricsError::Format(format!("level {}: {e}", entry.name)))?;
        }
        Ok(suite)
    }

    pub fn save(&self, path: &Path) -> Result<(), MetricsError> {
        let text = serde_json::to_string_pretty(self).expect("suite serializes");
        std::fs::write(path, text).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn keys(&self) -> HashSet<LevelKey> {
        self.levels.iter().map(|l| l.level.key()).collect()
    }

    /// Names of suite levels whose content id collides with a training
    /// level — must be empty for a valid held-out suite.
    pub fn training_overlap<'a>(
        &'a self,
        train_ids: &HashSet<LevelKey>,
    ) -> Vec<&'a str> {
        self.levels
            .iter()
            .filter(|l| train_ids.contains(&l.level.key()))
            .map(|l| l.name.as_str())
            .collect()
    }
}

fn grid_level(grid: GridSpec, agent: (usize, usize), goal: (usize, usize)) -> Level {
    let level = Level {
        payload: LevelPayload::Maze(MazeLevel { grid, agent, facing: Facing::East, goal }),
        seed: 0,
    };
    level.validate().expect("authored layouts are valid");
    level
}

/// Sixteen 3-ish-wide rooms on a 15x15 grid, one doorway per internal wall
/// segment, goal in the far corner.
pub fn sixteen_rooms() -> Level {
    let size = 15;
    let dividers = [3usize, 7, 11];
    let bounds = [0usize, 3, 7, 11, 14];
    let mut grid = GridSpec::open(size, size);
    for &d in &dividers {
        for y in 1..size - 1 {
            grid.set(d, y, Cell::Wall);
        }
        for x in 1..size - 1 {
            grid.set(x, d, Cell::Wall);
        }
    }
    // One door per wall segment between adjacent rooms, nudged off-centre in
    // a fixed pattern so corridors do not line up into a straight shot.
    for (di, &d) in dividers.iter().enumerate() {
        for r in 0..4 {
            let lo = bounds[r] + 1;
            let hi = bounds[r + 1] - 1;
            let mid = (lo + hi) / 2;
            let off: isize = [(0isize), 1, -1][(di + r) % 3];
            let at = (mid as isize + off).clamp(lo as isize, hi as isize) as usize;
            grid.set(d, at, Cell::Empty); // vertical wall, door in room-row r
            let off: isize = [(1isize), -1, 0][(di + r) % 3];
            let at = (mid as isize + off).clamp(lo as isize, hi as isize) as usize;
            grid.set(at, d, Cell::Empty); // horizontal wall, door in room-col r
        }
    }
    grid_level(grid, (1, 1), (13, 13))
}

/// Concentric square walls with alternating gaps; the goal sits at the
/// centre of the spiral. `size` must be odd and at least 9.
pub fn labyrinth(size: usize) -> Level {
    assert!(size >= 9 && size % 2 == 1, "labyrinth needs odd size >= 9");
    let mut grid = GridSpec::open(size, size);
    let c = size / 2;
    let max_ring = (size - 3) / 2;
    let rings: Vec<usize> = (2..=max_ring).step_by(2).collect();
    for (i, &k) in rings.iter().enumerate() {
        for x in k..size - k {
            grid.set(x, k, Cell::Wall);
            grid.set(x, size - 1 - k, Cell::Wall);
        }
        for y in k..size - k {
            grid.set(k, y, Cell::Wall);
            grid.set(size - 1 - k, y, Cell::Wall);
        }
        let gap_y = if i % 2 == 0 { k } else { size - 1 - k };
        grid.set(c, gap_y, Cell::Empty);
    }
    grid_level(grid, (1, 1), (c, c))
}

/// A single serpentine corridor filling the grid; the goal is at the far
/// end, so the optimal path snakes through every open row.
pub fn corridor(size: usize) -> Level {
    assert!(size >= 7 && size % 2 == 1, "corridor needs odd size >= 7");
    let mut grid = GridSpec::open(size, size);
    let wall_rows = (size - 3) / 2;
    for k in 1..=wall_rows {
        let y = 2 * k;
        for x in 1..size - 1 {
            grid.set(x, y, Cell::Wall);
        }
        let gap_x = if k % 2 == 1 { size - 2 } else { 1 };
        grid.set(gap_x, y, Cell::Empty);
    }
    // The last open row is entered at the side of the final gap; the goal
    // sits at the opposite end.
    let goal_x = if wall_rows % 2 == 1 { 1 } else { size - 2 };
    grid_level(grid, (1, 1), (goal_x, size - 2))
}

/// The classic four-room layout on a 9x9 grid.
pub fn four_rooms() -> Level {
    let size = 9;
    let mut grid = GridSpec::open(size, size);
    for i in 1..size - 1 {
        grid.set(4, i, Cell::Wall);
        grid.set(i, 4, Cell::Wall);
    }
    for (x, y) in [(4, 2), (2, 4), (4, 6), (6, 4)] {
        grid.set(x, y, Cell::Empty);
    }
    grid_level(grid, (1, 1), (7, 7))
}

/// The standard held-out maze suite: the hand-authored motif levels plus a
/// few singly connected perfect mazes drawn from `seed`.
pub fn maze_eval_suite(seed: u64) -> EvalSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = vec![
        SuiteLevel { name: "SixteenRooms-15".into(), level: sixteen_rooms() },
        SuiteLevel { name: "Labyrinth-9".into(), level: labyrinth(9) },
        SuiteLevel { name: "Labyrinth-15".into(), level: labyrinth(15) },
        SuiteLevel { name: "Corridor-9".into(), level: corridor(9) },
        SuiteLevel { name: "Corridor-15".into(), level: corridor(15) },
        SuiteLevel { name: "FourRooms-9".into(), level: four_rooms() },
    ];
    for (i, size) in [(0usize, 9usize), (1, 9), (2, 15), (3, 15)] {
        let level = crate::env::perfect_maze(size, size, &mut rng)
            .expect("odd sizes generate");
        levels.push(SuiteLevel { name: format!("PerfectMaze-{size}-{i}"), level });
    }
    EvalSuite { name: "maze-heldout".into(), levels }
}

// --- evaluation -----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub name: String,
    pub solved_rate: f64,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub mean_return: f64,
    pub median_return: f64,
    pub solved_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub suite: String,
    pub levels: Vec<LevelReport>,
    pub aggregate: AggregateReport,
}

impl EvalReport {
    /// CSV mirror of the JSON report: one row per level plus an aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,solved_rate,mean_return\n");
        for l in &self.levels {
            out.push_str(&format!("{},{},{}\n", l.name, l.solved_rate, l.mean_return));
        }
        out.push_str(&format!(
            "aggregate,{},{}\n",
            self.aggregate.solved_rate, self.aggregate.mean_return
        ));
        out
    }
}

/// Evaluate with an arbitrary actor per level — [`evaluate`] wraps this for
/// the greedy-policy case; the oracle planner and the uniform baseline
/// plug in directly. `stack_depth` only matters for network actors.
pub fn evaluate_with<'p, F>(
    suite: &EvalSuite,
    env_cfg: Option<EnvConfig>,
    stack_depth: usize,
    episodes_per_level: usize,
    seed: u64,
    mut actor_for: F,
) -> Result<EvalReport, MetricsError>
where
    F: FnMut(&Level, EnvConfig) -> Actor<'p>,
{
    if suite.levels.is_empty() {
        return Err(MetricsError::EmptySuite);
    }
    let episodes = episodes_per_level.max(1);
    let mut reports = Vec::with_capacity(suite.levels.len());
    for (i, entry) in suite.levels.iter().enumerate() {
        let cfg = env_cfg.unwrap_or_else(|| EnvConfig::default_for(entry.level.kind()));
        // Each level gets its own stream so reports do not depend on suite
        // order or episode counts elsewhere.
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let mut solved = 0usize;
        let mut returns = Vec::with_capacity(episodes);
        for ep in 0..episodes {
            let mut actor = actor_for(&entry.level, cfg);
            let out =
                play_episode(&entry.level, cfg, &mut actor, stack_depth, false, ep as u64, &mut rng)
                    .map_err(|e| MetricsError::Format(format!("level {}: {e}", entry.name)))?;
            if crate::curricula::episode_solved(&entry.level, &out.traj, out.reached_goal) {
                solved += 1;
            }
            returns.push(out.undiscounted_return);
        }
        reports.push(LevelReport {
            name: entry.name.clone(),
            solved_rate: solved as f64 / episodes as f64,
            mean_return: mean(&returns),
        });
    }
    let level_means: Vec<f64> = reports.iter().map(|r| r.mean_return).collect();
    let solved: Vec<f64> = reports.iter().map(|r| r.solved_rate).collect();
    Ok(EvalReport {
        suite: suite.name.clone(),
        aggregate: AggregateReport {
            mean_return: mean(&level_means),
            median_return: median(&level_means),
            solved_rate: mean(&solved),
        },
        levels: reports,
    })
}

/// Greedy-action evaluation of a policy snapshot on a held-out suite. Pure
/// function of (parameters, suite, seed): repeated calls reproduce the same
/// report bit for bit.
pub fn evaluate(
    params: &PolicyParams,
    suite: &EvalSuite,
    env_cfg: EnvConfig,
    stack_depth: usize,
    episodes_per_level: usize,
    seed: u64,
) -> Result<EvalReport, MetricsError> {
    evaluate_with(suite, Some(env_cfg), stack_depth, episodes_per_level, seed, |_, _| {
        Actor::greedy(params)
    })
}

/// Mean training return minus mean test return.
pub fn generalization_gap(train_returns: &[f64], test_returns: &[f64]) -> f64 {
    mean(train_returns) - mean(test_returns)
}
