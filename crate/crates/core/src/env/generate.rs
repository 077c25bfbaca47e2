//! Domain-randomised level generators and structured layout builders.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Beta;
use thiserror::Error;

use super::{
    Cell, EnvKind, Facing, Fruit, FruitLevel, GridSpec, IcyLevel, Level, LevelPayload, MazeLevel,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("level generation failed: {0}")]
    GenerationFailed(String),
    #[error("invalid domain config: {0}")]
    InvalidConfig(String),
}

/// Maze sampling domain: grid size and the wall budget the generator may
/// spend. The sampled wall count is uniform on `0..=wall_budget`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MazeDomain {
    pub width: usize,
    pub height: usize,
    pub wall_budget: usize,
}

impl Default for MazeDomain {
    fn default() -> Self {
        MazeDomain { width: 9, height: 9, wall_budget: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FruitDomain {
    pub min_rooms: u8,
    pub max_rooms: u8,
    /// Probability the paying fruit is the apple.
    pub q_apple: f64,
    pub r_apple: f64,
    pub r_banana: f64,
}

impl Default for FruitDomain {
    fn default() -> Self {
        FruitDomain { min_rooms: 0, max_rooms: 8, q_apple: 0.7, r_apple: 3.0, r_banana: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IcyDomain {
    pub maze: MazeDomain,
    /// Beta prior over the per-level ice rate.
    pub ice_alpha: f64,
    pub ice_beta: f64,
}

impl Default for IcyDomain {
    fn default() -> Self {
        IcyDomain { maze: MazeDomain::default(), ice_alpha: 1.0, ice_beta: 15.0 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DomainConfig {
    Maze(MazeDomain),
    FruitChoice(FruitDomain),
    IcyMaze(IcyDomain),
}

impl DomainConfig {
    pub fn kind(&self) -> EnvKind {
        match self {
            DomainConfig::Maze(_) => EnvKind::Maze,
            DomainConfig::FruitChoice(_) => EnvKind::FruitChoice,
            DomainConfig::IcyMaze(_) => EnvKind::IcyMaze,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        match self {
            DomainConfig::Maze(m) | DomainConfig::IcyMaze(IcyDomain { maze: m, .. }) => {
                if m.width < 3 || m.height < 3 {
                    return Err(GenError::InvalidConfig("grid must be at least 3x3".into()));
                }
                let interior = (m.width - 2) * (m.height - 2);
                if m.wall_budget + 2 > interior {
                    return Err(GenError::InvalidConfig(format!(
                        "wall budget {} leaves no room for agent and goal in {} interior cells",
                        m.wall_budget, interior
                    )));
                }
                if let DomainConfig::IcyMaze(i) = self {
                    if i.ice_alpha <= 0.0 || i.ice_beta <= 0.0 {
                        return Err(GenError::InvalidConfig("Beta prior must be positive".into()));
                    }
                }
                Ok(())
            }
            DomainConfig::FruitChoice(f) => {
                if f.min_rooms > f.max_rooms || f.max_rooms > 8 {
                    return Err(GenError::InvalidConfig("room range must satisfy min <= max <= 8".into()));
                }
                if !(0.0..=1.0).contains(&f.q_apple) {
                    return Err(GenError::InvalidConfig("q_apple outside [0, 1]".into()));
                }
                Ok(())
            }
        }
    }
}

const PLACEMENT_RETRY_CAP: usize = 1000;

/// Uniform-random cell placements with a retry cap; used everywhere an
/// entity needs a fresh empty cell.
pub(super) fn place_on_empty(
    grid: &GridSpec,
    taken: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize), GenError> {
    let (w, h) = (grid.width, grid.height);
    for _ in 0..PLACEMENT_RETRY_CAP {
        let x = rng.gen_range(1..w - 1);
        let y = rng.gen_range(1..h - 1);
        if grid.get(x, y) == Cell::Empty && !taken.contains(&(x, y)) {
            return Ok((x, y));
        }
    }
    Err(GenError::GenerationFailed(format!(
        "no empty cell found after {PLACEMENT_RETRY_CAP} placement attempts"
    )))
}

fn sample_maze_layout(dom: &MazeDomain, rng: &mut ChaCha8Rng) -> Result<MazeLevel, GenError> {
    let mut grid = GridSpec::open(dom.width, dom.height);
    let wall_count = rng.gen_range(0..=dom.wall_budget);
    let mut interior: Vec<(usize, usize)> = grid.interior_cells().collect();
    // Partial Fisher-Yates: the first `wall_count` entries become walls.
    for i in 0..wall_count.min(interior.len()) {
        let j = rng.gen_range(i..interior.len());
        interior.swap(i, j);
        let (x, y) = interior[i];
        grid.set(x, y, Cell::Wall);
    }
    let agent = place_on_empty(&grid, &[], rng)?;
    let goal = place_on_empty(&grid, &[agent], rng)?;
    let facing = Facing::ALL[rng.gen_range(0..4)];
    Ok(MazeLevel { grid, agent, facing, goal })
}

/// Freeze aleatoric ice onto a finished maze layout: the per-level rate q
/// comes from the domain's Beta prior, then each empty cell ices
/// independently with probability q.
pub fn attach_ice(
    maze: MazeLevel,
    dom: &IcyDomain,
    rng: &mut ChaCha8Rng,
) -> Result<IcyLevel, GenError> {
    let beta = Beta::new(dom.ice_alpha, dom.ice_beta)
        .map_err(|e| GenError::InvalidConfig(format!("bad Beta prior: {e}")))?;
    let q: f64 = beta.sample(rng);
    let ice = maze
        .grid
        .cells
        .iter()
        .map(|&c| c == Cell::Empty && rng.gen_bool(q))
        .collect();
    Ok(IcyLevel { maze, ice, ice_rate_q: q })
}

/// Draw one level from the domain-randomisation distribution.
pub fn sample_dr_level(dom: &DomainConfig, rng: &mut ChaCha8Rng) -> Result<Level, GenError> {
    dom.validate()?;
    let payload = match dom {
        DomainConfig::Maze(m) => LevelPayload::Maze(sample_maze_layout(m, rng)?),
        DomainConfig::IcyMaze(i) => {
            let maze = sample_maze_layout(&i.maze, rng)?;
            LevelPayload::IcyMaze(attach_ice(maze, i, rng)?)
        }
        DomainConfig::FruitChoice(f) => {
            let rooms = rng.gen_range(f.min_rooms..=f.max_rooms);
            let correct = if rng.gen_bool(f.q_apple) { Fruit::Apple } else { Fruit::Banana };
            let kicks = (0..rooms).map(|_| rng.gen_range(1..=3u8)).collect();
            LevelPayload::FruitChoice(FruitLevel {
                room_count: rooms,
                correct_fruit: correct,
                door_kicks: kicks,
            })
        }
    };
    let level = Level { payload, seed: rng.next_u64() };
    debug_assert!(level.validate().is_ok());
    Ok(level)
}

/// Maze of `rooms` chambers in a row, separated by full-height walls with a
/// single random doorway each. Agent starts in the leftmost chamber, goal in
/// the rightmost, so crossing difficulty scales with the room count.
pub fn multi_room_maze(
    width: usize,
    height: usize,
    rooms: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Level, GenError> {
    if rooms == 0 {
        return Err(GenError::InvalidConfig("need at least one room".into()));
    }
    let interior_w = width.saturating_sub(2);
    if rooms * 2 - 1 > interior_w {
        return Err(GenError::InvalidConfig(format!(
            "{rooms} rooms do not fit in interior width {interior_w}"
        )));
    }
    let mut grid = GridSpec::open(width, height);
    // Dividers at evenly spaced columns; each gets one doorway.
    let mut dividers = Vec::new();
    for i in 1..rooms {
        let x = 1 + (i * interior_w) / rooms;
        dividers.push(x);
        for y in 1..height - 1 {
            grid.set(x, y, Cell::Wall);
        }
    }
    for &x in &dividers {
        let door_y = rng.gen_range(1..height - 1);
        grid.set(x, door_y, Cell::Empty);
    }
    let first_room_max_x = dividers.first().copied().unwrap_or(width - 1);
    let last_room_min_x = dividers.last().copied().unwrap_or(0);
    let agent = loop {
        let (x, y) = place_on_empty(&grid, &[], rng)?;
        if x < first_room_max_x {
            break (x, y);
        }
    };
    let goal = loop {
        let (x, y) = place_on_empty(&grid, &[agent], rng)?;
        if x > last_room_min_x {
            break (x, y);
        }
    };
    let facing = Facing::ALL[rng.gen_range(0..4)];
    let level = Level {
        payload: LevelPayload::Maze(MazeLevel { grid, agent, facing, goal }),
        seed: rng.next_u64(),
    };
    level
        .validate()
        .map_err(|e| GenError::GenerationFailed(e.to_string()))?;
    Ok(level)
}

/// Perfect maze (no loops, every cell reachable) via recursive backtracking
/// on the odd-coordinate lattice. Width and height must be odd and >= 5.
pub fn perfect_maze(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Result<Level, GenError> {
    if width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0 {
        return Err(GenError::InvalidConfig("perfect maze needs odd dimensions >= 5".into()));
    }
    let mut grid = GridSpec {
        width,
        height,
        cells: vec![Cell::Wall; width * height],
    };
    let lat_w = (width - 1) / 2;
    let lat_h = (height - 1) / 2;
    let cell_at = |lx: usize, ly: usize| (2 * lx + 1, 2 * ly + 1);

    let mut visited = vec![false; lat_w * lat_h];
    let start = (rng.gen_range(0..lat_w), rng.gen_range(0..lat_h));
    let mut stack = vec![start];
    visited[start.1 * lat_w + start.0] = true;
    let (sx, sy) = cell_at(start.0, start.1);
    grid.set(sx, sy, Cell::Empty);

    while let Some(&(lx, ly)) = stack.last() {
        let mut neighbours = Vec::with_capacity(4);
        if lx > 0 && !visited[ly * lat_w + lx - 1] {
            neighbours.push((lx - 1, ly));
        }
        if lx + 1 < lat_w && !visited[ly * lat_w + lx + 1] {
            neighbours.push((lx + 1, ly));
        }
        if ly > 0 && !visited[(ly - 1) * lat_w + lx] {
            neighbours.push((lx, ly - 1));
        }
        if ly + 1 < lat_h && !visited[(ly + 1) * lat_w + lx] {
            neighbours.push((lx, ly + 1));
        }
        match neighbours.choose(rng) {
            None => {
                stack.pop();
            }
            Some(&(nx, ny)) => {
                visited[ny * lat_w + nx] = true;
                let (cx, cy) = cell_at(lx, ly);
                let (dx, dy) = cell_at(nx, ny);
                grid.set(dx, dy, Cell::Empty);
                grid.set((cx + dx) / 2, (cy + dy) / 2, Cell::Empty);
                stack.push((nx, ny));
            }
        }
    }

    let agent = place_on_empty(&grid, &[], rng)?;
    let goal = place_on_empty(&grid, &[agent], rng)?;
    let facing = Facing::ALL[rng.gen_range(0..4)];
    Ok(Level {
        payload: LevelPayload::Maze(MazeLevel { grid, agent, facing, goal }),
        seed: rng.next_u64(),
    })
}
