//! Procedural gridworld environments used as the level space for curricula.
//!
//! Three environment families share one [`Level`] container:
//!
//! * [`Maze`](EnvKind::Maze) — partially observable goal-seeking maze with
//!   turn-left / turn-right / forward actions and a sparse, time-discounted
//!   goal reward.
//! * [`FruitChoice`](EnvKind::FruitChoice) — an abstract corridor of locked
//!   rooms ending in a forced choice between two fruits, only one of which
//!   pays out. The paying fruit is aleatoric: it is part of the level, but
//!   no observation ever reveals it.
//! * [`IcyMaze`](EnvKind::IcyMaze) — the maze with hidden per-tile ice that
//!   makes the agent slide one extra cell. Ice is likewise aleatoric and
//!   never observable.
//!
//! Levels are plain data (no behaviour); [`EnvState`] carries the episode
//! dynamics. Everything here is deterministic given the level and the
//! episode seed, which keeps replayed levels bit-reproducible.

mod edit;
pub mod fruit;
mod generate;
mod icy;
pub mod maze;
mod serialize;

pub mod analysis;

pub use edit::{apply_edits, random_edit, EditError, EditOp};
pub use fruit::{fruit_optimal_expected_return, FruitSim};
pub use generate::{
    attach_ice, multi_room_maze, perfect_maze, sample_dr_level, DomainConfig, FruitDomain,
    GenError, IcyDomain, MazeDomain,
};
pub use icy::IcySim;
pub use maze::MazeSim;
pub use serialize::level_from_canonical_json;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which environment family a level belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    Maze,
    FruitChoice,
    IcyMaze,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Maze => "maze",
            EnvKind::FruitChoice => "fruit_choice",
            EnvKind::IcyMaze => "icy_maze",
        }
    }

    /// Size of the discrete action space for this family.
    pub fn action_count(self) -> usize {
        match self {
            EnvKind::Maze | EnvKind::IcyMaze => 3,
            EnvKind::FruitChoice => 4,
        }
    }
}

/// Grid contents. Goal and agent are tracked as positions, not cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Facing {
    North,
    East,
    South,
    West,
}

impl Facing {
    pub const ALL: [Facing; 4] = [Facing::North, Facing::East, Facing::South, Facing::West];

    /// Unit step in grid coordinates (x grows east, y grows south).
    pub fn delta(self) -> (isize, isize) {
        match self {
            Facing::North => (0, -1),
            Facing::East => (1, 0),
            Facing::South => (0, 1),
            Facing::West => (-1, 0),
        }
    }

    pub fn turn_left(self) -> Facing {
        match self {
            Facing::North => Facing::West,
            Facing::West => Facing::South,
            Facing::South => Facing::East,
            Facing::East => Facing::North,
        }
    }

    pub fn turn_right(self) -> Facing {
        match self {
            Facing::North => Facing::East,
            Facing::East => Facing::South,
            Facing::South => Facing::West,
            Facing::West => Facing::North,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Facing::North => 0,
            Facing::East => 1,
            Facing::South => 2,
            Facing::West => 3,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Facing::North => 'N',
            Facing::East => 'E',
            Facing::South => 'S',
            Facing::West => 'W',
        }
    }

    pub fn from_char(c: char) -> Option<Facing> {
        match c {
            'N' => Some(Facing::North),
            'E' => Some(Facing::East),
            'S' => Some(Facing::South),
            'W' => Some(Facing::West),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fruit {
    Apple,
    Banana,
}

impl Fruit {
    pub fn other(self) -> Fruit {
        match self {
            Fruit::Apple => Fruit::Banana,
            Fruit::Banana => Fruit::Apple,
        }
    }
}

/// Rectangular cell grid with a guaranteed wall border.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major, `cells[y * width + x]`.
    pub cells: Vec<Cell>,
}

impl GridSpec {
    /// All-empty interior surrounded by the border wall.
    pub fn open(width: usize, height: usize) -> GridSpec {
        let mut grid = GridSpec {
            width,
            height,
            cells: vec![Cell::Empty; width * height],
        };
        for y in 0..height {
            for x in 0..width {
                if grid.is_border(x, y) {
                    grid.cells[y * width + x] = Cell::Wall;
                }
            }
        }
        grid
    }

    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn get(&self, x: usize, y: usize) -> Cell {
        self.cells[self.idx(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, cell: Cell) {
        let i = self.idx(x, y);
        self.cells[i] = cell;
    }

    pub fn in_bounds(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn is_border(&self, x: usize, y: usize) -> bool {
        x == 0 || y == 0 || x == self.width - 1 || y == self.height - 1
    }

    pub fn is_interior(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && !self.is_border(x, y)
    }

    /// Cell is inside the grid and not a wall.
    pub fn passable(&self, x: isize, y: isize) -> bool {
        self.in_bounds(x, y) && self.get(x as usize, y as usize) == Cell::Empty
    }

    pub fn interior_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (w, h) = (self.width, self.height);
        (1..h.saturating_sub(1)).flat_map(move |y| (1..w.saturating_sub(1)).map(move |x| (x, y)))
    }

    pub fn empty_interior_cells(&self) -> Vec<(usize, usize)> {
        self.interior_cells()
            .filter(|&(x, y)| self.get(x, y) == Cell::Empty)
            .collect()
    }

    pub fn wall_count_interior(&self) -> usize {
        self.interior_cells()
            .filter(|&(x, y)| self.get(x, y) == Cell::Wall)
            .count()
    }
}

/// Maze layout: grid plus agent start pose and goal position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeLevel {
    pub grid: GridSpec,
    pub agent: (usize, usize),
    pub facing: Facing,
    pub goal: (usize, usize),
}

/// FruitChoice layout: a chain of `room_count` locked doors, then the fruit
/// room. `door_kicks[i]` is the number of kicks needed to open door `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FruitLevel {
    pub room_count: u8,
    pub correct_fruit: Fruit,
    pub door_kicks: Vec<u8>,
}

/// IcyMaze layout: maze plus a hidden per-cell ice mask and the rate the
/// mask was drawn at (kept for diagnostics; it never enters observations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcyLevel {
    pub maze: MazeLevel,
    /// Row-major, same indexing as the grid. Wall cells are always `false`.
    pub ice: Vec<bool>,
    pub ice_rate_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LevelPayload {
    Maze(MazeLevel),
    FruitChoice(FruitLevel),
    IcyMaze(IcyLevel),
}

/// A fully specified environment parameterisation. Levels are inert data;
/// identity is content-based (see [`Level::key`]), so two levels that
/// serialise identically are the same level everywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub payload: LevelPayload,
    /// Seed recorded at generation time. Provenance only — dynamics never
    /// read it.
    pub seed: u64,
}

/// Content hash of a level's canonical serialisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelKey(pub u64);

impl LevelKey {
    pub fn hex(self) -> String {
        format!("{:016x}", self.0)
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Level {
    pub fn kind(&self) -> EnvKind {
        match self.payload {
            LevelPayload::Maze(_) => EnvKind::Maze,
            LevelPayload::FruitChoice(_) => EnvKind::FruitChoice,
            LevelPayload::IcyMaze(_) => EnvKind::IcyMaze,
        }
    }

    pub fn maze(&self) -> Option<&MazeLevel> {
        match &self.payload {
            LevelPayload::Maze(m) => Some(m),
            LevelPayload::IcyMaze(i) => Some(&i.maze),
            LevelPayload::FruitChoice(_) => None,
        }
    }

    /// Canonical JSON (stable field order, compact). Round-trips bit-exactly
    /// through [`level_from_canonical_json`].
    pub fn canonical_json(&self) -> String {
        serialize::to_canonical_json(self)
    }

    pub fn key(&self) -> LevelKey {
        LevelKey(fnv1a64(self.canonical_json().as_bytes()))
    }

    pub fn id_hex(&self) -> String {
        self.key().hex()
    }

    /// Structural validity: border walls intact, agent/goal on distinct
    /// empty cells, fruit corridor bounded, ice mask clear of walls.
    pub fn validate(&self) -> Result<(), EnvError> {
        match &self.payload {
            LevelPayload::Maze(m) => validate_maze(m),
            LevelPayload::IcyMaze(i) => {
                validate_maze(&i.maze)?;
                let grid = &i.maze.grid;
                if i.ice.len() != grid.cells.len() {
                    return Err(EnvError::InvalidLevel(
                        "ice mask length does not match grid".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&i.ice_rate_q) || !i.ice_rate_q.is_finite() {
                    return Err(EnvError::InvalidLevel("ice_rate_q outside [0, 1]".into()));
                }
                for (idx, &icy) in i.ice.iter().enumerate() {
                    if icy && grid.cells[idx] == Cell::Wall {
                        return Err(EnvError::InvalidLevel(
                            format!("ice on wall cell {idx}"),
                        ));
                    }
                }
                Ok(())
            }
            LevelPayload::FruitChoice(f) => {
                if f.room_count > 8 {
                    return Err(EnvError::InvalidLevel(format!(
                        "room_count {} exceeds 8",
                        f.room_count
                    )));
                }
                if f.door_kicks.len() != f.room_count as usize {
                    return Err(EnvError::InvalidLevel(
                        "door_kicks length does not match room_count".into(),
                    ));
                }
                if f.door_kicks.iter().any(|&k| k == 0 || k > 3) {
                    return Err(EnvError::InvalidLevel(
                        "door kick counts must lie in 1..=3".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn validate_maze(m: &MazeLevel) -> Result<(), EnvError> {
    let g = &m.grid;
    if g.width < 3 || g.height < 3 {
        return Err(EnvError::InvalidLevel("grid smaller than 3x3".into()));
    }
    if g.cells.len() != g.width * g.height {
        return Err(EnvError::InvalidLevel("cell count does not match size".into()));
    }
    for y in 0..g.height {
        for x in 0..g.width {
            if g.is_border(x, y) && g.get(x, y) != Cell::Wall {
                return Err(EnvError::InvalidLevel(format!("border open at ({x},{y})")));
            }
        }
    }
    if m.agent == m.goal {
        return Err(EnvError::InvalidLevel("agent and goal coincide".into()));
    }
    for (name, (x, y)) in [("agent", m.agent), ("goal", m.goal)] {
        if !g.is_interior(x, y) || g.get(x, y) != Cell::Empty {
            return Err(EnvError::InvalidLevel(format!(
                "{name} not on an empty interior cell: ({x},{y})"
            )));
        }
    }
    Ok(())
}

/// Observation cell codes for maze-family views.
pub mod codes {
    pub const EMPTY: u8 = 0;
    pub const WALL: u8 = 1;
    pub const GOAL: u8 = 2;
    /// Only used in full-grid observations.
    pub const AGENT: u8 = 3;

    pub const PARTIAL_ALPHABET: usize = 3;
    pub const FULL_ALPHABET: usize = 4;
}

/// What the agent sees. Maze-family observations are cell-code tensors; the
/// fruit corridor is abstract and exposes flags instead. Ice and the paying
/// fruit deliberately have no representation here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observation {
    /// `k`-by-`k` egocentric crop, facing "up", agent at the bottom-centre
    /// cell. Row-major in view coordinates; out-of-bounds reads as wall.
    Grid { k: usize, codes: Vec<u8>, facing: Facing },
    /// Whole grid with the agent marked, for the full-observability mode.
    FullGrid {
        width: usize,
        height: usize,
        codes: Vec<u8>,
        facing: Facing,
    },
    Fruit {
        room_index: u8,
        door_open: bool,
        apple_visible: bool,
        banana_visible: bool,
    },
}

/// Highest room index representable in fruit observations (8 doors max, so
/// the fruit room can be index 8).
pub const FRUIT_ROOM_SLOTS: usize = 9;

impl Observation {
    /// Flat one-hot encoding for function approximators.
    pub fn encode(&self) -> Vec<f64> {
        match self {
            Observation::Grid { k, codes: cs, facing } => {
                let mut v = vec![0.0; k * k * codes::PARTIAL_ALPHABET + 4];
                for (i, &c) in cs.iter().enumerate() {
                    v[i * codes::PARTIAL_ALPHABET + c as usize] = 1.0;
                }
                v[k * k * codes::PARTIAL_ALPHABET + facing.index()] = 1.0;
                v
            }
            Observation::FullGrid { width, height, codes: cs, facing } => {
                let n = width * height;
                let mut v = vec![0.0; n * codes::FULL_ALPHABET + 4];
                for (i, &c) in cs.iter().enumerate() {
                    v[i * codes::FULL_ALPHABET + c as usize] = 1.0;
                }
                v[n * codes::FULL_ALPHABET + facing.index()] = 1.0;
                v
            }
            Observation::Fruit {
                room_index,
                door_open,
                apple_visible,
                banana_visible,
            } => {
                let mut v = vec![0.0; FRUIT_ROOM_SLOTS + 3];
                v[*room_index as usize] = 1.0;
                v[FRUIT_ROOM_SLOTS] = f64::from(*door_open);
                v[FRUIT_ROOM_SLOTS + 1] = f64::from(*apple_visible);
                v[FRUIT_ROOM_SLOTS + 2] = f64::from(*banana_visible);
                v
            }
        }
    }

    /// Length of [`Observation::encode`]'s output for a given family/mode.
    pub fn encoded_len(kind: EnvKind, mode: ObsMode, width: usize, height: usize) -> usize {
        match (kind, mode) {
            (EnvKind::FruitChoice, _) => FRUIT_ROOM_SLOTS + 3,
            (_, ObsMode::Egocentric { k }) => k * k * codes::PARTIAL_ALPHABET + 4,
            (_, ObsMode::FullGrid) => width * height * codes::FULL_ALPHABET + 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsMode {
    /// Egocentric forward crop of side length `k` (odd).
    Egocentric { k: usize },
    FullGrid,
}

impl Default for ObsMode {
    fn default() -> Self {
        ObsMode::Egocentric { k: 5 }
    }
}

/// Per-episode environment settings. These are domain-level knobs, not part
/// of the level itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub obs: ObsMode,
    pub t_max: usize,
    /// Payout for eating the correct apple / banana in FruitChoice.
    pub fruit_rewards: (f64, f64),
}

impl EnvConfig {
    pub fn default_for(kind: EnvKind) -> EnvConfig {
        EnvConfig {
            obs: ObsMode::default(),
            t_max: match kind {
                EnvKind::Maze | EnvKind::IcyMaze => 250,
                EnvKind::FruitChoice => 100,
            },
            fruit_rewards: (3.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepInfo {
    pub reached_goal: bool,
    pub ate: Option<Fruit>,
    /// Cells the agent newly occupied this step (movement target, plus the
    /// slide cell on ice). Used as contact evidence by belief models.
    pub contacted: Vec<(usize, usize)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("episode already finished")]
    EpisodeDone,
    #[error("action {0} out of range for this environment")]
    InvalidAction(usize),
}

/// Live episode state for any environment family.
#[derive(Debug, Clone)]
pub enum EnvState {
    Maze(MazeSim),
    Fruit(FruitSim),
    Icy(IcySim),
}

impl EnvState {
    /// Start an episode on `level`. The seed is part of the episode contract
    /// (reserved for stochastic dynamics); the shipped families are
    /// deterministic, so equal seeds trivially reproduce equal episodes.
    pub fn reset(level: &Level, cfg: EnvConfig, episode_seed: u64) -> Result<(EnvState, Observation), EnvError> {
        level.validate()?;
        let _ = episode_seed;
        match &level.payload {
            LevelPayload::Maze(m) => {
                let sim = MazeSim::new(m.clone(), cfg);
                let obs = sim.observe();
                Ok((EnvState::Maze(sim), obs))
            }
            LevelPayload::FruitChoice(f) => {
                let sim = FruitSim::new(f.clone(), cfg);
                let obs = sim.observe();
                Ok((EnvState::Fruit(sim), obs))
            }
            LevelPayload::IcyMaze(i) => {
                let sim = IcySim::new(i.clone(), cfg);
                let obs = sim.observe();
                Ok((EnvState::Icy(sim), obs))
            }
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        match self {
            EnvState::Maze(s) => s.step(action),
            EnvState::Fruit(s) => s.step(action),
            EnvState::Icy(s) => s.step(action),
        }
    }

    pub fn observe(&self) -> Observation {
        match self {
            EnvState::Maze(s) => s.observe(),
            EnvState::Fruit(s) => s.observe(),
            EnvState::Icy(s) => s.observe(),
        }
    }

    pub fn done(&self) -> bool {
        match self {
            EnvState::Maze(s) => s.done,
            EnvState::Fruit(s) => s.done,
            EnvState::Icy(s) => s.done(),
        }
    }

    pub fn steps_taken(&self) -> usize {
        match self {
            EnvState::Maze(s) => s.t,
            EnvState::Fruit(s) => s.t,
            EnvState::Icy(s) => s.steps_taken(),
        }
    }

    pub fn agent_pos(&self) -> Option<(usize, usize)> {
        match self {
            EnvState::Maze(s) => Some(s.agent),
            EnvState::Icy(s) => Some(s.agent_pos()),
            EnvState::Fruit(_) => None,
        }
    }
}

/// Sparse maze reward: reaching the goal at step `t` (1-based, counting the
/// terminating step) pays `1 - 0.9 * t / t_max`; everything else pays 0.
pub fn maze_goal_reward(t: usize, t_max: usize) -> f64 {
    1.0 - 0.9 * (t as f64) / (t_max as f64)
}
