//! Small mutations over levels, the raw material for evolutionary
//! curricula. Edits are conservative: anything that cannot apply cleanly is
//! a no-op rather than an error, except for structurally impossible targets
//! (out of bounds, border cells, wrong family), which are rejected.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::generate::place_on_empty;
use super::{Cell, EnvKind, Level, LevelPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EditOp {
    AddWall { x: usize, y: usize },
    RemoveWall { x: usize, y: usize },
    MoveGoal { x: usize, y: usize },
    ToggleIce { x: usize, y: usize },
    FlipFruit,
    AddRoom,
    RemoveRoom,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
}

fn grid_target(level: &Level, x: usize, y: usize) -> Result<(), EditError> {
    let m = level
        .maze()
        .ok_or_else(|| EditError::InvalidEdit("grid edit on a gridless level".into()))?;
    if x >= m.grid.width || y >= m.grid.height {
        return Err(EditError::InvalidEdit(format!("cell ({x},{y}) out of bounds")));
    }
    if m.grid.is_border(x, y) {
        return Err(EditError::InvalidEdit(format!("cell ({x},{y}) is on the border")));
    }
    Ok(())
}

/// Apply a batch of edits to a copy of `level`. Entities buried by a new
/// wall are relocated to uniform-random empty cells only after the whole
/// batch has been applied, so intermediate states may be inconsistent but
/// the result is always a valid level.
pub fn apply_edits(level: &Level, ops: &[EditOp], rng: &mut ChaCha8Rng) -> Result<Level, EditError> {
    let mut out = level.clone();
    let mut relocate_agent = false;
    let mut relocate_goal = false;

    for &op in ops {
        match op {
            EditOp::AddWall { x, y } => {
                grid_target(level, x, y)?;
                let (maze, ice) = grid_parts(&mut out);
                if maze.grid.get(x, y) == Cell::Empty {
                    maze.grid.set(x, y, Cell::Wall);
                    if let Some(ice) = ice {
                        ice[y * maze.grid.width + x] = false;
                    }
                    if maze.agent == (x, y) {
                        relocate_agent = true;
                    }
                    if maze.goal == (x, y) {
                        relocate_goal = true;
                    }
                }
            }
            EditOp::RemoveWall { x, y } => {
                grid_target(level, x, y)?;
                let (maze, _) = grid_parts(&mut out);
                if maze.grid.get(x, y) == Cell::Wall {
                    maze.grid.set(x, y, Cell::Empty);
                }
            }
            EditOp::MoveGoal { x, y } => {
                grid_target(level, x, y)?;
                let (maze, _) = grid_parts(&mut out);
                if maze.grid.get(x, y) == Cell::Empty && maze.agent != (x, y) {
                    maze.goal = (x, y);
                    relocate_goal = false;
                }
            }
            EditOp::ToggleIce { x, y } => {
                if level.kind() != EnvKind::IcyMaze {
                    return Err(EditError::InvalidEdit("ToggleIce outside IcyMaze".into()));
                }
                grid_target(level, x, y)?;
                let (maze, ice) = grid_parts(&mut out);
                if maze.grid.get(x, y) == Cell::Empty {
                    let idx = y * maze.grid.width + x;
                    let ice = ice.expect("icy level has a mask");
                    ice[idx] = !ice[idx];
                }
            }
            EditOp::FlipFruit | EditOp::AddRoom | EditOp::RemoveRoom => {
                let LevelPayload::FruitChoice(f) = &mut out.payload else {
                    return Err(EditError::InvalidEdit("fruit edit outside FruitChoice".into()));
                };
                match op {
                    EditOp::FlipFruit => f.correct_fruit = f.correct_fruit.other(),
                    EditOp::AddRoom => {
                        if f.room_count < 8 {
                            f.room_count += 1;
                            f.door_kicks.push(rng.gen_range(1..=3));
                        }
                    }
                    _ => {
                        if f.room_count > 0 {
                            f.room_count -= 1;
                            f.door_kicks.pop();
                        }
                    }
                }
            }
        }
    }

    if relocate_goal || relocate_agent {
        let (maze, _) = grid_parts(&mut out);
        if relocate_goal {
            let taken = [maze.agent];
            maze.goal = place_on_empty(&maze.grid, if relocate_agent { &[] } else { &taken }, rng)
                .map_err(|e| EditError::InvalidEdit(e.to_string()))?;
        }
        if relocate_agent {
            let taken = [maze.goal];
            maze.agent = place_on_empty(&maze.grid, &taken, rng)
                .map_err(|e| EditError::InvalidEdit(e.to_string()))?;
        }
    }

    out.validate()
        .map_err(|e| EditError::InvalidEdit(format!("edit produced invalid level: {e}")))?;
    Ok(out)
}

fn grid_parts(level: &mut Level) -> (&mut super::MazeLevel, Option<&mut Vec<bool>>) {
    match &mut level.payload {
        LevelPayload::Maze(m) => (m, None),
        LevelPayload::IcyMaze(i) => (&mut i.maze, Some(&mut i.ice)),
        LevelPayload::FruitChoice(_) => unreachable!("checked by callers"),
    }
}

/// Draw one random edit applicable to this level family.
pub fn random_edit(level: &Level, rng: &mut ChaCha8Rng) -> EditOp {
    match level.kind() {
        EnvKind::FruitChoice => match rng.gen_range(0..3) {
            0 => EditOp::FlipFruit,
            1 => EditOp::AddRoom,
            _ => EditOp::RemoveRoom,
        },
        kind => {
            let m = level.maze().expect("grid family");
            let x = rng.gen_range(1..m.grid.width - 1);
            let y = rng.gen_range(1..m.grid.height - 1);
            let ops = if kind == EnvKind::IcyMaze { 4 } else { 3 };
            match rng.gen_range(0..ops) {
                0 => EditOp::AddWall { x, y },
                1 => EditOp::RemoveWall { x, y },
                2 => EditOp::MoveGoal { x, y },
                _ => EditOp::ToggleIce { x, y },
            }
        }
    }
}
