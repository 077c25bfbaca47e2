//! Layout analysis: path lengths, block counts, and dynamics-aware
//! solvability. These drive complexity logging and curriculum diagnostics.

use std::collections::VecDeque;

use super::{EnvConfig, EnvState, Level, LevelPayload};

/// Length in moves of the shortest agent-to-goal path, treating the level
/// as a plain 4-connected grid (turn costs and ice ignored). Returns 0 when
/// the goal is unreachable. For FruitChoice the analogue is the optimal
/// action-script length: all kicks, the advances, and the final eat.
pub fn shortest_path_length(level: &Level) -> usize {
    match &level.payload {
        LevelPayload::FruitChoice(f) => {
            f.door_kicks.iter().map(|&k| k as usize).sum::<usize>() + f.room_count as usize + 1
        }
        _ => {
            let m = level.maze().expect("grid family");
            let g = &m.grid;
            let mut dist = vec![usize::MAX; g.cells.len()];
            let mut queue = VecDeque::new();
            dist[g.idx(m.agent.0, m.agent.1)] = 0;
            queue.push_back(m.agent);
            while let Some((x, y)) = queue.pop_front() {
                let d = dist[g.idx(x, y)];
                if (x, y) == m.goal {
                    return d;
                }
                for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if g.passable(nx, ny) {
                        let ni = g.idx(nx as usize, ny as usize);
                        if dist[ni] == usize::MAX {
                            dist[ni] = d + 1;
                            queue.push_back((nx as usize, ny as usize));
                        }
                    }
                }
            }
            0
        }
    }
}

/// Interior wall count; 0 for gridless levels.
pub fn block_count(level: &Level) -> usize {
    level.maze().map_or(0, |m| m.grid.wall_count_interior())
}

/// Dynamics-aware solvability: breadth-first search over (position, facing)
/// using the real step function, bounded by the step budget. Unlike
/// [`shortest_path_length`] this respects ice slides, so it is the ground
/// truth for "some action sequence reaches the goal".
pub fn solvable_within(level: &Level, cfg: EnvConfig) -> bool {
    match &level.payload {
        LevelPayload::FruitChoice(f) => {
            shortest_path_length(level) <= cfg.t_max && f.room_count <= 8
        }
        _ => {
            let m = level.maze().expect("grid family");
            let g = &m.grid;
            let state_count = g.cells.len() * 4;
            let key = |env: &EnvState| -> usize {
                let (x, y) = env.agent_pos().expect("grid family");
                let f = match env {
                    EnvState::Maze(s) => s.facing,
                    EnvState::Icy(s) => s.facing(),
                    EnvState::Fruit(_) => unreachable!(),
                };
                (y * g.width + x) * 4 + f.index()
            };
            let Ok((start, _)) = EnvState::reset(level, cfg, 0) else {
                return false;
            };
            let mut best = vec![usize::MAX; state_count];
            best[key(&start)] = 0;
            let mut queue = VecDeque::new();
            queue.push_back(start);
            while let Some(env) = queue.pop_front() {
                let depth = best[key(&env)];
                if depth >= cfg.t_max {
                    continue;
                }
                for action in 0..3 {
                    let mut next = env.clone();
                    let r = next.step(action).expect("in-range action on live episode");
                    if r.info.reached_goal {
                        return true;
                    }
                    if r.done {
                        continue;
                    }
                    let k = key(&next);
                    if best[k] > depth + 1 {
                        best[k] = depth + 1;
                        queue.push_back(next);
                    }
                }
            }
            false
        }
    }
}

/// Mean shortest-path length and mean block count over a set of levels.
/// Used for per-iteration buffer complexity columns.
pub fn mean_complexity<'a>(levels: impl Iterator<Item = &'a Level>) -> (f64, f64) {
    let mut n = 0usize;
    let mut path = 0usize;
    let mut blocks = 0usize;
    for lvl in levels {
        n += 1;
        path += shortest_path_length(lvl);
        blocks += block_count(lvl);
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (path as f64 / n as f64, blocks as f64 / n as f64)
    }
}
