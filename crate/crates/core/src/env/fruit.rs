//! FruitChoice: an abstract corridor of kick-to-open doors ending in a
//! two-fruit choice. Which fruit pays is part of the level but never
//! observable, which makes it the canonical aleatoric parameter for
//! grounding experiments.

use super::{EnvConfig, EnvError, Fruit, FruitLevel, Observation, StepInfo, StepResult};

pub const ACT_KICK: usize = 0;
pub const ACT_ADVANCE: usize = 1;
pub const ACT_EAT_APPLE: usize = 2;
pub const ACT_EAT_BANANA: usize = 3;

#[derive(Debug, Clone)]
pub struct FruitSim {
    pub level: FruitLevel,
    pub cfg: EnvConfig,
    /// Rooms passed so far; equals `room_count` once in the fruit room.
    pub room_index: u8,
    /// Kicks still needed on the door out of the current room.
    pub kicks_left: u8,
    pub t: usize,
    pub done: bool,
}

impl FruitSim {
    pub fn new(level: FruitLevel, cfg: EnvConfig) -> FruitSim {
        let kicks_left = level.door_kicks.first().copied().unwrap_or(0);
        FruitSim { level, cfg, room_index: 0, kicks_left, t: 0, done: false }
    }

    fn in_fruit_room(&self) -> bool {
        self.room_index == self.level.room_count
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if action > ACT_EAT_BANANA {
            return Err(EnvError::InvalidAction(action));
        }
        self.t += 1;
        let mut info = StepInfo::default();
        let mut reward = 0.0;

        match action {
            ACT_KICK => {
                if !self.in_fruit_room() && self.kicks_left > 0 {
                    self.kicks_left -= 1;
                }
            }
            ACT_ADVANCE => {
                if !self.in_fruit_room() && self.kicks_left == 0 {
                    self.room_index += 1;
                    self.kicks_left = if self.in_fruit_room() {
                        0
                    } else {
                        self.level.door_kicks[self.room_index as usize]
                    };
                }
            }
            _ => {
                if self.in_fruit_room() {
                    let fruit = if action == ACT_EAT_APPLE { Fruit::Apple } else { Fruit::Banana };
                    info.ate = Some(fruit);
                    if fruit == self.level.correct_fruit {
                        reward = match fruit {
                            Fruit::Apple => self.cfg.fruit_rewards.0,
                            Fruit::Banana => self.cfg.fruit_rewards.1,
                        };
                    }
                    self.done = true;
                }
            }
        }

        if !self.done && self.t >= self.cfg.t_max {
            self.done = true;
        }

        Ok(StepResult { obs: self.observe(), reward, done: self.done, info })
    }

    pub fn observe(&self) -> Observation {
        Observation::Fruit {
            room_index: self.room_index,
            door_open: !self.in_fruit_room() && self.kicks_left == 0,
            apple_visible: self.in_fruit_room(),
            banana_visible: self.in_fruit_room(),
        }
    }
}

/// Expected return of the best fixed fruit choice when the paying fruit is
/// apple with probability `q`: the better of "always apple" and "always
/// banana".
pub fn fruit_optimal_expected_return(q: f64, r_a: f64, r_b: f64) -> f64 {
    (q * r_a).max((1.0 - q) * r_b)
}
