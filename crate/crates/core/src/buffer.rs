//! The level replay buffer: a bounded store of visited levels with scores
//! and staleness timestamps.
//!
//! Sampling mixes a score-prioritised distribution P_S with a staleness
//! distribution P_C:  P_replay = (1 - rho) * P_S + rho * P_C.  Rank
//! prioritisation is the default: entries are ranked by score (descending,
//! ties by insertion order) and weighted by (1/rank)^(1/beta). When the
//! buffer is full, a candidate level replaces the minimum-support entry only
//! if that entry's score is strictly lower — so the buffer's score floor
//! never drops.

use crate::env::{Level, LevelKey};
use crate::scoring::ScoreKind;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prioritization {
    Rank,
    Proportional,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "p")]
pub enum ReplayRate {
    /// Replay with fixed probability p.
    Fixed(f64),
    /// P(replay) = seen levels / train set size; only meaningful on finite
    /// training sets.
    Anneal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub capacity: usize,
    /// Temperature beta applied as weight^(1/beta).
    pub temperature: f64,
    /// Staleness mixture coefficient rho in [0, 1].
    pub staleness_coef: f64,
    pub prioritization: Prioritization,
    pub replay_rate: ReplayRate,
    pub score_kind: ScoreKind,
}

impl Default for ReplayConfig {
    fn default() -> ReplayConfig {
        ReplayConfig {
            capacity: 128,
            temperature: 0.1,
            staleness_coef: 0.3,
            prioritization: Prioritization::Rank,
            replay_rate: ReplayRate::Fixed(0.5),
            score_kind: ScoreKind::Pvl,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.capacity == 0 {
            return Err("replay buffer capacity must be positive".into());
        }
        if !(self.temperature > 0.0) {
            return Err("temperature must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.staleness_coef) {
            return Err("staleness_coef must lie in [0, 1]".into());
        }
        if let ReplayRate::Fixed(p) = self.replay_rate {
            if !(0.0..=1.0).contains(&p) {
                return Err("replay rate must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BufferEntry {
    pub level: Level,
    pub key: LevelKey,
    /// Latest score S_i.
    pub score: f64,
    /// Episode counter C_i at the last visit.
    pub timestamp: u64,
    /// Highest undiscounted return ever achieved on this level.
    pub max_return: f64,
    pub visit_count: u64,
    /// Monotone insertion sequence; breaks rank ties deterministically.
    pub insert_seq: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BufferError {
    #[error("replay buffer is empty")]
    EmptyBuffer,
}

/// What `update` did with the candidate level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateOutcome {
    Inserted,
    /// Level was already present; score/timestamp refreshed in place.
    Updated,
    Replaced { evicted: LevelKey },
    /// Buffer full and the candidate scored no higher than the
    /// minimum-support entry.
    Rejected,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelBuffer {
    cfg: ReplayConfig,
    entries: Vec<BufferEntry>,
    #[serde(skip)]
    index: HashMap<LevelKey, usize>,
    next_seq: u64,
}

impl LevelBuffer {
    pub fn new(cfg: ReplayConfig) -> LevelBuffer {
        LevelBuffer { cfg, entries: Vec::new(), index: HashMap::new(), next_seq: 0 }
    }

    /// Rebuild the key index (needed after deserialisation).
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.key, i))
            .collect();
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    pub fn get(&self, key: LevelKey) -> Option<&BufferEntry> {
        self.index.get(&key).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, key: LevelKey) -> bool {
        self.index.contains_key(&key)
    }

    pub fn min_score(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.score).fold(None, |m, s| {
            Some(match m {
                None => s,
                Some(m) => m.min(s),
            })
        })
    }

    /// Score-prioritised distribution P_S over the current entries.
    fn score_distribution(&self) -> Vec<f64> {
        let n = self.entries.len();
        let inv_beta = 1.0 / self.cfg.temperature;
        match self.cfg.prioritization {
            Prioritization::Rank => {
                // Rank 1 = highest score; ties broken by insertion order.
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    let ea = &self.entries[a];
                    let eb = &self.entries[b];
                    eb.score
                        .partial_cmp(&ea.score)
                        .unwrap()
                        .then(ea.insert_seq.cmp(&eb.insert_seq))
                });
                let mut w = vec![0.0; n];
                for (rank0, &i) in order.iter().enumerate() {
                    w[i] = (1.0 / (rank0 + 1) as f64).powf(inv_beta);
                }
                normalize(w)
            }
            Prioritization::Proportional => {
                // Scores may be negative (GAE-style kinds); shift so the
                // minimum sits just above zero before tempering.
                let min = self.entries.iter().map(|e| e.score).fold(f64::INFINITY, f64::min);
                let w: Vec<f64> = self
                    .entries
                    .iter()
                    .map(|e| (e.score - min + 1e-8).powf(inv_beta))
                    .collect();
                normalize(w)
            }
            Prioritization::Greedy => {
                let mut best = 0;
                for i in 1..n {
                    if self.entries[i].score > self.entries[best].score {
                        best = i;
                    }
                }
                let mut w = vec![0.0; n];
                w[best] = 1.0;
                w
            }
        }
    }

    /// Staleness distribution P_C; uniform when every entry is fresh.
    fn staleness_distribution(&self, c: u64) -> Vec<f64> {
        let w: Vec<f64> = self
            .entries
            .iter()
            .map(|e| c.saturating_sub(e.timestamp) as f64)
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            vec![1.0 / self.entries.len() as f64; self.entries.len()]
        } else {
            normalize(w)
        }
    }

    /// P_replay = (1 - rho) P_S + rho P_C at global episode count `c`.
    pub fn replay_distribution(&self, c: u64) -> Result<Vec<f64>, BufferError> {
        if self.entries.is_empty() {
            return Err(BufferError::EmptyBuffer);
        }
        let ps = self.score_distribution();
        let pc = self.staleness_distribution(c);
        let rho = self.cfg.staleness_coef;
        Ok(ps
            .iter()
            .zip(&pc)
            .map(|(s, st)| (1.0 - rho) * s + rho * st)
            .collect())
    }

    /// Sample an entry index from P_replay.
    pub fn sample_replay(&self, c: u64, rng: &mut ChaCha8Rng) -> Result<usize, BufferError> {
        let p = self.replay_distribution(c)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return Ok(i);
            }
        }
        Ok(p.len() - 1)
    }

    /// Visit bookkeeping + the replacement rule: insert below capacity;
    /// otherwise replace the minimum-support entry only when it scores
    /// strictly lower than the candidate.
    pub fn update(
        &mut self,
        level: &Level,
        score: f64,
        episode_return: f64,
        c: u64,
    ) -> UpdateOutcome {
        assert!(score.is_finite(), "level scores must be finite");
        let key = level.key();
        if let Some(&i) = self.index.get(&key) {
            let e = &mut self.entries[i];
            e.score = score;
            e.timestamp = c;
            e.visit_count += 1;
            e.max_return = e.max_return.max(episode_return);
            return UpdateOutcome::Updated;
        }
        let entry = BufferEntry {
            level: level.clone(),
            key,
            score,
            timestamp: c,
            max_return: episode_return,
            visit_count: 1,
            insert_seq: self.next_seq,
        };
        if self.entries.len() < self.cfg.capacity {
            self.next_seq += 1;
            self.index.insert(key, self.entries.len());
            self.entries.push(entry);
            return UpdateOutcome::Inserted;
        }
        // Full: find the minimum-support entry under the current P_replay.
        let p = self
            .replay_distribution(c)
            .expect("full buffer is never empty");
        let mut min_i = 0;
        for i in 1..p.len() {
            if p[i] < p[min_i] {
                min_i = i;
            }
        }
        if self.entries[min_i].score < score {
            let evicted = self.entries[min_i].key;
            self.index.remove(&evicted);
            self.next_seq += 1;
            self.index.insert(key, min_i);
            self.entries[min_i] = entry;
            UpdateOutcome::Replaced { evicted }
        } else {
            UpdateOutcome::Rejected
        }
    }

    /// Record the return observed for a level already in the buffer without
    /// touching its score (used when a level is evaluated but not rescored).
    pub fn note_return(&mut self, key: LevelKey, episode_return: f64) {
        if let Some(&i) = self.index.get(&key) {
            let e = &mut self.entries[i];
            e.max_return = e.max_return.max(episode_return);
        }
    }

    /// Replay decision d: true means "replay an existing level". Always
    /// false on an empty buffer. Anneal mode ramps with coverage of a
    /// finite training set; otherwise Bernoulli(p).
    pub fn replay_decision(
        &self,
        seen_count: usize,
        train_set_size: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        if self.entries.is_empty() {
            return false;
        }
        let p = match (self.cfg.replay_rate, train_set_size) {
            (ReplayRate::Anneal, Some(total)) if total > 0 => seen_count as f64 / total as f64,
            (ReplayRate::Anneal, _) => 0.5, // degenerate: no finite set to anneal over
            (ReplayRate::Fixed(p), _) => p,
        };
        rng.gen::<f64>() < p
    }
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        let n = w.len() as f64;
        return vec![1.0 / n; w.len()];
    }
    w.iter_mut().for_each(|x| *x /= sum);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DomainConfig, MazeDomain};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn some_levels(n: usize) -> Vec<Level> {
        let dom = DomainConfig::Maze(MazeDomain::default());
        let mut r = rng(1000);
        (0..n).map(|_| crate::env::sample_dr_level(&dom, &mut r).unwrap()).collect()
    }

    fn cfg(capacity: usize, prio: Prioritization, beta: f64, rho: f64) -> ReplayConfig {
        ReplayConfig {
            capacity,
            temperature: beta,
            staleness_coef: rho,
            prioritization: prio,
            replay_rate: ReplayRate::Fixed(0.5),
            score_kind: ScoreKind::L1ValueLoss,
        }
    }

    #[test]
    fn rank_distribution_matches_hand_computation() {
        let levels = some_levels(3);
        let mut buf = LevelBuffer::new(cfg(8, Prioritization::Rank, 1.0, 0.0));
        for (l, s) in levels.iter().zip([0.3, 0.1, 0.2]) {
            buf.update(l, s, 0.0, 0);
        }
        let p = buf.replay_distribution(0).unwrap();
        // Ranks: 0.3 -> 1, 0.2 -> 2, 0.1 -> 3; weights 1, 1/2, 1/3.
        let expect = [6.0 / 11.0, 2.0 / 11.0, 3.0 / 11.0];
        for (a, b) in p.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn staleness_mixture_matches_hand_computation() {
        let levels = some_levels(3);
        let mut buf = LevelBuffer::new(cfg(8, Prioritization::Rank, 1.0, 1.0));
        for (l, ts) in levels.iter().zip([5u64, 3, 2]) {
            buf.update(l, 0.5, 0.0, ts);
        }
        // rho = 1: pure staleness. c = 5 -> staleness [0, 2, 3].
        let p = buf.replay_distribution(5).unwrap();
        let expect = [0.0, 0.4, 0.6];
        for (a, b) in p.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn mixture_is_convex_combination() {
        let levels = some_levels(2);
        let mut buf = LevelBuffer::new(cfg(8, Prioritization::Greedy, 1.0, 0.5));
        buf.update(&levels[0], 1.0, 0.0, 0); // greedy max -> P_S = [1, 0]
        buf.update(&levels[1], 0.5, 0.0, 0);
        // c chosen so staleness = [4, 0]... wait, both at ts 0; use ts 0 and 4.
        let p = buf.replay_distribution(0).unwrap();
        // All staleness zero -> P_C uniform [0.5, 0.5]; mix with [1, 0]:
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn pure_mixture_of_onehots() {
        // rho = 0.5, P_S = [1,0], P_C = [0,1] -> [0.5, 0.5].
        let levels = some_levels(2);
        let mut buf = LevelBuffer::new(cfg(8, Prioritization::Greedy, 1.0, 0.5));
        buf.update(&levels[0], 1.0, 0.0, 0);
        buf.update(&levels[1], 0.5, 0.0, 4); // fresher but lower-scored
        // c = 4: staleness [4, 0] -> P_C = [1, 0]? No: entry 0 is stale.
        // Build the advertised case instead: greedy max on entry 0, entry 1
        // carries all staleness -> need staleness on entry 1 only.
        let mut buf2 = LevelBuffer::new(cfg(8, Prioritization::Greedy, 1.0, 0.5));
        buf2.update(&levels[0], 1.0, 0.0, 4); // fresh, max score -> P_S=[1,0]
        buf2.update(&levels[1], 0.5, 0.0, 0); // stale -> P_C=[0,1]
        let p = buf2.replay_distribution(4).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        drop(buf);
    }

    #[test]
    fn empty_buffer_errors_and_never_replays() {
        let buf = LevelBuffer::new(cfg(4, Prioritization::Rank, 1.0, 0.3));
        assert_eq!(buf.replay_distribution(0), Err(BufferError::EmptyBuffer));
        let mut r = rng(2);
        for _ in 0..100 {
            assert!(!buf.replay_decision(100, Some(100), &mut r));
        }
    }

    #[test]
    fn capacity_is_respected_and_replacement_needs_higher_score() {
        let levels = some_levels(3);
        let mut buf = LevelBuffer::new(cfg(2, Prioritization::Rank, 1.0, 0.0));
        assert_eq!(buf.update(&levels[0], 0.9, 0.0, 0), UpdateOutcome::Inserted);
        assert_eq!(buf.update(&levels[1], 0.1, 0.0, 1), UpdateOutcome::Inserted);
        assert_eq!(buf.len(), 2);
        // Candidate 0.05 < min-support score 0.1 -> rejected.
        assert_eq!(buf.update(&levels[2], 0.05, 0.0, 2), UpdateOutcome::Rejected);
        assert!(buf.contains(levels[1].key()));
        // Candidate 0.5 > 0.1 -> replaces the weakest entry.
        let out = buf.update(&levels[2], 0.5, 0.0, 3);
        assert_eq!(out, UpdateOutcome::Replaced { evicted: levels[1].key() });
        assert_eq!(buf.len(), 2);
        let e = buf.get(levels[2].key()).unwrap();
        assert_eq!(e.timestamp, 3);
    }

    #[test]
    fn revisit_updates_in_place() {
        let levels = some_levels(1);
        let mut buf = LevelBuffer::new(cfg(4, Prioritization::Rank, 1.0, 0.0));
        buf.update(&levels[0], 0.2, 0.7, 0);
        assert_eq!(buf.update(&levels[0], 0.6, 0.3, 5), UpdateOutcome::Updated);
        let e = buf.get(levels[0].key()).unwrap();
        assert_eq!(buf.len(), 1);
        assert_eq!(e.score, 0.6);
        assert_eq!(e.timestamp, 5);
        assert_eq!(e.visit_count, 2);
        assert!((e.max_return - 0.7).abs() < 1e-15, "max return keeps the best episode");
    }

    #[test]
    fn greedy_is_one_hot_first_max() {
        let levels = some_levels(3);
        let mut buf = LevelBuffer::new(cfg(8, Prioritization::Greedy, 1.0, 0.0));
        buf.update(&levels[0], 0.4, 0.0, 0);
        buf.update(&levels[1], 0.9, 0.0, 0);
        buf.update(&levels[2], 0.9, 0.0, 0); // tie: first max wins
        let p = buf.replay_distribution(0).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn proportional_handles_negative_scores() {
        let levels = some_levels(2);
        let mut buf = LevelBuffer::new(cfg(8, Prioritization::Proportional, 1.0, 0.0));
        buf.update(&levels[0], -2.0, 0.0, 0);
        buf.update(&levels[1], -1.0, 0.0, 0);
        let p = buf.replay_distribution(0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p[1] > p[0], "higher (less negative) score dominates: {p:?}");
        assert!(p[0] > 0.0, "shifted minimum keeps positive mass");
    }

    #[test]
    fn temperature_flattens_rank_weights() {
        let levels = some_levels(3);
        let sharp = {
            let mut b = LevelBuffer::new(cfg(8, Prioritization::Rank, 0.5, 0.0));
            for (l, s) in levels.iter().zip([0.3, 0.2, 0.1]) {
                b.update(l, s, 0.0, 0);
            }
            b.replay_distribution(0).unwrap()
        };
        let flat = {
            let mut b = LevelBuffer::new(cfg(8, Prioritization::Rank, 4.0, 0.0));
            for (l, s) in levels.iter().zip([0.3, 0.2, 0.1]) {
                b.update(l, s, 0.0, 0);
            }
            b.replay_distribution(0).unwrap()
        };
        assert!(sharp[0] > flat[0], "low beta concentrates mass on rank 1");
        assert!(sharp[2] < flat[2]);
    }

    #[test]
    fn anneal_mode_tracks_coverage() {
        let levels = some_levels(1);
        let mut buf = LevelBuffer::new(ReplayConfig {
            replay_rate: ReplayRate::Anneal,
            ..cfg(4, Prioritization::Rank, 1.0, 0.0)
        });
        buf.update(&levels[0], 0.5, 0.0, 0);
        let mut r = rng(3);
        for _ in 0..50 {
            assert!(!buf.replay_decision(0, Some(100), &mut r), "nothing seen -> never replay");
        }
        for _ in 0..50 {
            assert!(buf.replay_decision(100, Some(100), &mut r), "full coverage -> always replay");
        }
    }

    #[test]
    fn fixed_rate_monte_carlo() {
        let levels = some_levels(1);
        let mut buf = LevelBuffer::new(cfg(4, Prioritization::Rank, 1.0, 0.0));
        buf.update(&levels[0], 0.5, 0.0, 0);
        let mut r = rng(4);
        let hits = (0..10_000)
            .filter(|_| buf.replay_decision(0, None, &mut r))
            .count();
        let frac = hits as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "replay fraction {frac}");
    }

    #[test]
    fn distributions_always_sum_to_one() {
        let levels = some_levels(12);
        for prio in [Prioritization::Rank, Prioritization::Proportional, Prioritization::Greedy] {
            let mut buf = LevelBuffer::new(cfg(6, prio, 0.3, 0.4));
            let mut r = rng(5);
            for (i, l) in levels.iter().enumerate() {
                buf.update(l, r.gen_range(-3.0..3.0), r.gen_range(0.0..1.0), i as u64);
                assert!(buf.len() <= 6);
                let p = buf.replay_distribution(i as u64 + 1).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(p.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn min_score_never_decreases_on_replacement() {
        let levels = some_levels(40);
        let mut buf = LevelBuffer::new(cfg(5, Prioritization::Rank, 1.0, 0.2));
        let mut r = rng(6);
        let mut last_min: Option<f64> = None;
        for (i, l) in levels.iter().enumerate() {
            let s = r.gen_range(-1.0..1.0);
            let out = buf.update(l, s, 0.0, i as u64);
            if let UpdateOutcome::Replaced { .. } = out {
                let new_min = buf.min_score().unwrap();
                if let Some(prev) = last_min {
                    assert!(new_min >= prev - 1e-12, "min dropped {prev} -> {new_min}");
                }
            }
            if buf.len() == 5 {
                last_min = buf.min_score();
            }
        }
    }

    #[test]
    fn rank_distribution_invariant_under_monotone_transforms() {
        let levels = some_levels(6);
        let scores = [0.3, -0.7, 1.2, 0.3, 0.0, 2.5];
        let build = |f: &dyn Fn(f64) -> f64| {
            let mut b = LevelBuffer::new(cfg(8, Prioritization::Rank, 0.7, 0.0));
            for (l, &s) in levels.iter().zip(&scores) {
                b.update(l, f(s), 0.0, 0);
            }
            b.replay_distribution(0).unwrap()
        };
        let base = build(&|s| s);
        for f in [&(|s: f64| 2.0 * s + 1.0) as &dyn Fn(f64) -> f64, &|s: f64| s.exp(), &|s: f64| s.powi(3) + 0.5 * s] {
            let p = build(f);
            for (a, b) in base.iter().zip(&p) {
                assert!((a - b).abs() < 1e-12, "rank must ignore score scale");
            }
        }
    }

    #[test]
    fn single_entry_distribution_is_degenerate_uniform() {
        let levels = some_levels(1);
        let mut buf = LevelBuffer::new(cfg(4, Prioritization::Rank, 1.0, 0.9));
        buf.update(&levels[0], 0.1, 0.0, 7);
        let p = buf.replay_distribution(7).unwrap();
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn sample_replay_follows_distribution() {
        let levels = some_levels(2);
        let mut buf = LevelBuffer::new(cfg(4, Prioritization::Rank, 1.0, 0.0));
        buf.update(&levels[0], 1.0, 0.0, 0); // rank 1 -> 2/3
        buf.update(&levels[1], 0.5, 0.0, 0); // rank 2 -> 1/3
        let mut r = rng(7);
        let n = 30_000;
        let first = (0..n).filter(|_| buf.sample_replay(0, &mut r).unwrap() == 0).count();
        let frac = first as f64 / n as f64;
        assert!((frac - 2.0 / 3.0).abs() < 0.01, "sampled fraction {frac}");
    }

    #[test]
    fn reindex_restores_lookup_after_roundtrip() {
        let levels = some_levels(3);
        let mut buf = LevelBuffer::new(cfg(4, Prioritization::Rank, 1.0, 0.1));
        for (i, l) in levels.iter().enumerate() {
            buf.update(l, i as f64, 0.0, i as u64);
        }
        let json = serde_json::to_string(&buf).unwrap();
        let mut back: LevelBuffer = serde_json::from_str(&json).unwrap();
        assert!(!back.contains(levels[0].key()), "index is skipped by serde");
        back.reindex();
        for l in &levels {
            assert!(back.contains(l.key()));
        }
        assert_eq!(back.len(), 3);
    }
}
